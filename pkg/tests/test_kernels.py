import importlib
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from maxcode import _kernels_py, kernels
from maxcode.environment.simulator import Landscape

try:
    compiled = importlib.import_module("maxcode._kernels")
except ImportError:
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _landscape(seed=3, **kw):
    try:
        return Landscape(seed=seed, **kw)
    except ValueError:
        # tiny boxes can lack a feasible baseline point
        assume(False)


@needs_ext
@pytest.mark.skipif(os.environ.get("MAXCODE_PURE_PYTHON") == "1", reason="fallback forced by MAXCODE_PURE_PYTHON")
def test_compiled_backend_is_selected():
    assert kernels.BACKEND == "cython"


def test_pure_python_env_override():
    out = subprocess.run(
        [sys.executable, "-c", "from maxcode import kernels; print(kernels.BACKEND)"],
        env={**os.environ, "MAXCODE_PURE_PYTHON": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"


@needs_ext
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(2, 9))
def test_evaluate_points_parity(seed, dim, extent):
    ls = _landscape(seed, dim=dim, extent=extent)
    rng = np.random.default_rng(seed)
    pts = rng.integers(-1, extent + 1, size=(200, dim))
    a_ok, a_s = _kernels_py.evaluate_points(pts, ls.model)
    b_ok, b_s = compiled.evaluate_points(pts, ls.model)
    assert np.array_equal(a_ok, b_ok)
    assert np.array_equal(a_s, b_s)


@needs_ext
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_grid_and_ball_parity(seed, dim):
    ls = _landscape(seed, dim=dim, extent=8)
    lo = np.zeros(dim, dtype=np.int64)
    hi = np.full(dim, 7, dtype=np.int64)
    pa, sa, na = _kernels_py.grid_best(lo, hi, ls.model)
    pb, sb, nb = compiled.grid_best(lo, hi, ls.model)
    assert (None if pa is None else tuple(pa)) == (None if pb is None else tuple(pb))
    assert sa == sb and na == nb
    center = np.asarray(ls.baseline_params, dtype=np.int64)
    for r in (0, 1, 3):
        assert _kernels_py.ball_best(center, r, ls.model) == compiled.ball_best(center, r, ls.model)


def test_grid_best_empty_box():
    ls = _landscape()
    best, s, n = kernels.grid_best(np.array([5, 5, 5]), np.array([4, 4, 4]), ls.model)
    assert best is None and n == 0
