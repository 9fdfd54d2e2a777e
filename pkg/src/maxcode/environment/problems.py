"""Load problem sets laid out as one directory per problem.

Each problem directory holds ``problem.txt``, a single ``baseline.<ext>``
and ``tests/`` with paired ``N.in`` / ``N.out`` files.
"""
from __future__ import annotations

from pathlib import Path

from ..core import IOPair, PIE_BINS, ProblemSpec, RewardBins


class ProblemSetError(ValueError):
    pass


def _test_key(path: Path):
    stem = path.stem
    return (0, int(stem), "") if stem.isdigit() else (1, 0, stem)


def load_problem(directory: Path, bins: RewardBins = PIE_BINS, timeout_ms: int = 10_000) -> ProblemSpec:
    directory = Path(directory)
    desc_file = directory / "problem.txt"
    if not desc_file.is_file():
        raise ProblemSetError(f"{directory}: missing problem.txt")
    baselines = sorted(directory.glob("baseline.*"))
    if len(baselines) != 1:
        raise ProblemSetError(f"{directory}: expected exactly one baseline.<ext>, found {len(baselines)}")
    tests_dir = directory / "tests"
    cases = []
    for inp in sorted(tests_dir.glob("*.in"), key=_test_key):
        out = inp.with_suffix(".out")
        if not out.is_file():
            raise ProblemSetError(f"{inp}: no matching .out file")
        cases.append(IOPair(inp.read_text(), out.read_text()))
    if not cases:
        raise ProblemSetError(f"{directory}: no test cases under tests/")
    return ProblemSpec(
        id=directory.name,
        description=desc_file.read_text().strip(),
        baseline_code=baselines[0].read_text(),
        test_cases=tuple(cases),
        bins=bins,
        timeout_ms=timeout_ms,
    )


def load_problem_set(root: Path, bins: RewardBins = PIE_BINS, timeout_ms: int = 10_000) -> list[ProblemSpec]:
    root = Path(root)
    if not root.is_dir():
        raise ProblemSetError(f"problems directory {root} does not exist")
    problems = [load_problem(d, bins, timeout_ms) for d in sorted(root.iterdir()) if d.is_dir()]
    if not problems:
        raise ProblemSetError(f"no problem directories under {root}")
    return problems


def baseline_extension(directory: Path) -> str:
    baselines = sorted(Path(directory).glob("baseline.*"))
    return baselines[0].suffix if baselines else ""
