import shutil
import sys
import textwrap

import pytest

from maxcode.core import IOPair, ProblemSpec
from maxcode.environment import (
    BaselineError,
    ExecConfig,
    InfrastructureError,
    ProblemSetError,
    SubprocessExecutor,
    evaluate_candidate,
    load_problem,
    load_problem_set,
    measure_baseline,
    normalize_output,
)

pytestmark = pytest.mark.subprocess

PY = sys.executable
PY_CONFIG = ExecConfig(
    compile_command_template=f"{PY} -m py_compile {{src}}",
    run_command_template=f"{PY} {{src}}",
    source_name="main.py",
    warmup_runs=0,
    timed_runs=1,
    timeout_ms=5000,
)

SUM_BASELINE = "import sys\nprint(sum(int(x) for x in sys.stdin.read().split()))\n"


def sum_problem(**kw):
    return ProblemSpec(
        "sum",
        "Print the sum of the integers on stdin.",
        SUM_BASELINE,
        (IOPair("1 2\n", "3\n"), IOPair("5 5 5", "15")),
        **kw,
    )


def test_normalize_output():
    assert normalize_output("a  \r\nb\t\n\n\n") == "a\nb"
    assert normalize_output("x") == normalize_output("x\n")
    assert normalize_output(" a") != normalize_output("a")


def test_copy_of_baseline_is_correct():
    fb = evaluate_candidate(PY_CONFIG, sum_problem(), SUM_BASELINE)
    assert fb.compiled and fb.correct
    assert fb.speedup > 0 and fb.time_ms > 0
    assert "run times" in fb.perf_detail


def test_syntax_error_does_not_compile():
    fb = evaluate_candidate(PY_CONFIG, sum_problem(), "def broken(:\n")
    assert not fb.compiled and not fb.correct and fb.speedup == 0
    assert "SyntaxError" in fb.correctness_detail


def test_wrong_answer_names_the_test():
    wrong = "import sys\nd = sys.stdin.read().split()\nprint(15 if len(d) == 3 else 4)\n"
    fb = evaluate_candidate(PY_CONFIG, sum_problem(), wrong)
    assert fb.compiled and not fb.correct and fb.speedup == 0
    assert fb.correctness_detail.startswith("test 1:")
    assert "expected '3" in fb.correctness_detail and "got '4" in fb.correctness_detail


def test_runtime_error_and_timeout():
    ex = SubprocessExecutor(PY_CONFIG)
    prob = sum_problem(baseline_time_ms=10.0, timeout_ms=300)
    fb = ex.evaluate(prob, "raise SystemExit(3)\n")
    assert not fb.correct and "runtime error (exit 3)" in fb.correctness_detail
    fb = ex.evaluate(prob, "import time\ntime.sleep(5)\n")
    assert not fb.correct and "timeout" in fb.correctness_detail


def test_empty_candidate():
    fb = SubprocessExecutor(PY_CONFIG).evaluate(sum_problem(baseline_time_ms=1.0), "   ")
    assert not fb.compiled


def test_baseline_cached_and_validated():
    ex = SubprocessExecutor(PY_CONFIG)
    prob = sum_problem()
    first = ex.measure_baseline(prob)
    assert ex.measure_baseline(prob) == first
    assert ex.with_baseline(prob).baseline_time_ms == first
    bad = ProblemSpec("bad", "d", "print(0)\n", (IOPair("1 2", "3"),))
    with pytest.raises(BaselineError):
        measure_baseline(PY_CONFIG, bad)


def test_sleep_baseline_lands_in_band():
    sh = shutil.which("sh")
    if sh is None:
        pytest.skip("no sh")
    cfg = ExecConfig(
        compile_command_template="",
        run_command_template=f"{sh} {{src}}",
        source_name="run.sh",
        warmup_runs=1,
        timed_runs=5,
    )
    prob = ProblemSpec("sleep", "sleep", "sleep 0.05\n", (IOPair("", ""),))
    ms = measure_baseline(cfg, prob)
    assert 40.0 <= ms <= 80.0


def test_missing_interpreter_is_infrastructure_error():
    cfg = ExecConfig(compile_command_template="", run_command_template="/nonexistent/interp {src}", source_name="x")
    with pytest.raises(InfrastructureError):
        SubprocessExecutor(cfg).evaluate(sum_problem(baseline_time_ms=1.0), "x")


def test_config_validation():
    with pytest.raises(ValueError):
        ExecConfig(timed_runs=0)
    with pytest.raises(ValueError):
        ExecConfig(compile_command_template="cc -o {bin}")
    with pytest.raises(ValueError):
        ExecConfig(run_command_template="./a.out")


def _write_problem(root, name, tests=(("1", "1 2", "3"),), baseline=SUM_BASELINE):
    d = root / name
    (d / "tests").mkdir(parents=True)
    (d / "problem.txt").write_text("Sum the numbers.\n")
    (d / "baseline.py").write_text(baseline)
    for stem, i, o in tests:
        (d / "tests" / f"{stem}.in").write_text(i)
        (d / "tests" / f"{stem}.out").write_text(o)
    return d


def test_problem_layout(tmp_path):
    _write_problem(tmp_path, "b", tests=(("10", "1 1", "2"), ("2", "2 2", "4"), ("1", "0", "0")))
    _write_problem(tmp_path, "a")
    probs = load_problem_set(tmp_path)
    assert [p.id for p in probs] == ["a", "b"]
    assert [c.input for c in probs[1].test_cases] == ["0", "2 2", "1 1"]
    assert probs[0].description == "Sum the numbers."


def test_problem_layout_errors(tmp_path):
    d = _write_problem(tmp_path, "x")
    (d / "baseline.cpp").write_text("int main(){}")
    with pytest.raises(ProblemSetError, match="exactly one"):
        load_problem(d)
    d = _write_problem(tmp_path, "y")
    (d / "tests" / "2.in").write_text("1")
    with pytest.raises(ProblemSetError, match="no matching"):
        load_problem(d)
    with pytest.raises(ProblemSetError):
        load_problem_set(tmp_path / "missing")


def test_cpp_fixture_compiles(gpp, tmp_path):
    cfg = ExecConfig(warmup_runs=0, timed_runs=1, workdir_root=str(tmp_path))
    prob = ProblemSpec("echo", "echo", "", (IOPair("7\n", "7\n"),), baseline_time_ms=1.0)
    src = "#include <iostream>\nint main(){int x; std::cin>>x; std::cout<<x<<std::endl;}\n"
    fb = SubprocessExecutor(cfg).evaluate(prob, src)
    assert fb.compiled and fb.correct
    fb = SubprocessExecutor(cfg).evaluate(prob, "int main( {")
    assert not fb.compiled and "error" in fb.correctness_detail
    assert list(tmp_path.iterdir()) == []
