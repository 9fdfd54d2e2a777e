"""Compile, test and time candidate programs in scratch directories."""
from __future__ import annotations

import dataclasses
import logging
import shlex
import shutil
import statistics
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from ..core import ExecFeedback, ProblemSpec

log = logging.getLogger(__name__)

EXCERPT = 200


class InfrastructureError(RuntimeError):
    """The harness itself failed; not attributable to the candidate."""


class BaselineError(RuntimeError):
    """The baseline program does not pass its own tests."""


@dataclass(frozen=True)
class ExecConfig:
    """Command templates use ``{src}`` and ``{bin}`` placeholders.

    An empty ``compile_command_template`` means the source is run directly
    (interpreted languages); ``{bin}`` then names the source file.
    """

    compile_command_template: str = "g++ -O2 -o {bin} {src}"
    run_command_template: str = "{bin}"
    source_name: str = "main.cpp"
    warmup_runs: int = 1
    timed_runs: int = 5
    timeout_ms: int = 10_000
    workdir_root: str | None = None

    def __post_init__(self):
        if self.timed_runs < 1:
            raise ValueError("timed_runs must be >= 1")
        if self.warmup_runs < 0:
            raise ValueError("warmup_runs must be >= 0")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.compile_command_template and "{src}" not in self.compile_command_template:
            raise ValueError("compile command must contain {src}")
        if "{bin}" not in self.run_command_template and "{src}" not in self.run_command_template:
            raise ValueError("run command must contain {bin} or {src}")


def normalize_output(text: str) -> str:
    """Strip trailing whitespace per line and trailing blank lines."""
    lines = [line.rstrip() for line in text.replace("\r\n", "\n").split("\n")]
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines)


def _excerpt(text: str) -> str:
    text = text.strip()
    return text if len(text) <= EXCERPT else text[:EXCERPT] + "..."


class SubprocessExecutor:
    """Executor contract backed by real processes.

    Baseline timings are measured once per problem and cached for the
    lifetime of the executor.
    """

    def __init__(self, config: ExecConfig):
        self.config = config
        self._baseline_ms: dict[str, float] = {}
        self._lock = threading.Lock()
        self.calls = 0

    def _commands(self, workdir: Path) -> tuple[list[str] | None, list[str]]:
        src = workdir / self.config.source_name
        binary = workdir / "prog" if self.config.compile_command_template else src
        fmt = {"src": shlex.quote(str(src)), "bin": shlex.quote(str(binary))}
        compile_cmd = (
            shlex.split(self.config.compile_command_template.format(**fmt))
            if self.config.compile_command_template
            else None
        )
        run_cmd = shlex.split(self.config.run_command_template.format(**fmt))
        return compile_cmd, run_cmd

    def _run(self, cmd: list[str], stdin: str, timeout_s: float, cwd: Path):
        try:
            start = time.perf_counter()
            proc = subprocess.run(
                cmd, input=stdin, capture_output=True, text=True, timeout=timeout_s, cwd=cwd
            )
            return proc, (time.perf_counter() - start) * 1000.0
        except FileNotFoundError as exc:
            raise InfrastructureError(f"command not found: {cmd[0]}") from exc
        except PermissionError as exc:
            raise InfrastructureError(f"cannot execute {cmd[0]}: {exc}") from exc

    def _execute(self, problem: ProblemSpec, code: str, baseline_ms: float | None) -> ExecFeedback:
        cfg = self.config
        timeout_s = min(cfg.timeout_ms, problem.timeout_ms) / 1000.0
        try:
            workdir = Path(tempfile.mkdtemp(prefix="cand-", dir=cfg.workdir_root))
        except OSError as exc:
            raise InfrastructureError(f"cannot create scratch directory: {exc}") from exc
        try:
            (workdir / cfg.source_name).write_text(code)
            compile_cmd, run_cmd = self._commands(workdir)
            if compile_cmd is not None:
                try:
                    proc, _ = self._run(compile_cmd, "", timeout_s, workdir)
                except subprocess.TimeoutExpired:
                    return ExecFeedback(False, False, "compilation timeout")
                if proc.returncode != 0:
                    return ExecFeedback(False, False, _excerpt(proc.stderr + proc.stdout) or "compilation failed")

            for idx, case in enumerate(problem.test_cases, start=1):
                try:
                    proc, _ = self._run(run_cmd, case.input, timeout_s, workdir)
                except subprocess.TimeoutExpired:
                    return ExecFeedback(True, False, f"test {idx}: timeout", time_ms=0.0)
                if proc.returncode != 0:
                    return ExecFeedback(
                        True,
                        False,
                        f"test {idx}: runtime error (exit {proc.returncode}): {_excerpt(proc.stderr)}",
                        time_ms=0.0,
                    )
                if normalize_output(proc.stdout) != normalize_output(case.expected_output):
                    return ExecFeedback(
                        True,
                        False,
                        f"test {idx}: wrong answer; expected {_excerpt(case.expected_output)!r}, "
                        f"got {_excerpt(proc.stdout)!r}",
                        time_ms=0.0,
                    )

            times = []
            for i in range(cfg.warmup_runs + cfg.timed_runs):
                total = 0.0
                for case in problem.test_cases:
                    try:
                        _, elapsed = self._run(run_cmd, case.input, timeout_s, workdir)
                    except subprocess.TimeoutExpired:
                        return ExecFeedback(True, False, "timeout", time_ms=0.0)
                    total += elapsed
                if i >= cfg.warmup_runs:
                    times.append(total)
            median = statistics.median(times)
            speedup = baseline_ms / median if baseline_ms else 1.0
            return ExecFeedback(
                compiled=True,
                correct=True,
                correctness_detail=f"all {len(problem.test_cases)} tests passed",
                time_ms=median,
                speedup=speedup,
                perf_detail="run times (ms): " + ", ".join(f"{t:.2f}" for t in times),
            )
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    def measure_baseline(self, problem: ProblemSpec) -> float:
        with self._lock:
            if problem.id in self._baseline_ms:
                return self._baseline_ms[problem.id]
        if problem.baseline_time_ms is not None:
            value = problem.baseline_time_ms
        else:
            fb = self._execute(problem, problem.baseline_code, None)
            if not fb.correct:
                raise BaselineError(f"baseline of {problem.id} fails its own tests: {fb.correctness_detail}")
            value = fb.time_ms
        with self._lock:
            self._baseline_ms.setdefault(problem.id, value)
            return self._baseline_ms[problem.id]

    def with_baseline(self, problem: ProblemSpec) -> ProblemSpec:
        return dataclasses.replace(problem, baseline_time_ms=self.measure_baseline(problem))

    def evaluate(self, problem: ProblemSpec, code: str) -> ExecFeedback:
        self.calls += 1
        if not code.strip():
            return ExecFeedback(False, False, "empty candidate")
        return self._execute(problem, code, self.measure_baseline(problem))


def evaluate_candidate(config: ExecConfig, problem: ProblemSpec, code: str) -> ExecFeedback:
    return SubprocessExecutor(config).evaluate(problem, code)


def measure_baseline(config: ExecConfig, problem: ProblemSpec) -> float:
    return SubprocessExecutor(config).measure_baseline(problem)
