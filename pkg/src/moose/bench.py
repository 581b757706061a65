"""Benchmark harness: run a manifest of jobs and tabulate the outcomes.

A manifest is JSON::

    {"jobs": [{"mode": "run" | "optimal" | "pruned",
               "domain": "...pddl", "problem": "...pddl",
               "program": "...json", "seed": 0,
               "time_limit": 60, "max_expansions": null}, ...]}

Paths are relative to the manifest.  Memory figures come from
``tracemalloc`` peaks and are estimates of Python heap use only.
"""
from __future__ import annotations

import csv
import io
import json
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from moose.executor import instantiate
from moose.pddl import load_domain, load_problem
from moose.planner import SearchLimits, ground, optimal_plan
from moose.pruning import pruned_astar
from moose.semantics import validate_plan
from moose.synthesis import MooseProgram

MODES = ("run", "optimal", "pruned")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class BenchJob:
    mode: str
    domain: str
    problem: str
    program: Optional[str] = None
    seed: int = 0
    time_limit: Optional[float] = None
    max_expansions: Optional[int] = None


@dataclass
class BenchRecord:
    domain: str
    problem: str
    mode: str
    seed: int
    outcome: str
    seconds: float
    peak_mem_mb_est: float
    plan_length: Optional[int]
    expansions: Optional[int]
    rules: Optional[int]

    @property
    def solved(self) -> bool:
        return self.outcome in ("success", "plan")


def load_manifest(path: Path) -> List[BenchJob]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("jobs"), list):
        raise ManifestError(f"{path}: expected an object with a 'jobs' list")
    base = path.parent
    jobs = []
    for i, j in enumerate(doc["jobs"]):
        try:
            mode = j["mode"]
            if mode not in MODES:
                raise ManifestError(f"job {i}: unknown mode {mode!r}")
            if mode in ("run", "pruned") and not j.get("program"):
                raise ManifestError(f"job {i}: mode {mode} needs a program")
            jobs.append(
                BenchJob(
                    mode=mode,
                    domain=str(base / j["domain"]),
                    problem=str(base / j["problem"]),
                    program=str(base / j["program"]) if j.get("program") else None,
                    seed=int(j.get("seed", 0)),
                    time_limit=j.get("time_limit"),
                    max_expansions=j.get("max_expansions"),
                )
            )
        except KeyError as exc:
            raise ManifestError(f"job {i}: missing field {exc}") from None
    return jobs


def run_job(job: BenchJob) -> BenchRecord:
    dom = load_domain(job.domain)
    prob = load_problem(job.problem, dom)
    program = MooseProgram.from_json(Path(job.program).read_text()) if job.program else None
    limits = SearchLimits(job.max_expansions, job.time_limit)
    tracemalloc.start()
    start = time.perf_counter()
    expansions = None
    if job.mode == "run":
        res = instantiate(prob, program)
        plan, outcome = res.plan, res.status
    elif job.mode == "optimal":
        res = optimal_plan(ground(prob), limits)
        plan, outcome, expansions = res.plan, res.outcome, res.stats.expansions
    else:
        res = pruned_astar(prob, program, limits=limits)
        plan, outcome, expansions = res.plan, res.outcome, res.stats.expansions
    seconds = time.perf_counter() - start
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    if outcome in ("success", "plan") and not validate_plan(prob, plan).valid:
        outcome = "invalid-plan"
    solved = outcome in ("success", "plan")
    return BenchRecord(
        domain=dom.name,
        problem=prob.name,
        mode=job.mode,
        seed=job.seed,
        outcome=outcome,
        seconds=seconds,
        peak_mem_mb_est=peak / 2**20,
        plan_length=len(plan) if solved else None,
        expansions=expansions,
        rules=len(program) if program is not None else None,
    )


def run_manifest(jobs: Sequence[BenchJob], workers: int = 1) -> List[BenchRecord]:
    if workers <= 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, jobs))


FIELDS = [
    "domain",
    "problem",
    "mode",
    "seed",
    "outcome",
    "seconds",
    "peak_mem_mb_est",
    "plan_length",
    "expansions",
    "rules",
]


def records_csv(records: Sequence[BenchRecord], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, FIELDS, lineterminator="\n")
    w.writeheader()
    for r in records:
        row = asdict(r)
        if timing:
            row["seconds"] = f"{r.seconds:.4f}"
            row["peak_mem_mb_est"] = f"{r.peak_mem_mb_est:.2f}"
        else:
            row["seconds"] = row["peak_mem_mb_est"] = ""
        w.writerow({k: "" if v is None else v for k, v in row.items()})
    return buf.getvalue()


def coverage_series(records: Sequence[BenchRecord]) -> List[Tuple[float, int]]:
    """Cumulative number of solved jobs against wall time."""
    times = sorted(r.seconds for r in records if r.solved)
    return [(t, i + 1) for i, t in enumerate(times)]


def coverage_csv(records: Sequence[BenchRecord], timing: bool = True) -> str:
    lines = ["seconds,solved"]
    if timing:
        lines += [f"{t:.4f},{n}" for t, n in coverage_series(records)]
    else:
        lines += [f",{i + 1}" for i in range(sum(r.solved for r in records))]
    return "\n".join(lines) + "\n"
