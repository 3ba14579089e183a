"""Scheduling instances on unrelated machines, exact schedule evaluation, generators.

All times are exact rationals (`fractions.Fraction`).  A processing time of
``None`` means the job cannot run on that machine.  Two evaluators are
provided: non-preemptive first-come-first-served for the max-flow objective,
and preemptive shortest-remaining-processing-time (SRPT) over unit slots for
total flow.  Both emit explicit ``(machine, job, start, end)`` segments so
work conservation is directly checkable.

Ties (equal releases, equal remaining work) always break by job index, so
every evaluation is deterministic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .util import ValidationError, rat_from_str, rat_to_str


@dataclass(frozen=True)
class Job:
    """One job: release time plus one processing time per machine (None = forbidden)."""

    release: Fraction
    proc: tuple[Optional[Fraction], ...]


@dataclass(frozen=True)
class SchedulingInstance:
    """Jobs with release times and per-machine processing times.

    The position of a job in ``jobs`` is its canonical index.
    """

    m: int
    jobs: tuple[Job, ...]

    @property
    def n(self) -> int:
        return len(self.jobs)

    def finite_procs(self):
        for j, job in enumerate(self.jobs):
            for i, p in enumerate(job.proc):
                if p is not None:
                    yield j, i, p


@dataclass(frozen=True)
class MachineAssignment:
    """Integral job-to-machine assignment; entry j is a machine index."""

    assign: tuple[int, ...]


@dataclass(frozen=True)
class ScheduleMetrics:
    """Per-job flow times plus aggregates and the explicit processing timeline."""

    per_job_flow: tuple[Fraction, ...]
    max_flow: Fraction
    total_flow: Fraction
    segments: tuple[tuple[int, int, Fraction, Fraction], ...]  # (machine, job, start, end)


def make_instance(m: int, jobs: Sequence[tuple]) -> SchedulingInstance:
    """Convenience constructor: jobs given as ``(release, [p0, p1, ...])`` tuples.

    Processing entries may be int/str/Fraction or None for "cannot run here".
    """
    built = []
    for release, procs in jobs:
        row = tuple(None if p is None else Fraction(p) for p in procs)
        built.append(Job(release=Fraction(release), proc=row))
    return SchedulingInstance(m=m, jobs=tuple(built))


def validate_instance(inst: SchedulingInstance) -> list[str]:
    """Return a list of invariant violations (empty iff the instance is well formed)."""
    problems: list[str] = []
    if inst.m < 1:
        problems.append(f"machine count must be >= 1, got {inst.m}")
    for j, job in enumerate(inst.jobs):
        if len(job.proc) != inst.m:
            problems.append(f"job {j}: has {len(job.proc)} processing entries, expected {inst.m}")
            continue
        if job.release < 0:
            problems.append(f"job {j}: negative release time {job.release}")
        finite = [p for p in job.proc if p is not None]
        if not finite:
            problems.append(f"job {j}: no finite processing time on any machine")
        for i, p in enumerate(job.proc):
            if p is not None and p < 0:
                problems.append(f"job {j}: negative processing time {p} on machine {i}")
    return problems


def p_max(inst: SchedulingInstance) -> Fraction:
    """Largest finite processing time."""
    vals = [p for _, _, p in inst.finite_procs()]
    if not vals:
        raise ValidationError("instance has no finite processing times")
    return max(vals)


def proc_ratio(inst: SchedulingInstance) -> Fraction:
    """Ratio of the largest to the smallest positive finite processing time."""
    vals = [p for _, _, p in inst.finite_procs() if p > 0]
    if not vals:
        raise ValidationError("no positive finite processing times")
    return max(vals) / min(vals)


def _check_assignment(inst: SchedulingInstance, asg: MachineAssignment) -> None:
    if len(asg.assign) != inst.n:
        raise ValidationError(f"assignment length {len(asg.assign)} != job count {inst.n}")
    for j, i in enumerate(asg.assign):
        if not 0 <= i < inst.m:
            raise ValidationError(f"job {j} assigned to machine {i} outside [0, {inst.m})")
        if inst.jobs[j].proc[i] is None:
            raise ValidationError(f"job {j} assigned to machine {i} with infinite processing time")


def evaluate_max_flow(inst: SchedulingInstance, asg: MachineAssignment) -> ScheduleMetrics:
    """Run each machine non-preemptively in release order and report flow times.

    Jobs start at max(own release, previous completion); ties in release break
    by job index.
    """
    _check_assignment(inst, asg)
    completion: dict[int, Fraction] = {}
    segments: list[tuple[int, int, Fraction, Fraction]] = []
    for i in range(inst.m):
        queue = sorted(
            (j for j in range(inst.n) if asg.assign[j] == i),
            key=lambda j: (inst.jobs[j].release, j),
        )
        clock = Fraction(0)
        for j in queue:
            start = max(inst.jobs[j].release, clock)
            end = start + inst.jobs[j].proc[i]
            completion[j] = end
            segments.append((i, j, start, end))
            clock = end
    flows = tuple(completion[j] - inst.jobs[j].release for j in range(inst.n))
    return ScheduleMetrics(
        per_job_flow=flows,
        max_flow=max(flows),
        total_flow=sum(flows, Fraction(0)),
        segments=tuple(segments),
    )


def evaluate_total_flow_srpt(inst: SchedulingInstance, asg: MachineAssignment) -> ScheduleMetrics:
    """Preemptive SRPT per machine over unit slots; requires integral times.

    Every release and processing time must be a nonnegative integer.  At each
    integer slot the assigned, released, incomplete job with the least
    remaining work runs (ties by job index).  Zero-length jobs complete at
    their release instant.
    """
    _check_assignment(inst, asg)
    for j, job in enumerate(inst.jobs):
        if job.release.denominator != 1:
            raise ValidationError(f"job {j}: SRPT simulation needs integer release, got {job.release}")
        p = job.proc[asg.assign[j]]
        if p.denominator != 1:
            raise ValidationError(f"job {j}: SRPT simulation needs integer processing time, got {p}")

    completion: dict[int, Fraction] = {}
    segments: list[tuple[int, int, Fraction, Fraction]] = []
    for i in range(inst.m):
        jobs_here = [j for j in range(inst.n) if asg.assign[j] == i]
        remaining = {j: int(inst.jobs[j].proc[i]) for j in jobs_here}
        for j in jobs_here:
            if remaining[j] == 0:
                completion[j] = inst.jobs[j].release
        pending = {j for j in jobs_here if remaining[j] > 0}
        if not pending:
            continue
        slot_log: list[tuple[int, int]] = []  # (slot, job)
        t = min(int(inst.jobs[j].release) for j in pending)
        while pending:
            avail = [j for j in pending if int(inst.jobs[j].release) <= t]
            if not avail:
                t = min(int(inst.jobs[j].release) for j in pending)
                continue
            j = min(avail, key=lambda q: (remaining[q], q))
            slot_log.append((t, j))
            remaining[j] -= 1
            if remaining[j] == 0:
                completion[j] = Fraction(t + 1)
                pending.remove(j)
            t += 1
        # merge consecutive slots of the same job into segments
        for t0, j in slot_log:
            if segments and segments[-1][1] == j and segments[-1][0] == i and segments[-1][3] == t0:
                mi, mj, s0, _ = segments[-1]
                segments[-1] = (mi, mj, s0, Fraction(t0 + 1))
            else:
                segments.append((i, j, Fraction(t0), Fraction(t0 + 1)))
    flows = tuple(completion[j] - inst.jobs[j].release for j in range(inst.n))
    return ScheduleMetrics(
        per_job_flow=flows,
        max_flow=max(flows),
        total_flow=sum(flows, Fraction(0)),
        segments=tuple(segments),
    )


def gen_periodic_instance(base: SchedulingInstance, copies: int, period) -> SchedulingInstance:
    """Release `copies` copies of `base` at times period, 2*period, ..., copies*period.

    `base` must have all releases at 0; `period` is the caller-supplied
    optimal makespan of the base instance.
    """
    if copies < 1:
        raise ValidationError(f"copy count must be >= 1, got {copies}")
    period = Fraction(period)
    if period <= 0:
        raise ValidationError(f"period must be positive, got {period}")
    if any(job.release != 0 for job in base.jobs):
        raise ValidationError("base instance must release every job at time 0")
    jobs = []
    for c in range(1, copies + 1):
        for job in base.jobs:
            jobs.append(Job(release=c * period, proc=job.proc))
    return SchedulingInstance(m=base.m, jobs=tuple(jobs))


def gen_random_instance(n, m, p_range, r_range, infinity_prob, seed) -> SchedulingInstance:
    """Deterministic random instance with integer releases and processing times.

    Each p_ij is infinite with probability `infinity_prob`; rows that come out
    all-infinite are resampled so every job keeps at least one finite machine.
    """
    p_lo, p_hi = int(p_range[0]), int(p_range[1])
    r_lo, r_hi = int(r_range[0]), int(r_range[1])
    if n < 1 or m < 1:
        raise ValidationError("need n >= 1 and m >= 1")
    if p_lo < 1 or p_hi < p_lo:
        raise ValidationError(f"bad processing range [{p_lo}, {p_hi}]")
    if r_lo < 0 or r_hi < r_lo:
        raise ValidationError(f"bad release range [{r_lo}, {r_hi}]")
    if not 0 <= infinity_prob < 1:
        raise ValidationError(f"infinity_prob must lie in [0, 1), got {infinity_prob}")
    rng = random.Random(seed)
    jobs = []
    for _ in range(n):
        release = Fraction(rng.randint(r_lo, r_hi))
        while True:
            row = []
            for _ in range(m):
                if rng.random() < infinity_prob:
                    row.append(None)
                else:
                    row.append(Fraction(rng.randint(p_lo, p_hi)))
            if any(p is not None for p in row):
                break
        jobs.append(Job(release=release, proc=tuple(row)))
    return SchedulingInstance(m=m, jobs=tuple(jobs))


def instance_to_json(inst: SchedulingInstance) -> dict:
    return {
        "m": inst.m,
        "jobs": [
            {
                "r": rat_to_str(job.release),
                "p": [None if p is None else rat_to_str(p) for p in job.proc],
            }
            for job in inst.jobs
        ],
    }


def instance_from_json(data: dict) -> SchedulingInstance:
    try:
        m = int(data["m"])
        raw_jobs = data["jobs"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"instance file missing field: {exc}") from None
    jobs = []
    for idx, row in enumerate(raw_jobs):
        try:
            release = rat_from_str(row["r"])
            proc = tuple(None if p is None else rat_from_str(p) for p in row["p"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"instance file: job {idx} malformed: {exc}") from None
        jobs.append(Job(release=release, proc=proc))
    inst = SchedulingInstance(m=m, jobs=tuple(jobs))
    problems = validate_instance(inst)
    if problems:
        raise ValidationError("instance file invalid: " + "; ".join(problems))
    return inst
