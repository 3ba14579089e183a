"""Total-flow-time pipeline: time-indexed LP, grouped auxiliary LP with
relaxation slack, consistent ordering, job splitting, and discrepancy rounding.

Solutions live on an integer slot grid.  Jobs are grouped per machine into
size classes (class k holds processing times in (2^(k-1), 2^k]); the
auxiliary objective charges (t - r)/2^k + 1/2 per unit volume so same-class
volume can be exchanged between jobs at no cost.  The relaxation slack alpha
of a solution is the worst window overload per class, measured exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import lp as lpmod
from .coloring import PREFIX, SignedVectorSequence, discrepancy
from .core import (
    Job,
    MachineAssignment,
    SchedulingInstance,
    evaluate_total_flow_srpt,
    validate_instance,
)
from .util import InternalCheckError, ValidationError, rat_from_str, rat_to_str


def class_index(p) -> int:
    """Smallest k with p <= 2^k, i.e. the size class holding p (k=0 for p=1)."""
    p = Fraction(p)
    if p <= 0:
        raise ValidationError(f"size class needs a positive processing time, got {p}")
    k = 0
    while Fraction(2) ** k < p:
        k += 1
    while Fraction(2) ** (k - 1) >= p:
        k -= 1
    return k


@dataclass
class TimeIndexedSolution:
    """Sparse (machine, job, slot) -> volume map over an integer horizon."""

    horizon: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        cleaned = {}
        for (i, j, t), v in self.entries.items():
            v = Fraction(v)
            if v != 0:
                cleaned[(int(i), int(j), int(t))] = v
        self.entries = cleaned

    def job_machine_total(self, i: int, j: int) -> Fraction:
        return sum((v for (ii, jj, _), v in self.entries.items() if ii == i and jj == j), Fraction(0))

    def copy(self) -> "TimeIndexedSolution":
        return TimeIndexedSolution(self.horizon, dict(self.entries))


def solution_violations(inst: SchedulingInstance, y: TimeIndexedSolution) -> list[str]:
    problems = []
    totals = [Fraction(0)] * inst.n
    for (i, j, t), v in y.entries.items():
        if not (0 <= i < inst.m and 0 <= j < inst.n and 0 <= t < y.horizon):
            problems.append(f"entry ({i},{j},{t}) out of range")
            continue
        if v < 0:
            problems.append(f"negative volume at ({i},{j},{t})")
        p = inst.jobs[j].proc[i]
        if p is None:
            problems.append(f"volume on forbidden machine at ({i},{j},{t})")
            continue
        if Fraction(t) < inst.jobs[j].release:
            problems.append(f"volume before release at ({i},{j},{t})")
        totals[j] += v / p
    for j, tot in enumerate(totals):
        if tot != 1:
            problems.append(f"job {j}: completed fraction {tot} != 1")
    return problems


def default_horizon(inst: SchedulingInstance) -> int:
    """Max release plus the sum of per-job minimum processing times."""
    top = max(int(job.release) for job in inst.jobs)
    work = sum(int(min(p for p in job.proc if p is not None)) for job in inst.jobs)
    return top + work


def _require_integral(inst: SchedulingInstance) -> None:
    for j, job in enumerate(inst.jobs):
        if job.release.denominator != 1:
            raise ValidationError(f"job {j}: integer release required, got {job.release}")
        for p in job.proc:
            if p is not None and (p.denominator != 1 or p < 1):
                raise ValidationError(f"job {j}: positive integer processing times required")


def yvar(i: int, j: int, t: int) -> str:
    return f"y[{i},{j},{t}]"


def build_time_indexed_lp(inst: SchedulingInstance, horizon: Optional[int] = None) -> tuple:
    """Slot-indexed LP: objective sum((t - r)/p + 1/2) y, unit slot capacity.

    Returns (LinearProgram, horizon).  Infeasibility certifies a too-small
    horizon.
    """
    _require_integral(inst)
    H = default_horizon(inst) if horizon is None else int(horizon)
    lp = lpmod.LinearProgram()
    for j, job in enumerate(inst.jobs):
        for i in range(inst.m):
            if job.proc[i] is None:
                continue
            for t in range(int(job.release), H):
                lp.variables.append(yvar(i, j, t))
    for j, job in enumerate(inst.jobs):
        coeffs = {}
        for i in range(inst.m):
            p = job.proc[i]
            if p is None:
                continue
            for t in range(int(job.release), H):
                coeffs[yvar(i, j, t)] = Fraction(1) / p
        lp.add_constraint(coeffs, lpmod.EQ, 1)
    for i in range(inst.m):
        for t in range(H):
            coeffs = {}
            for j, job in enumerate(inst.jobs):
                if job.proc[i] is not None and int(job.release) <= t:
                    coeffs[yvar(i, j, t)] = Fraction(1)
            if coeffs:
                lp.add_constraint(coeffs, lpmod.LE, 1)
    for j, job in enumerate(inst.jobs):
        for i in range(inst.m):
            p = job.proc[i]
            if p is None:
                continue
            for t in range(int(job.release), H):
                lp.objective[yvar(i, j, t)] = (Fraction(t) - job.release) / p + Fraction(1, 2)
    return lp, H


def _event_slots(inst: SchedulingInstance, H: int) -> list[int]:
    slots = {0, H}
    for job in inst.jobs:
        slots.add(int(job.release))
    return sorted(slots)


def build_auxiliary_lp(inst: SchedulingInstance, alpha, horizon: Optional[int] = None) -> tuple:
    """Class-grouped LP: objective sum((t - r)/2^k + 1/2) y and window capacity
    per (machine, class, event window [t1, t2)) with slack alpha * 2^k.

    Window enumeration is restricted to event slots (releases and the horizon
    endpoints).  Returns (LinearProgram, horizon).
    """
    _require_integral(inst)
    alpha = Fraction(alpha)
    H = default_horizon(inst) if horizon is None else int(horizon)
    lp = lpmod.LinearProgram()
    classes: dict[tuple[int, int], int] = {}
    for j, job in enumerate(inst.jobs):
        for i in range(inst.m):
            if job.proc[i] is None:
                continue
            classes[(i, j)] = class_index(job.proc[i])
            for t in range(int(job.release), H):
                lp.variables.append(yvar(i, j, t))
    for j, job in enumerate(inst.jobs):
        coeffs = {}
        for i in range(inst.m):
            p = job.proc[i]
            if p is None:
                continue
            for t in range(int(job.release), H):
                coeffs[yvar(i, j, t)] = Fraction(1) / p
        lp.add_constraint(coeffs, lpmod.EQ, 1)
    events = _event_slots(inst, H)
    for i in range(inst.m):
        ks = sorted({k for (ii, _), k in classes.items() if ii == i})
        for k in ks:
            cap = alpha * Fraction(2) ** k
            for a in range(len(events)):
                for b in range(a + 1, len(events)):
                    t1, t2 = events[a], events[b]
                    coeffs = {}
                    for j, job in enumerate(inst.jobs):
                        if (i, j) in classes and job.proc[i] <= Fraction(2) ** k:
                            for t in range(max(t1, int(job.release)), t2):
                                coeffs[yvar(i, j, t)] = Fraction(1)
                    if coeffs:
                        lp.add_constraint(coeffs, lpmod.LE, t2 - t1 + cap)
    for j, job in enumerate(inst.jobs):
        for i in range(inst.m):
            p = job.proc[i]
            if p is None:
                continue
            k = classes[(i, j)]
            for t in range(int(job.release), H):
                lp.objective[yvar(i, j, t)] = (Fraction(t) - job.release) / Fraction(2) ** k + Fraction(1, 2)
    return lp, H


def solution_from_lp(inst: SchedulingInstance, sol: lpmod.LpSolution, horizon: int) -> TimeIndexedSolution:
    entries = {}
    for name, v in sol.values.items():
        if v == 0 or not name.startswith("y["):
            continue
        i, j, t = (int(part) for part in name[2:-1].split(","))
        entries[(i, j, t)] = v
    return TimeIndexedSolution(horizon=horizon, entries=entries)


def ti_cost(inst: SchedulingInstance, y: TimeIndexedSolution) -> Fraction:
    total = Fraction(0)
    for (i, j, t), v in y.entries.items():
        p = inst.jobs[j].proc[i]
        total += ((Fraction(t) - inst.jobs[j].release) / p + Fraction(1, 2)) * v
    return total


def aux_cost(inst: SchedulingInstance, y: TimeIndexedSolution) -> Fraction:
    total = Fraction(0)
    for (i, j, t), v in y.entries.items():
        k = class_index(inst.jobs[j].proc[i])
        total += ((Fraction(t) - inst.jobs[j].release) / Fraction(2) ** k + Fraction(1, 2)) * v
    return total


@dataclass(frozen=True)
class AlphaReport:
    alpha: Fraction
    witness: Optional[tuple]  # (machine, class, t1, t2) with window [t1, t2)

    def reproduce(self, inst: SchedulingInstance, y: TimeIndexedSolution) -> Fraction:
        if self.witness is None:
            return Fraction(0)
        i, k, t1, t2 = self.witness
        load = Fraction(0)
        for (ii, j, t), v in y.entries.items():
            if ii == i and t1 <= t < t2 and inst.jobs[j].proc[ii] <= Fraction(2) ** k:
                load += v
        excess = load - (t2 - t1)
        return max(Fraction(0), excess / Fraction(2) ** k)


def measure_alpha(inst: SchedulingInstance, y: TimeIndexedSolution) -> AlphaReport:
    """Exact worst window overload per class: max over (i, k, [t1, t2)) of
    (volume of class-<=k jobs inside the window minus its width) / 2^k,
    floored at zero.

    For a fixed solution the maximum is attained with both window endpoints on
    support slots, so a maximum-subarray scan over the support range is exact.
    """
    best = Fraction(0)
    best_wit = None
    per_machine_classes: dict[int, set] = {}
    for (i, j, _t) in y.entries:
        per_machine_classes.setdefault(i, set()).add(class_index(inst.jobs[j].proc[i]))
    for i, ks in sorted(per_machine_classes.items()):
        for k in sorted(ks):
            cap = Fraction(2) ** k
            loads: dict[int, Fraction] = {}
            for (ii, j, t), v in y.entries.items():
                if ii == i and inst.jobs[j].proc[ii] <= cap:
                    loads[t] = loads.get(t, Fraction(0)) + v
            if not loads:
                continue
            lo, hi = min(loads), max(loads)
            run = Fraction(0)
            run_start = lo
            for t in range(lo, hi + 1):
                gain = loads.get(t, Fraction(0)) - 1
                if run <= 0:
                    run = gain
                    run_start = t
                else:
                    run += gain
                if run > 0:
                    cand = run / cap
                    if cand > best:
                        best = cand
                        best_wit = (i, k, run_start, t + 1)
    return AlphaReport(alpha=best, witness=best_wit)


def canonical_order(inst: SchedulingInstance) -> list[int]:
    return sorted(range(inst.n), key=lambda j: (inst.jobs[j].release, j))


def normalize_consistent_order(
    inst: SchedulingInstance, y: TimeIndexedSolution, order: Optional[list[int]] = None
) -> TimeIndexedSolution:
    """Reflow each (machine, class) group so jobs run in one global order.

    Per group, the per-slot group volumes and the per-job totals are kept and
    jobs are refilled earliest-first in order.  Same-class exchanges are free
    under the grouped objective, so cost, per-(i,j) totals and the measured
    relaxation slack are all preserved exactly.
    """
    if order is None:
        order = canonical_order(inst)
    else:
        rel = [inst.jobs[j].release for j in order]
        if sorted(order) != list(range(inst.n)) or any(a > b for a, b in zip(rel, rel[1:])):
            raise ValidationError("order must be a release-monotone permutation of the jobs")
    rank = {j: pos for pos, j in enumerate(order)}
    groups: dict[tuple[int, int], list] = {}
    for (i, j, t), v in y.entries.items():
        k = class_index(inst.jobs[j].proc[i])
        groups.setdefault((i, k), []).append((j, t, v))
    entries: dict = {}
    for (i, k), items in sorted(groups.items()):
        slot_vol: dict[int, Fraction] = {}
        job_vol: dict[int, Fraction] = {}
        for j, t, v in items:
            slot_vol[t] = slot_vol.get(t, Fraction(0)) + v
            job_vol[j] = job_vol.get(j, Fraction(0)) + v
        slots = sorted(slot_vol)
        jobs = sorted(job_vol, key=lambda j: rank[j])
        si = 0
        room = slot_vol[slots[0]] if slots else Fraction(0)
        for j in jobs:
            need = job_vol[j]
            while need > 0:
                if room == 0:
                    si += 1
                    if si >= len(slots):
                        raise InternalCheckError("group refill ran out of slot volume")
                    room = slot_vol[slots[si]]
                take = min(need, room)
                key = (i, j, slots[si])
                entries[key] = entries.get(key, Fraction(0)) + take
                need -= take
                room -= take
    out = TimeIndexedSolution(horizon=y.horizon, entries=entries)
    for (i, j, t) in out.entries:
        if Fraction(t) < inst.jobs[j].release:
            raise InternalCheckError("consistent-order refill placed volume before a release")
    return out


def split_jobs_instance(inst: SchedulingInstance, level: int) -> tuple:
    """Split each job into 2^(level-1) equal pieces (same release).

    Requires every finite processing time to be divisible by 2^(level-1).
    Returns (instance, origin) with origin[piece] = original job.
    """
    if level < 1:
        raise ValidationError("level must be >= 1")
    pieces = 2 ** (level - 1)
    jobs = []
    origin = []
    for j, job in enumerate(inst.jobs):
        proc = []
        for p in job.proc:
            if p is None:
                proc.append(None)
            else:
                q = p / pieces
                if q.denominator != 1:
                    raise ValidationError(f"processing time {p} not divisible by {pieces}")
                proc.append(q)
        for _ in range(pieces):
            jobs.append(Job(release=job.release, proc=tuple(proc)))
            origin.append(j)
    return SchedulingInstance(m=inst.m, jobs=tuple(jobs)), origin


def quantize_dyadic_time(inst: SchedulingInstance, y: TimeIndexedSolution, level: int) -> TimeIndexedSolution:
    """Make every per-(machine, job) total a multiple of p_ij / 2^level.

    The completed fractions of each job move pairwise between machines (first
    two off-grid machines, smallest snapping margin) with the direction chosen
    by exact cost rates: adding volume lands on the machine's earliest support
    slot, removal scales the machine's volume down proportionally, and the
    cheaper of the two directions is taken (it is never cost-increasing).
    Each (machine, job) changes by one net adjustment below p_ij / 2^level,
    so any class window gains less than n * 2^k / 2^level volume and the
    measured relaxation slack grows by at most 1.
    """
    if level < 0:
        raise ValidationError("level must be nonnegative")
    unit = Fraction(1, 2 ** level)
    out = y.copy()
    for j in range(inst.n):
        machines = [i for i in range(inst.m) if inst.jobs[j].proc[i] is not None]
        support: dict[int, list] = {i: [] for i in machines}
        for (ii, jj, t), v in out.entries.items():
            if jj == j:
                support[ii].append((t, v))
        frac = {i: sum((v for _, v in support[i]), Fraction(0)) / inst.jobs[j].proc[i]
                for i in machines}

        def add_rate(i: int) -> Fraction:
            # cost per completed fraction when volume lands at the earliest slot
            p = inst.jobs[j].proc[i]
            k = class_index(p)
            t0 = min((t for t, _ in support[i]), default=int(inst.jobs[j].release))
            return ((Fraction(t0) - inst.jobs[j].release) / Fraction(2) ** k + Fraction(1, 2)) * p

        def avg_rate(i: int) -> Fraction:
            p = inst.jobs[j].proc[i]
            k = class_index(p)
            total_cost = sum(
                (((Fraction(t) - inst.jobs[j].release) / Fraction(2) ** k + Fraction(1, 2)) * v
                 for t, v in support[i]),
                Fraction(0),
            )
            return total_cost / frac[i]

        target = dict(frac)
        while True:
            off = [i for i in machines if target[i] % unit != 0]
            if not off:
                break
            if len(off) < 2:
                raise InternalCheckError("job with one off-grid machine cannot complete to 1")
            a, b = off[0], off[1]
            down_a = target[a] % unit
            up_a = unit - down_a
            down_b = target[b] % unit
            up_b = unit - down_b
            delta_up = min(up_a, down_b)
            delta_down = min(down_a, up_b)
            cost_up = delta_up * (add_rate(a) - avg_rate(b))
            cost_down = delta_down * (add_rate(b) - avg_rate(a))
            if (cost_down, delta_down) <= (cost_up, delta_up):
                target[a] -= delta_down
                target[b] += delta_down
            else:
                target[a] += delta_up
                target[b] -= delta_up
        # realize the net changes once per machine
        for i in machines:
            delta = target[i] - frac[i]
            if delta == 0:
                continue
            p = inst.jobs[j].proc[i]
            if delta < 0:
                scale = target[i] / frac[i]
                for t, v in support[i]:
                    key = (i, j, t)
                    newv = v * scale
                    if newv == 0:
                        out.entries.pop(key, None)
                    else:
                        out.entries[key] = newv
            else:
                t0 = min((t for t, _ in support[i]), default=int(inst.jobs[j].release))
                key = (i, j, t0)
                out.entries[key] = out.entries.get(key, Fraction(0)) + delta * p
    return TimeIndexedSolution(horizon=out.horizon, entries=out.entries)


def rounding_vectors(inst: SchedulingInstance, split_jobs: list[int], half_of: dict):
    """Balancing vectors over (machine, class) pairs for the split jobs.

    Each split job carries +p/2^(k+1) on its lexicographically smaller
    (machine, class) pair and the negated counterpart on the other; entries
    never exceed 1/2, so l1 norms stay at most 1.  Returns (vectors,
    positive/negative machine per job).
    """
    classes = sorted({class_index(p) for _, _, p in inst.finite_procs()})
    class_pos = {k: pos for pos, k in enumerate(classes)}
    dim = inst.m * len(classes)

    def coord(i: int, k: int) -> int:
        return i * len(classes) + class_pos[k]

    vectors = []
    pos_side = []
    for j in split_jobs:
        _, i1, i2 = half_of[j]
        p1, p2 = inst.jobs[j].proc[i1], inst.jobs[j].proc[i2]
        k1, k2 = class_index(p1), class_index(p2)
        if (i1, k1) <= (i2, k2):
            plus, minus = (i1, k1, p1), (i2, k2, p2)
        else:
            plus, minus = (i2, k2, p2), (i1, k1, p1)
        v = [Fraction(0)] * dim
        v[coord(plus[0], plus[1])] = plus[2] / Fraction(2) ** (plus[1] + 1)
        v[coord(minus[0], minus[1])] = -minus[2] / Fraction(2) ** (minus[1] + 1)
        vectors.append(v)
        pos_side.append((plus[0], minus[0]))
    return dim, vectors, pos_side


def round_half_integral_totalflow(
    inst: SchedulingInstance,
    y: TimeIndexedSolution,
    colorer: Callable[[SignedVectorSequence], list[int]],
) -> tuple[TimeIndexedSolution, Fraction]:
    """Round machine-half-integral volumes to an integral solution.

    After consistent ordering, every job sits on one machine (full) or two
    machines (half each).  Split jobs become vectors over (machine, class)
    with entries +-p/2^(k+1); a prefix coloring in job order picks each job's
    machine, volume lands at the earliest slot the job used there, and of the
    coloring and its global flip the cheaper solution (grouped objective) is
    returned together with the achieved prefix discrepancy.
    """
    ybar = normalize_consistent_order(inst, y)
    order = canonical_order(inst)
    full: dict[int, int] = {}
    halves: list[tuple[int, int, int]] = []  # (job, i1, i2) lexicographic (machine, class)
    for j in range(inst.n):
        tot = [(i, ybar.job_machine_total(i, j)) for i in range(inst.m)]
        support = [(i, v) for i, v in tot if v != 0]
        p = inst.jobs[j].proc
        if len(support) == 1 and support[0][1] == p[support[0][0]]:
            full[j] = support[0][0]
        elif (
            len(support) == 2
            and support[0][1] * 2 == p[support[0][0]]
            and support[1][1] * 2 == p[support[1][0]]
        ):
            i1, i2 = support[0][0], support[1][0]
            halves.append((j, i1, i2))
        else:
            raise ValidationError(f"job {j}: totals {support} are not machine-half-integral")

    split_jobs = [j for j in order if any(h[0] == j for h in halves)]
    half_of = {j: next(h for h in halves if h[0] == j) for j in split_jobs}
    dim, vectors, pos_side = rounding_vectors(inst, split_jobs, half_of)
    seq = SignedVectorSequence(m=dim, vectors=vectors) if vectors else None
    if seq is not None:
        signs = colorer(seq)
        achieved = discrepancy(seq.with_signs(signs), PREFIX).value
    else:
        signs = []
        achieved = Fraction(0)

    def earliest(j: int, i: int) -> int:
        ts = [t for (ii, jj, t) in ybar.entries if ii == i and jj == j]
        return min(ts)

    def build(flip: int) -> TimeIndexedSolution:
        entries = {}
        for j, i in full.items():
            t0 = earliest(j, i)
            entries[(i, j, t0)] = inst.jobs[j].proc[i]
        for pos, j in enumerate(split_jobs):
            plus_i, minus_i = pos_side[pos]
            i = plus_i if signs[pos] * flip == 1 else minus_i
            t0 = earliest(j, i)
            entries[(i, j, t0)] = inst.jobs[j].proc[i]
        return TimeIndexedSolution(horizon=ybar.horizon, entries=entries)

    y_pos = build(1)
    y_neg = build(-1)
    cost_pos = aux_cost(inst, y_pos)
    cost_neg = aux_cost(inst, y_neg)
    chosen = y_pos if cost_pos <= cost_neg else y_neg
    # the earliest-slot compaction is the midpoint of the two candidates
    compaction_cost = (cost_pos + cost_neg) / 2
    if min(cost_pos, cost_neg) > compaction_cost:
        raise InternalCheckError("flip fallback failed to beat the compaction cost")
    alpha_in = measure_alpha(inst, ybar).alpha
    alpha_out = measure_alpha(inst, chosen).alpha
    if alpha_out > alpha_in + 4 * achieved + 4:
        raise InternalCheckError(
            f"rounded slack {alpha_out} exceeds {alpha_in} + 4*{achieved} + 4"
        )
    return chosen, achieved


def is_integral(inst: SchedulingInstance, y: TimeIndexedSolution) -> bool:
    seen: dict[int, int] = {}
    for (i, j, t), v in y.entries.items():
        if v != inst.jobs[j].proc[i] or j in seen:
            return False
        seen[j] = i
    return len(seen) == inst.n


@dataclass(frozen=True)
class TotalLevelRecord:
    h: int
    discrepancy: Fraction
    alpha_before: Fraction  # original-class scale
    alpha_after: Fraction
    level_bound: Fraction   # (4 D + 4) / 2^(h-1)


@dataclass
class TotalFlowTrace:
    dilation: int
    lp_cost: Fraction          # auxiliary optimum on the dilated grid
    alpha_initial: Fraction
    alpha_quantized: Fraction
    levels: list
    alpha_final: Fraction
    bound_value: Fraction      # alpha_initial + 1 + sum of level bounds
    total_flow_dilated: Fraction
    total_flow: Fraction       # rescaled to original time units
    assignment: MachineAssignment


def dilate_instance(inst: SchedulingInstance, factor: int) -> SchedulingInstance:
    """Uniform time dilation: releases and processing times scale together, so
    schedules correspond exactly and metrics divide back by the factor."""
    jobs = tuple(
        Job(release=job.release * factor,
            proc=tuple(None if p is None else p * factor for p in job.proc))
        for job in inst.jobs
    )
    return SchedulingInstance(m=inst.m, jobs=jobs)


def _split_solution(
    inst: SchedulingInstance, split_inst: SchedulingInstance, origin: list[int],
    y: TimeIndexedSolution, level: int,
) -> TimeIndexedSolution:
    """Distribute a level-h solution onto the split instance's pieces.

    Each original (machine, job) total is c half-units of p/2^h; the machine
    half-slots are paired first-with-last per job (the same canonical pairing
    as the assignment pipeline) and the job's time-ordered volume stream on
    each machine is sliced into the corresponding chunks.
    """
    scale = 2 ** level
    pieces_of: dict[int, list[int]] = {}
    for piece, j in enumerate(origin):
        pieces_of.setdefault(j, []).append(piece)
    entries: dict = {}
    for j in range(inst.n):
        slots: list[int] = []
        for i in range(inst.m):
            p = inst.jobs[j].proc[i]
            if p is None:
                continue
            tot = y.job_machine_total(i, j)
            cnt = tot / (p / scale)
            if cnt.denominator != 1:
                raise ValidationError(
                    f"total on ({i},{j}) = {tot} is not a multiple of p/2^{level}"
                )
            slots.extend([i] * int(cnt))
        if len(slots) != scale:
            raise InternalCheckError(f"job {j}: half-unit count {len(slots)} != {scale}")
        pieces = pieces_of[j]
        holders: dict[int, list[int]] = {}
        for q in range(scale // 2):
            i1, i2 = slots[q], slots[scale - 1 - q]
            piece = pieces[q]
            holders.setdefault(i1, []).append(piece)
            holders.setdefault(i2, []).append(piece)
        for i, piece_list in sorted(holders.items()):
            p = inst.jobs[j].proc[i]
            chunk = p / scale
            stream = sorted(
                ((t, v) for (ii, jj, t), v in y.entries.items() if ii == i and jj == j)
            )
            pos = 0
            t, avail = stream[0]
            for piece in piece_list:
                need = chunk
                while need > 0:
                    if avail == 0:
                        pos += 1
                        if pos >= len(stream):
                            raise InternalCheckError("volume stream exhausted mid-slice")
                        t, avail = stream[pos]
                    take = min(need, avail)
                    key = (i, piece, t)
                    entries[key] = entries.get(key, Fraction(0)) + take
                    need -= take
                    avail -= take
    return TimeIndexedSolution(horizon=y.horizon, entries=entries)


def _merge_split_solution(
    inst: SchedulingInstance, origin: list[int], y_split: TimeIndexedSolution
) -> TimeIndexedSolution:
    entries: dict = {}
    for (i, piece, t), v in y_split.entries.items():
        key = (i, origin[piece], t)
        entries[key] = entries.get(key, Fraction(0)) + v
    return TimeIndexedSolution(horizon=y_split.horizon, entries=entries)


def full_round_totalflow(
    inst: SchedulingInstance,
    colorer: Callable[[SignedVectorSequence], list[int]],
) -> tuple[TimeIndexedSolution, TotalFlowTrace]:
    """Complete pipeline on a uniformly dilated copy of the instance.

    Solves the auxiliary LP at slack 0, quantizes the per-(machine, job)
    totals dyadically (slack grows by at most 1), then per level splits jobs,
    rounds the machine halves by prefix coloring and merges back.  The trace
    records the measured slack before and after every stage; the final slack
    satisfies, exactly,
    alpha_final <= alpha_initial + 1 + sum over levels of (4 D_h + 4)/2^(h-1).
    """
    problems = validate_instance(inst)
    if problems:
        raise ValidationError("; ".join(problems))
    _require_integral(inst)
    level = max((inst.n - 1).bit_length(), 0)
    dilation = 2 ** max(level - 1, 0)
    dinst = dilate_instance(inst, dilation)
    lp, H = build_auxiliary_lp(dinst, 0)
    sol = lpmod.solve_lp(lp)
    if sol.status != lpmod.OPTIMAL:
        raise InternalCheckError(f"auxiliary LP unexpectedly {sol.status}")
    y = solution_from_lp(dinst, sol, H)
    lp_cost = sol.objective_value
    alpha_initial = measure_alpha(dinst, y).alpha
    y = quantize_dyadic_time(dinst, y, level)
    alpha_quantized = measure_alpha(dinst, y).alpha
    if alpha_quantized > alpha_initial + 1:
        raise InternalCheckError(
            f"quantized slack {alpha_quantized} exceeds {alpha_initial} + 1"
        )
    records: list[TotalLevelRecord] = []
    for h in range(level, 0, -1):
        split_inst, origin = split_jobs_instance(dinst, h)
        y_split = _split_solution(dinst, split_inst, origin, y, h)
        alpha_before = measure_alpha(dinst, y).alpha
        y_rounded, achieved = round_half_integral_totalflow(split_inst, y_split, colorer)
        y = _merge_split_solution(dinst, origin, y_rounded)
        alpha_after = measure_alpha(dinst, y).alpha
        level_bound = (4 * achieved + 4) / Fraction(2 ** (h - 1))
        if alpha_after > alpha_before + level_bound:
            raise InternalCheckError(
                f"level {h}: slack {alpha_after} exceeds {alpha_before} + {level_bound}"
            )
        records.append(TotalLevelRecord(h=h, discrepancy=achieved,
                                        alpha_before=alpha_before, alpha_after=alpha_after,
                                        level_bound=level_bound))
    if not is_integral(dinst, y):
        raise InternalCheckError("pipeline did not reach an integral solution")
    alpha_final = measure_alpha(dinst, y).alpha
    bound = alpha_initial + 1 + sum((r.level_bound for r in records), Fraction(0))
    if alpha_final > bound:
        raise InternalCheckError(f"final slack {alpha_final} exceeds telescoped bound {bound}")
    assign = [None] * inst.n
    for (i, j, _t) in y.entries:
        assign[j] = i
    asg = MachineAssignment(assign=tuple(assign))
    metrics = evaluate_total_flow_srpt(dinst, asg)
    trace = TotalFlowTrace(
        dilation=dilation,
        lp_cost=lp_cost,
        alpha_initial=alpha_initial,
        alpha_quantized=alpha_quantized,
        levels=records,
        alpha_final=alpha_final,
        bound_value=bound,
        total_flow_dilated=metrics.total_flow,
        total_flow=metrics.total_flow / dilation,
        assignment=asg,
    )
    return y, trace


@dataclass
class ScheduleRatioReport:
    assignment: MachineAssignment
    total_flow: Fraction
    aux_cost: Fraction
    restricted_lp_cost: Fraction  # time-indexed optimum with machines fixed
    ratio: Fraction               # total flow over the restricted LP bound
    alpha: Fraction
    class_span: int               # number of distinct size classes present


def schedule_from_integral(inst: SchedulingInstance, y: TimeIndexedSolution) -> ScheduleRatioReport:
    """Extract the machine assignment from an integral solution, run SRPT per
    machine, and report the flow against the LP lower bound for that fixed
    assignment (the approximation ratio is reported, never asserted).
    """
    if not is_integral(inst, y):
        raise ValidationError("solution is not integral")
    assign = [None] * inst.n
    for (i, j, _t) in y.entries:
        assign[j] = i
    asg = MachineAssignment(assign=tuple(assign))
    metrics = evaluate_total_flow_srpt(inst, asg)
    restricted = SchedulingInstance(
        m=inst.m,
        jobs=tuple(
            Job(release=job.release,
                proc=tuple(p if i == asg.assign[j] else None for i, p in enumerate(job.proc)))
            for j, job in enumerate(inst.jobs)
        ),
    )
    lp, H = build_time_indexed_lp(restricted)
    sol = lpmod.solve_lp(lp)
    if sol.status != lpmod.OPTIMAL:
        raise InternalCheckError("restricted time-indexed LP should be feasible")
    if metrics.total_flow < sol.objective_value:
        raise InternalCheckError("SRPT flow fell below its LP lower bound")
    classes = {class_index(p) for _, _, p in inst.finite_procs()}
    return ScheduleRatioReport(
        assignment=asg,
        total_flow=metrics.total_flow,
        aux_cost=aux_cost(inst, y),
        restricted_lp_cost=sol.objective_value,
        ratio=metrics.total_flow / sol.objective_value if sol.objective_value else Fraction(0),
        alpha=measure_alpha(inst, y).alpha,
        class_span=len(classes),
    )


def result_to_json(trace: TotalFlowTrace) -> dict:
    return {
        "lp_cost": rat_to_str(trace.lp_cost),
        "alpha_levels": [
            {
                "h": rec.h,
                "D": rat_to_str(rec.discrepancy),
                "alpha_before": rat_to_str(rec.alpha_before),
                "alpha_after": rat_to_str(rec.alpha_after),
                "bound": rat_to_str(rec.level_bound),
            }
            for rec in trace.levels
        ],
        "total_flow": rat_to_str(trace.total_flow),
        "assignment": list(trace.assignment.assign),
    }


def check_result(inst: SchedulingInstance, data: dict) -> list[str]:
    """Re-validate a total-flow result file against its instance."""
    problems = []
    try:
        asg = MachineAssignment(assign=tuple(int(i) for i in data["assignment"]))
        total_flow = rat_from_str(data["total_flow"])
        for rec in data["alpha_levels"]:
            if rat_from_str(rec["alpha_after"]) > rat_from_str(rec["alpha_before"]) + rat_from_str(rec["bound"]):
                problems.append(f"level {rec['h']}: recorded slack violates its bound")
    except (KeyError, TypeError, ValueError) as exc:
        return [f"malformed result file: {exc}"]
    level = max((inst.n - 1).bit_length(), 0)
    dilation = 2 ** max(level - 1, 0)
    metrics = evaluate_total_flow_srpt(dilate_instance(inst, dilation), asg)
    if metrics.total_flow / dilation != total_flow:
        problems.append(
            f"recorded total_flow {total_flow} != evaluated {metrics.total_flow / dilation}"
        )
    return problems
