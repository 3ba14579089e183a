"""Max-flow-time pipeline: assignment LP, exact minimal bound search, dyadic
half-integralization, and discrepancy-driven rounding.

The pipeline rounds a fractional assignment level by level: at level h every
assignment value is a multiple of 1/2^h; each job splits into machine pairs,
a prefix coloring decides each pair, and the merged result lives at level
h-1.  Every level's feasibility bound degrades by exactly twice the achieved
prefix discrepancy times the level's largest processing time, which the trace
records and the tests recheck with exact arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Callable, Optional

from . import lp as lpmod
from .coloring import PREFIX, SignedVectorSequence, discrepancy
from .core import Job, MachineAssignment, SchedulingInstance, p_max, validate_instance
from .util import InternalCheckError, ValidationError, rat_from_str, rat_to_str


@dataclass
class FractionalAssignment:
    """Fractional job-to-machine matrix feasible for flow bound T."""

    x: list  # n rows of m Fractions
    T: Fraction

    def __post_init__(self):
        self.x = [[Fraction(v) for v in row] for row in self.x]
        self.T = Fraction(self.T)

    def row(self, j: int) -> list:
        return self.x[j]


@dataclass(frozen=True)
class LevelRecord:
    h: int
    discrepancy: Fraction
    p_max_level: Fraction


@dataclass
class RoundingTrace:
    t_star: Fraction
    quantize_level: int
    t_quantized: Fraction
    levels: list  # of LevelRecord
    final_value: Fraction
    final_additive_error: Fraction
    bound_value: Fraction


@dataclass
class MinTSearch:
    """Result of the minimal-feasible-bound search with its certificates."""

    t_star: Fraction
    assignment: FractionalAssignment
    certified_infeasible_below: Optional[Fraction]  # T value proven infeasible
    resolution: Fraction


def _release_times(inst: SchedulingInstance) -> list:
    return sorted({job.release for job in inst.jobs})


def _interval_pairs(inst: SchedulingInstance):
    times = _release_times(inst)
    for a in range(len(times)):
        for b in range(a, len(times)):
            yield times[a], times[b]


def var_name(j: int, i: int) -> str:
    return f"x[{j},{i}]"


def build_assignment_lp(inst: SchedulingInstance, T, minimize_t: bool = False,
                        pattern_threshold=None) -> lpmod.LinearProgram:
    """Assignment LP at flow bound T.

    Row sums fix every job to total assignment 1; for every machine and every
    pair of release times t1 <= t2 the volume released inside [t1, t2] is
    capped by t2 - t1 + T.  Variables with processing time above the bound are
    pruned entirely (after pruning the largest usable processing time is at
    most the bound by construction).

    With ``minimize_t`` the bound becomes a variable T >= pattern_threshold
    and the objective minimizes it; the pruning threshold is then
    ``pattern_threshold``.
    """
    T = Fraction(T) if T is not None else None
    threshold = Fraction(pattern_threshold) if pattern_threshold is not None else T
    lp = lpmod.LinearProgram()
    allowed: list[list[bool]] = []
    for j, job in enumerate(inst.jobs):
        row = []
        for i, p in enumerate(job.proc):
            ok = p is not None and p <= threshold
            row.append(ok)
            if ok:
                lp.variables.append(var_name(j, i))
        allowed.append(row)
    if minimize_t:
        lp.variables.insert(0, "T")
        lp.bounds["T"] = (threshold, None)
        lp.objective = {"T": Fraction(1)}
    for j in range(inst.n):
        coeffs = {var_name(j, i): Fraction(1) for i in range(inst.m) if allowed[j][i]}
        lp.add_constraint(coeffs, lpmod.EQ, 1)
    for i in range(inst.m):
        for t1, t2 in _interval_pairs(inst):
            coeffs = {}
            for j, job in enumerate(inst.jobs):
                if t1 <= job.release <= t2 and allowed[j][i]:
                    coeffs[var_name(j, i)] = job.proc[i]
            if not coeffs:
                continue
            if minimize_t:
                coeffs["T"] = Fraction(-1)
                lp.add_constraint(coeffs, lpmod.LE, t2 - t1)
            else:
                lp.add_constraint(coeffs, lpmod.LE, t2 - t1 + T)
    return lp


def assignment_from_solution(inst: SchedulingInstance, T, sol: lpmod.LpSolution) -> FractionalAssignment:
    x = [[Fraction(0)] * inst.m for _ in range(inst.n)]
    for j in range(inst.n):
        for i in range(inst.m):
            name = var_name(j, i)
            if name in sol.values:
                x[j][i] = sol.values[name]
    return FractionalAssignment(x=x, T=Fraction(T))


def fractional_assignment_violations(inst: SchedulingInstance, fa: FractionalAssignment) -> list[str]:
    """Exact feasibility check of a fractional assignment at its own bound."""
    problems = []
    for j in range(inst.n):
        total = sum(fa.x[j], Fraction(0))
        if total != 1:
            problems.append(f"job {j}: row sum {total} != 1")
        for i, p in enumerate(inst.jobs[j].proc):
            v = fa.x[j][i]
            if v < 0:
                problems.append(f"x[{j},{i}] = {v} negative")
            if v > 0 and (p is None or p > fa.T):
                problems.append(f"x[{j},{i}] positive but processing time exceeds bound {fa.T}")
    for i in range(inst.m):
        for t1, t2 in _interval_pairs(inst):
            load = Fraction(0)
            for j, job in enumerate(inst.jobs):
                if t1 <= job.release <= t2 and inst.jobs[j].proc[i] is not None:
                    load += fa.x[j][i] * inst.jobs[j].proc[i]
            if load > t2 - t1 + fa.T:
                problems.append(
                    f"machine {i} window [{t1},{t2}]: load {load} > {t2 - t1 + fa.T}"
                )
    return problems


def _feasible_at(inst: SchedulingInstance, T) -> Optional[lpmod.LpSolution]:
    lp = build_assignment_lp(inst, T)
    sol = lpmod.solve_lp(lp)
    return sol if sol.status == lpmod.OPTIMAL else None


def solve_min_T(inst: SchedulingInstance) -> MinTSearch:
    """Exact minimal feasible flow bound of the assignment LP.

    Feasibility is monotone in the bound, and the variable-pruning pattern
    only changes at the distinct processing-time values.  A binary search over
    those breakpoints brackets the answer; an exact minimize-T LP on the
    bracketed pattern pins it down.  The returned certificate pair is
    (feasible at t_star, infeasible at t_star - resolution).
    """
    problems = validate_instance(inst)
    if problems:
        raise ValidationError("; ".join(problems))
    t_floor = max(min(p for p in job.proc if p is not None) for job in inst.jobs)
    breakpoints = sorted({p for _, _, p in inst.finite_procs() if p >= t_floor})
    denoms = [job.release.denominator for job in inst.jobs]
    denoms += [p.denominator for _, _, p in inst.finite_procs()]
    resolution = Fraction(1, inst.n * lcm(*denoms))

    feas_cache: dict[Fraction, Optional[lpmod.LpSolution]] = {}

    def feasible(T) -> bool:
        if T not in feas_cache:
            feas_cache[T] = _feasible_at(inst, T)
        return feas_cache[T] is not None

    lo_idx, hi_idx = 0, len(breakpoints) - 1
    first_feasible: Optional[int] = None
    if feasible(breakpoints[-1]):
        while lo_idx <= hi_idx:
            mid = (lo_idx + hi_idx) // 2
            if feasible(breakpoints[mid]):
                first_feasible = mid
                hi_idx = mid - 1
            else:
                lo_idx = mid + 1

    if first_feasible == 0:
        t_star = breakpoints[0]  # the bound can never go below the per-job minima
    else:
        if first_feasible is None:
            prev = breakpoints[-1]
            cap = None
        else:
            prev = breakpoints[first_feasible - 1]
            cap = breakpoints[first_feasible]
        lp = build_assignment_lp(inst, None, minimize_t=True, pattern_threshold=prev)
        sol = lpmod.solve_lp(lp)
        if sol.status == lpmod.OPTIMAL and (cap is None or sol.values["T"] < cap):
            t_star = sol.values["T"]
            if t_star <= prev:
                raise InternalCheckError("minimize-T refinement contradicts bracketing")
        else:
            if cap is None:
                raise InternalCheckError("assignment LP infeasible even at the loosest pattern")
            t_star = cap

    witness = _feasible_at(inst, t_star)
    if witness is None:
        raise InternalCheckError(f"certified bound {t_star} did not re-verify feasible")
    below = t_star - resolution
    if below >= 0 and _feasible_at(inst, below) is not None:
        raise InternalCheckError(f"bound {t_star} not minimal: feasible at {below}")
    fa = assignment_from_solution(inst, t_star, witness)
    return MinTSearch(
        t_star=t_star,
        assignment=fa,
        certified_infeasible_below=below if below >= 0 else None,
        resolution=resolution,
    )


def _dyadic_margins(v: Fraction, unit: Fraction):
    """Distance of v down to and up to the nearest multiples of unit."""
    q = v / unit
    floor_mult = (q.numerator // q.denominator) * unit
    down = v - floor_mult
    up = (unit - down) % unit
    return down, up


def quantize_dyadic(fa: FractionalAssignment, level: int) -> FractionalAssignment:
    """Pairwise transfers until every value is a multiple of 1/2^level.

    Each step takes the first two non-multiple entries of a job and shifts
    mass by the smallest margin that lands one of them on the grid (ties
    prefer moving the earlier entry down).  Every entry stays inside its
    original grid cell, so no entry moves by 1/2^level or more and any
    machine-window load grows by less than p_max * n / 2^level.  The new
    bound accounts for exactly that.
    """
    if level < 0:
        raise ValidationError("level must be nonnegative")
    unit = Fraction(1, 2 ** level)
    x = [row[:] for row in fa.x]
    n = len(x)
    for j in range(n):
        while True:
            frac_idx = [i for i, v in enumerate(x[j]) if v % unit != 0]
            if not frac_idx:
                break
            if len(frac_idx) < 2:
                raise InternalCheckError("row with a single off-grid entry cannot sum to 1")
            a, b = frac_idx[0], frac_idx[1]
            down_a, up_a = _dyadic_margins(x[j][a], unit)
            down_b, up_b = _dyadic_margins(x[j][b], unit)
            delta_up = min(up_a, down_b)     # a up, b down
            delta_down = min(down_a, up_b)   # a down, b up
            if delta_down <= delta_up:
                x[j][a] -= delta_down
                x[j][b] += delta_down
            else:
                x[j][a] += delta_up
                x[j][b] -= delta_up
    return FractionalAssignment(x=x, T=fa.T)


def quantized_bound(inst: SchedulingInstance, fa: FractionalAssignment, level: int) -> Fraction:
    return fa.T + p_max(inst) * Fraction(inst.n, 2 ** level)


@dataclass
class PairSplit:
    """Pair instance plus the map back to original jobs."""

    instance: SchedulingInstance
    assignment: FractionalAssignment  # the canonical half-integral solution
    origin: list[int]                 # pair-job -> original job
    pairs: list[tuple[int, int]]      # pair-job -> (machine, machine)
    level: int

    def merge_assignment(self, asg: MachineAssignment, n: int, m: int) -> FractionalAssignment:
        """Fold an integral pair assignment back to level h-1 fractions."""
        scale = 2 ** (self.level - 1)
        counts = [[0] * m for _ in range(n)]
        for jp, machine in enumerate(asg.assign):
            counts[self.origin[jp]][machine] += 1
        x = [[Fraction(c, scale) for c in row] for row in counts]
        return FractionalAssignment(x=x, T=self.assignment.T)


def split_to_pair_instance(inst: SchedulingInstance, fa: FractionalAssignment, level: int) -> PairSplit:
    """Split every job into 2^(level-1) two-machine jobs at level `level`.

    Machine slots (machine i repeated 2^level * x_ij times) are sorted and
    paired first-with-last; each pair becomes one job carrying the original
    processing times scaled down by 2^(level-1), infinite elsewhere.  The
    half-on-each-member solution is feasible at the same bound because the
    per-window loads are identical.
    """
    if level < 1:
        raise ValidationError("level must be >= 1")
    scale = 2 ** level
    jobs: list[Job] = []
    origin: list[int] = []
    pairs: list[tuple[int, int]] = []
    x_rows: list[list[Fraction]] = []
    for j in range(inst.n):
        slots: list[int] = []
        for i in range(inst.m):
            cnt = fa.x[j][i] * scale
            if cnt.denominator != 1:
                raise ValidationError(f"x[{j},{i}] = {fa.x[j][i]} is not a multiple of 1/{scale}")
            slots.extend([i] * int(cnt))
        if len(slots) != scale:
            raise ValidationError(f"job {j}: assignment row does not sum to 1")
        for q in range(scale // 2):
            i1, i2 = slots[q], slots[scale - 1 - q]
            proc = [None] * inst.m
            proc[i1] = inst.jobs[j].proc[i1] / 2 ** (level - 1)
            proc[i2] = inst.jobs[j].proc[i2] / 2 ** (level - 1)
            jobs.append(Job(release=inst.jobs[j].release, proc=tuple(proc)))
            origin.append(j)
            pairs.append((i1, i2))
            row = [Fraction(0)] * inst.m
            if i1 == i2:
                row[i1] = Fraction(1)
            else:
                row[i1] = Fraction(1, 2)
                row[i2] = Fraction(1, 2)
            x_rows.append(row)
    split_inst = SchedulingInstance(m=inst.m, jobs=tuple(jobs))
    split_fa = FractionalAssignment(x=x_rows, T=fa.T)
    return PairSplit(instance=split_inst, assignment=split_fa, origin=origin,
                     pairs=pairs, level=level)


def rounding_vectors(inst: SchedulingInstance, fa: FractionalAssignment):
    """The release-ordered half-split jobs and their balancing vectors.

    Vector entries are +p/(2 p_max) on the lower machine index and the
    negated counterpart on the higher; l1 norms never exceed 1.
    Returns (ordered (job, i1, i2) triples, vectors).
    """
    pmax = p_max(inst)
    halves = []
    for j in range(inst.n):
        support = [(i, v) for i, v in enumerate(fa.x[j]) if v != 0]
        if len(support) == 2 and support[0][1] == support[1][1] == Fraction(1, 2):
            halves.append((j, support[0][0], support[1][0]))
    halves.sort(key=lambda h: (inst.jobs[h[0]].release, h[0]))
    vectors = []
    for j, i1, i2 in halves:
        v = [Fraction(0)] * inst.m
        v[i1] = inst.jobs[j].proc[i1] / (2 * pmax)
        v[i2] = -inst.jobs[j].proc[i2] / (2 * pmax)
        vectors.append(v)
    return halves, vectors


def round_half_integral_maxflow(
    inst: SchedulingInstance,
    fa: FractionalAssignment,
    colorer: Callable[[SignedVectorSequence], list[int]],
) -> tuple[MachineAssignment, Fraction]:
    """Round a half-integral assignment by prefix coloring; returns (assignment, D).

    Each half-split job contributes a two-entry vector with +p/(2 p_max) on
    its lower machine index and -p/(2 p_max) on the other, ordered by release
    (ties by index).  A +1 sign sends the job to the positive machine.  The
    result satisfies every machine window at T + 2 * D * p_max where D is the
    achieved prefix discrepancy of the coloring.
    """
    bad_input = fractional_assignment_violations(inst, fa)
    if bad_input:
        raise ValidationError("input assignment infeasible: " + "; ".join(bad_input))
    pmax = p_max(inst)
    assign: list[Optional[int]] = [None] * inst.n
    for j in range(inst.n):
        support = [(i, v) for i, v in enumerate(fa.x[j]) if v != 0]
        if len(support) == 1 and support[0][1] == 1:
            assign[j] = support[0][0]
        elif len(support) == 2 and support[0][1] == support[1][1] == Fraction(1, 2):
            i1, i2 = support[0][0], support[1][0]
            if inst.jobs[j].proc[i1] is None or inst.jobs[j].proc[i2] is None:
                raise ValidationError(f"job {j} half-assigned to a forbidden machine")
        else:
            raise ValidationError(f"job {j}: row {fa.x[j]} is not half-integral")
    halves, vectors = rounding_vectors(inst, fa)
    seq = SignedVectorSequence(m=inst.m, vectors=vectors)
    if vectors:
        signs = colorer(seq)
        seq = seq.with_signs(signs)
        achieved = discrepancy(seq, PREFIX).value
    else:
        signs = []
        achieved = Fraction(0)
    for pos, (j, i1, i2) in enumerate(halves):
        assign[j] = i1 if signs[pos] == 1 else i2
    result = MachineAssignment(assign=tuple(assign))
    bound = fa.T + 2 * achieved * pmax
    leftover = fractional_assignment_violations(
        inst, FractionalAssignment(x=[[Fraction(1) if i == result.assign[j] else Fraction(0)
                                       for i in range(inst.m)] for j in range(inst.n)], T=bound)
    )
    if leftover:
        raise InternalCheckError(
            "rounded assignment violates its discrepancy bound: " + "; ".join(leftover)
        )
    return result, achieved


def full_round_maxflow(
    inst: SchedulingInstance,
    colorer: Callable[[SignedVectorSequence], list[int]],
) -> tuple[MachineAssignment, RoundingTrace]:
    """Complete pipeline: solve, quantize, round level by level, evaluate.

    The emitted trace satisfies, exactly:
    final value <= T* + p_max + sum over levels of 2 * D_h * p_max / 2^(h-1).
    """
    from .core import evaluate_max_flow

    search = solve_min_T(inst)
    t_star = search.t_star
    fa = search.assignment
    level = max((inst.n - 1).bit_length(), 0)  # ceil(log2 n)
    fa = quantize_dyadic(fa, level)
    t_quant = quantized_bound(inst, search.assignment, level)
    fa = FractionalAssignment(x=fa.x, T=t_quant)
    records: list[LevelRecord] = []
    running_T = t_quant
    for h in range(level, 0, -1):
        split = split_to_pair_instance(inst, fa, h)
        asg_split, achieved = round_half_integral_maxflow(split.instance, split.assignment, colorer)
        pml = p_max(split.instance)
        records.append(LevelRecord(h=h, discrepancy=achieved, p_max_level=pml))
        running_T = running_T + 2 * achieved * pml
        fa = split.merge_assignment(asg_split, inst.n, inst.m)
        fa = FractionalAssignment(x=fa.x, T=running_T)
    assign = []
    for j in range(inst.n):
        winners = [i for i in range(inst.m) if fa.x[j][i] == 1]
        if len(winners) != 1:
            raise InternalCheckError(f"job {j} not integral after the final level")
        assign.append(winners[0])
    result = MachineAssignment(assign=tuple(assign))
    metrics = evaluate_max_flow(inst, result)
    pmax = p_max(inst)
    bound = t_star + pmax + sum(
        (2 * rec.discrepancy * pmax / Fraction(2 ** (rec.h - 1)) for rec in records), Fraction(0)
    )
    if metrics.max_flow > bound:
        raise InternalCheckError(
            f"final value {metrics.max_flow} exceeds the telescoped bound {bound}"
        )
    trace = RoundingTrace(
        t_star=t_star,
        quantize_level=level,
        t_quantized=t_quant,
        levels=records,
        final_value=metrics.max_flow,
        final_additive_error=metrics.max_flow - t_star,
        bound_value=bound,
    )
    return result, trace


def result_to_json(trace: RoundingTrace, assignment: MachineAssignment) -> dict:
    return {
        "T_star": rat_to_str(trace.t_star),
        "assignment": list(assignment.assign),
        "levels": [{"h": rec.h, "D": rat_to_str(rec.discrepancy)} for rec in trace.levels],
        "max_flow": rat_to_str(trace.final_value),
    }


def check_result(inst: SchedulingInstance, data: dict) -> list[str]:
    """Re-validate a result file against its instance (round-trip checker)."""
    from .core import evaluate_max_flow

    problems = []
    try:
        asg = MachineAssignment(assign=tuple(int(i) for i in data["assignment"]))
        t_star = rat_from_str(data["T_star"])
        max_flow = rat_from_str(data["max_flow"])
        levels = [(int(rec["h"]), rat_from_str(rec["D"])) for rec in data["levels"]]
    except (KeyError, TypeError, ValueError) as exc:
        return [f"malformed result file: {exc}"]
    metrics = evaluate_max_flow(inst, asg)
    if metrics.max_flow != max_flow:
        problems.append(f"recorded max_flow {max_flow} != evaluated {metrics.max_flow}")
    pmax = p_max(inst)
    bound = t_star + pmax + sum((2 * d * pmax / Fraction(2 ** (h - 1)) for h, d in levels), Fraction(0))
    if metrics.max_flow > bound:
        problems.append(f"max_flow {metrics.max_flow} violates bound {bound}")
    return problems
