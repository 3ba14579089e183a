import random
from fractions import Fraction as F

import pytest

from flowdisc import lp as lpmod
from flowdisc.coloring import PREFIX, color_brute_force
from flowdisc.core import MachineAssignment, evaluate_total_flow_srpt, gen_random_instance, make_instance
from flowdisc.totalflow import (
    TimeIndexedSolution,
    aux_cost,
    build_auxiliary_lp,
    build_time_indexed_lp,
    check_result,
    class_index,
    dilate_instance,
    full_round_totalflow,
    is_integral,
    measure_alpha,
    normalize_consistent_order,
    quantize_dyadic_time,
    result_to_json,
    round_half_integral_totalflow,
    rounding_vectors,
    schedule_from_integral,
    solution_from_lp,
    solution_violations,
    split_jobs_instance,
    ti_cost,
)
from flowdisc.util import ValidationError


def brute(seq):
    return color_brute_force(seq, PREFIX)


def test_class_index_basics():
    assert [class_index(p) for p in (1, 2, 3, 4, 5, 8, 9, 16)] == [0, 1, 2, 2, 3, 3, 4, 4]
    assert class_index(F(1, 2)) == -1
    assert class_index(F(3, 2)) == 1
    with pytest.raises(ValidationError):
        class_index(0)


def test_ti_lp_single_unit_job():
    inst = make_instance(1, [(0, [1])])
    lp, H = build_time_indexed_lp(inst)
    sol = lpmod.solve_lp(lp)
    assert sol.objective_value == F(1, 2)


def test_ti_lp_two_unit_jobs():
    inst = make_instance(1, [(0, [1]), (0, [1])])
    lp, _ = build_time_indexed_lp(inst)
    assert lpmod.solve_lp(lp).objective_value == 2


def test_ti_lp_lower_bounds_srpt_exhaustive():
    import itertools

    rng = random.Random(31)
    for trial in range(3):
        inst = gen_random_instance(rng.randint(2, 4), 2, (1, 3), (0, 3), 0.0,
                                   seed=300 + trial)
        lp, _ = build_time_indexed_lp(inst)
        opt = lpmod.solve_lp(lp).objective_value
        best = None
        for assign in itertools.product(range(inst.m), repeat=inst.n):
            met = evaluate_total_flow_srpt(inst, MachineAssignment(assign))
            best = met.total_flow if best is None else min(best, met.total_flow)
        assert opt <= best


def test_aux_lp_alpha_zero_single_job():
    inst = make_instance(1, [(0, [1])])
    lp, _ = build_auxiliary_lp(inst, 0)
    assert lpmod.solve_lp(lp).objective_value == F(1, 2)


def test_aux_objective_between_half_and_full():
    # grouped cost never exceeds the slot-indexed cost and never drops below half
    rng = random.Random(33)
    inst = gen_random_instance(4, 2, (1, 6), (0, 4), 0.0, seed=9)
    lp, H = build_time_indexed_lp(inst)
    sol = lpmod.solve_lp(lp)
    y = solution_from_lp(inst, sol, H)
    assert aux_cost(inst, y) <= ti_cost(inst, y)
    assert aux_cost(inst, y) >= ti_cost(inst, y) / 2


def test_ti_feasible_solutions_fit_aux_at_alpha_zero():
    inst = gen_random_instance(4, 2, (1, 4), (0, 4), 0.0, seed=10)
    lp, H = build_time_indexed_lp(inst)
    sol = lpmod.solve_lp(lp)
    aux, _ = build_auxiliary_lp(inst, 0, horizon=H)
    values = {v: sol.values.get(v, F(0)) for v in aux.variables}
    assert lpmod.check_point(aux, values) == []


def test_measure_alpha_capacity_obeying_zero():
    inst = make_instance(1, [(0, [1]), (0, [1])])
    y = TimeIndexedSolution(horizon=4, entries={(0, 0, 0): F(1), (0, 1, 1): F(1)})
    assert measure_alpha(inst, y).alpha == 0


def test_measure_alpha_forced_overlap():
    inst = make_instance(1, [(0, [1]), (0, [1])])
    y = TimeIndexedSolution(horizon=4, entries={(0, 0, 0): F(1), (0, 1, 0): F(1)})
    rep = measure_alpha(inst, y)
    assert rep.alpha == 1
    assert rep.witness == (0, 0, 0, 1)
    assert rep.reproduce(inst, y) == 1


def test_measure_alpha_consistent_with_feasibility():
    # a solution feasible for the aux LP at alpha0 measures at most alpha0
    inst = gen_random_instance(3, 2, (1, 4), (0, 3), 0.0, seed=11)
    alpha0 = F(1, 2)
    lp, H = build_auxiliary_lp(inst, alpha0)
    sol = lpmod.solve_lp(lp)
    y = solution_from_lp(inst, sol, H)
    assert measure_alpha(inst, y).alpha <= alpha0


def _random_solution(inst, rng, horizon=None):
    from flowdisc.totalflow import default_horizon

    H = horizon or (default_horizon(inst) + 2)
    entries = {}
    for j, job in enumerate(inst.jobs):
        finite = [i for i in range(inst.m) if job.proc[i] is not None]
        placements = rng.randint(1, 3)
        weights = [F(rng.randint(1, 5)) for _ in range(placements)]
        total = sum(weights)
        for w in weights:
            i = rng.choice(finite)
            t = rng.randint(int(job.release), H - 1)
            key = (i, j, t)
            entries[key] = entries.get(key, F(0)) + (w / total) * job.proc[i]
    return TimeIndexedSolution(horizon=H, entries=entries)


def test_normalize_exchange_example():
    inst = make_instance(1, [(0, [2]), (0, [2])])
    y = TimeIndexedSolution(horizon=8, entries={(0, 0, 5): F(2), (0, 1, 3): F(2)})
    z = normalize_consistent_order(inst, y)
    assert z.entries == {(0, 0, 3): F(2), (0, 1, 5): F(2)}


def test_normalize_fixpoint():
    inst = make_instance(1, [(0, [2]), (0, [2])])
    y = TimeIndexedSolution(horizon=8, entries={(0, 0, 1): F(2), (0, 1, 4): F(2)})
    z = normalize_consistent_order(inst, y)
    assert z.entries == y.entries


def test_normalize_preserves_everything_random():
    rng = random.Random(37)
    for trial in range(25):
        inst = gen_random_instance(rng.randint(1, 5), rng.randint(1, 3),
                                   (1, 6), (0, 5), 0.2, seed=400 + trial)
        y = _random_solution(inst, rng)
        assert solution_violations(inst, y) == []
        z = normalize_consistent_order(inst, y)
        assert solution_violations(inst, z) == []
        assert aux_cost(inst, y) == aux_cost(inst, z)
        for i in range(inst.m):
            for j in range(inst.n):
                assert y.job_machine_total(i, j) == z.job_machine_total(i, j)
        assert measure_alpha(inst, y).alpha == measure_alpha(inst, z).alpha
        # consistent order: same-class volume respects the canonical order
        order_rank = {j: (inst.jobs[j].release, j) for j in range(inst.n)}
        by_group = {}
        for (i, j, t), v in z.entries.items():
            k = class_index(inst.jobs[j].proc[i])
            by_group.setdefault((i, k), []).append((t, order_rank[j]))
        for items in by_group.values():
            items.sort()
            ranks = [r for _, r in items]
            assert ranks == sorted(ranks)


def test_split_jobs_identity_level():
    inst = make_instance(2, [(0, [4, 6])])
    out, origin = split_jobs_instance(inst, 1)
    assert out.jobs == inst.jobs and origin == [0]


def test_split_jobs_level_two():
    inst = make_instance(2, [(0, [4, 6])])
    out, origin = split_jobs_instance(inst, 2)
    assert out.n == 2 and origin == [0, 0]
    assert all(job.proc == (F(2), F(3)) for job in out.jobs)


def test_split_jobs_class_shift():
    inst = make_instance(1, [(0, [8])])
    out, _ = split_jobs_instance(inst, 3)  # pieces of size 2
    assert class_index(inst.jobs[0].proc[0]) == 3
    assert all(class_index(job.proc[0]) == 1 for job in out.jobs)


def test_split_jobs_divisibility():
    inst = make_instance(1, [(0, [6])])
    with pytest.raises(ValidationError):
        split_jobs_instance(inst, 3)


def test_quantize_time_fixpoint():
    inst = make_instance(2, [(0, [2, 4])])
    y = TimeIndexedSolution(horizon=8, entries={(0, 0, 0): F(1), (1, 0, 3): F(2)})
    q = quantize_dyadic_time(inst, y, 1)
    assert q.entries == y.entries


def test_quantize_time_two_placement_transfer():
    inst = make_instance(2, [(0, [2, 4])])
    y = TimeIndexedSolution(horizon=10, entries={(0, 0, 0): F(2, 3), (1, 0, 2): F(8, 3)})
    q = quantize_dyadic_time(inst, y, 1)
    for i in range(2):
        frac = q.job_machine_total(i, 0) / inst.jobs[0].proc[i]
        assert frac % F(1, 2) == 0
    assert solution_violations(inst, q) == []
    assert aux_cost(inst, q) <= aux_cost(inst, y)  # non-increasing direction chosen


def test_quantize_time_alpha_increase_at_most_one():
    rng = random.Random(41)
    for trial in range(15):
        inst = gen_random_instance(rng.randint(1, 5), rng.randint(1, 3),
                                   (1, 6), (0, 5), 0.2, seed=600 + trial)
        y = _random_solution(inst, rng)
        level = max((inst.n - 1).bit_length(), 1)
        q = quantize_dyadic_time(inst, y, level)
        assert solution_violations(inst, q) == []
        unit = F(1, 2 ** level)
        for j in range(inst.n):
            for i in range(inst.m):
                p = inst.jobs[j].proc[i]
                if p is not None:
                    assert (q.job_machine_total(i, j) / p) % unit == 0
        assert measure_alpha(inst, q).alpha <= measure_alpha(inst, y).alpha + 1
        assert aux_cost(inst, q) <= aux_cost(inst, y)


def _random_half_integral_solution(inst, rng):
    from flowdisc.totalflow import default_horizon

    H = default_horizon(inst) + 4
    entries = {}
    for j, job in enumerate(inst.jobs):
        finite = [i for i in range(inst.m) if job.proc[i] is not None]
        if len(finite) >= 2 and rng.random() < 0.6:
            a, b = rng.sample(finite, 2)
            for i in (a, b):
                t = rng.randint(int(job.release), H - 1)
                key = (i, j, t)
                entries[key] = entries.get(key, F(0)) + job.proc[i] / 2
        else:
            i = rng.choice(finite)
            t1 = rng.randint(int(job.release), H - 1)
            t2 = rng.randint(int(job.release), H - 1)
            entries[(i, j, t1)] = entries.get((i, j, t1), F(0)) + job.proc[i] / 2
            entries[(i, j, t2)] = entries.get((i, j, t2), F(0)) + job.proc[i] / 2
    return TimeIndexedSolution(horizon=H, entries=entries)


def test_rounding_vector_formula():
    # half on machine 0 (p=3, class 2) and machine 1 (p=5, class 3)
    inst = make_instance(2, [(0, [3, 5])])
    dim, vectors, pos_side = rounding_vectors(inst, [0], {0: (0, 0, 1)})
    assert vectors[0].count(F(0)) == dim - 2
    assert F(3, 8) in vectors[0]
    assert F(-5, 16) in vectors[0]
    assert pos_side[0] == (0, 1)
    assert sum(abs(x) for x in vectors[0]) <= 1


def test_round_half_integral_examples_and_bounds():
    rng = random.Random(47)
    for trial in range(25):
        inst = gen_random_instance(rng.randint(1, 6), rng.randint(1, 3),
                                   (1, 8), (0, 5), 0.2, seed=700 + trial)
        y = _random_half_integral_solution(inst, rng)
        assert solution_violations(inst, y) == []
        ybar = normalize_consistent_order(inst, y)
        alpha_in = measure_alpha(inst, ybar).alpha
        out, d = round_half_integral_totalflow(inst, y, brute)
        assert is_integral(inst, out)
        assert solution_violations(inst, out) == []
        assert measure_alpha(inst, out).alpha <= alpha_in + 4 * d + 4
        # flip fallback: never worse than the earliest-slot compaction
        compact = {}
        for j in range(inst.n):
            for i in range(inst.m):
                tot = ybar.job_machine_total(i, j)
                if tot:
                    t0 = min(t for (ii, jj, t) in ybar.entries if ii == i and jj == j)
                    compact[(i, j, t0)] = tot
        ycomp = TimeIndexedSolution(horizon=y.horizon, entries=compact)
        assert aux_cost(inst, out) <= aux_cost(inst, ycomp)


def test_round_all_integral_compaction_only():
    inst = make_instance(1, [(0, [2]), (1, [2])])
    y = TimeIndexedSolution(horizon=9, entries={(0, 0, 3): F(1), (0, 0, 6): F(1),
                                                (0, 1, 2): F(2)})
    out, d = round_half_integral_totalflow(inst, y, brute)
    assert d == 0
    assert is_integral(inst, out)
    assert aux_cost(inst, out) <= aux_cost(inst, y)


def test_full_round_trace_bound_exact():
    rng = random.Random(53)
    inst = gen_random_instance(4, 2, (1, 4), (0, 4), 0.0, seed=77)
    y, trace = full_round_totalflow(inst, brute)
    dinst = dilate_instance(inst, trace.dilation)
    assert is_integral(dinst, y)
    assert trace.alpha_quantized <= trace.alpha_initial + 1
    for rec in trace.levels:
        assert rec.alpha_after <= rec.alpha_before + rec.level_bound
    assert trace.alpha_final <= trace.bound_value
    assert measure_alpha(dinst, y).alpha == trace.alpha_final
    data = result_to_json(trace)
    assert check_result(inst, data) == []


def test_full_round_single_job():
    inst = make_instance(2, [(0, [2, 1])])
    y, trace = full_round_totalflow(inst, brute)
    assert trace.alpha_final == 0
    assert trace.levels == []  # n = 1 needs no levels


def test_schedule_from_integral_single_job():
    inst = make_instance(1, [(0, [4])])
    y = TimeIndexedSolution(horizon=6, entries={(0, 0, 0): F(4)})
    rep = schedule_from_integral(inst, y)
    assert rep.total_flow == 4
    assert rep.ratio >= 1 and rep.restricted_lp_cost > 0


def test_schedule_from_integral_report():
    inst = make_instance(1, [(0, [1]), (0, [1])])
    y = TimeIndexedSolution(horizon=4, entries={(0, 0, 0): F(1), (0, 1, 1): F(1)})
    rep = schedule_from_integral(inst, y)
    assert rep.total_flow == 3
    assert rep.total_flow >= rep.restricted_lp_cost
    assert rep.ratio >= 1


def test_schedule_from_integral_rejects_fractional():
    inst = make_instance(1, [(0, [2])])
    y = TimeIndexedSolution(horizon=4, entries={(0, 0, 0): F(1), (0, 0, 1): F(1)})
    with pytest.raises(ValidationError):
        schedule_from_integral(inst, y)
