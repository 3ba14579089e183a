"""Exact-rational linear programming via two-phase primal simplex.

Everything is computed over exact rationals; there are no tolerances anywhere.
Internally each tableau row is kept as a vector of integers plus a positive
denominator, which keeps the hot pivot loop in (fast) bignum arithmetic with a
single gcd pass per row instead of per-entry `Fraction` normalization.

Pivoting uses Bland's rule for both the entering and the leaving choice, so
solves are deterministic and cannot cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Optional

from .util import ValidationError

LE, EQ, GE = "<=", "==", ">="
_RELATIONS = (LE, EQ, GE)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class Constraint:
    coeffs: dict
    relation: str
    rhs: Fraction


@dataclass
class LinearProgram:
    """A minimization LP over named variables.

    ``bounds`` maps a variable to ``(lower, upper)``; missing variables default
    to ``(0, None)``.  A lower bound of ``None`` means the variable is free.
    """

    variables: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)

    def add_constraint(self, coeffs: dict, relation: str, rhs) -> None:
        if relation not in _RELATIONS:
            raise ValidationError(f"unknown relation {relation!r}")
        self.constraints.append(
            Constraint({v: Fraction(c) for v, c in coeffs.items()}, relation, Fraction(rhs))
        )


@dataclass(frozen=True)
class LpSolution:
    status: str
    values: dict
    objective_value: Optional[Fraction]


@dataclass(frozen=True)
class Violation:
    """One violated constraint or bound, with its exact slack."""

    kind: str  # "constraint" or "bound"
    index: object  # constraint position or variable name
    relation: str
    lhs: Fraction
    rhs: Fraction
    slack: Fraction


def _validate(lp: LinearProgram) -> None:
    declared = set(lp.variables)
    if len(declared) != len(lp.variables):
        raise ValidationError("duplicate variable names")
    for name in lp.objective:
        if name not in declared:
            raise ValidationError(f"objective references undeclared variable {name!r}")
    for pos, con in enumerate(lp.constraints):
        if con.relation not in _RELATIONS:
            raise ValidationError(f"constraint {pos}: unknown relation {con.relation!r}")
        for name in con.coeffs:
            if name not in declared:
                raise ValidationError(f"constraint {pos} references undeclared variable {name!r}")
    for name in lp.bounds:
        if name not in declared:
            raise ValidationError(f"bound on undeclared variable {name!r}")


def _gcd_reduce(ints: list, den: int) -> tuple[list, int]:
    g = den
    for v in ints:
        if v:
            g = math.gcd(g, v)
            if g == 1:
                return ints, den
    if g > 1:
        ints = [v // g for v in ints]
        den //= g
    return ints, den


class _Tableau:
    """Dense simplex tableau with integer rows and per-row denominators."""

    def __init__(self, rows, dens, basis, ncols):
        self.rows = rows          # list[list[int]], each of length ncols + 1 (rhs last)
        self.dens = dens          # list[int], all > 0
        self.basis = basis        # basis variable (column) per row
        self.ncols = ncols
        self.zrow: list = []      # objective row, length ncols + 1
        self.zden: int = 1

    def set_objective(self, reduced: list[Fraction], z_const: Fraction) -> None:
        denom = reduce(math.lcm, [f.denominator for f in reduced] + [z_const.denominator], 1)
        self.zrow = [int(f * denom) for f in reduced] + [int(-z_const * denom)]
        self.zden = denom

    def pivot(self, r: int, s: int) -> None:
        prow = self.rows[r]
        piv = prow[s]
        assert piv > 0
        for q in range(len(self.rows)):
            if q == r:
                continue
            row = self.rows[q]
            a = row[s]
            if a == 0:
                continue
            new = [row[j] * piv - a * prow[j] for j in range(self.ncols + 1)]
            new, den = _gcd_reduce(new, self.dens[q] * piv)
            self.rows[q] = new
            self.dens[q] = den
        a = self.zrow[s]
        if a != 0:
            new = [self.zrow[j] * piv - a * prow[j] for j in range(self.ncols + 1)]
            new, den = _gcd_reduce(new, self.zden * piv)
            self.zrow = new
            self.zden = den
        new, den = _gcd_reduce(list(prow), piv)
        self.rows[r] = new
        self.dens[r] = den
        self.basis[r] = s

    def run(self, allowed) -> str:
        """Bland-rule simplex until optimal or unbounded over `allowed` columns."""
        while True:
            enter = -1
            for j in range(self.ncols):
                if allowed[j] and self.zrow[j] < 0:
                    enter = j
                    break
            if enter < 0:
                return OPTIMAL
            leave = -1
            best_num = best_den = 0  # ratio = rhs/a as best_num/best_den
            for i, row in enumerate(self.rows):
                a = row[enter]
                if a <= 0:
                    continue
                rhs = row[self.ncols]
                if leave < 0:
                    leave, best_num, best_den = i, rhs, a
                    continue
                cmp = rhs * best_den - best_num * a
                if cmp < 0 or (cmp == 0 and self.basis[i] < self.basis[leave]):
                    leave, best_num, best_den = i, rhs, a
            if leave < 0:
                return UNBOUNDED
            self.pivot(leave, enter)

    def basic_values(self) -> dict:
        out = {}
        for i, b in enumerate(self.basis):
            out[b] = Fraction(self.rows[i][self.ncols], self.dens[i])
        return out


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Exact optimal basic solution of `lp`, or Infeasible/Unbounded status.

    Deterministic: identical inputs produce the identical basis and values.
    """
    _validate(lp)

    # Column transforms: shift lower bounds to 0, split free variables,
    # turn upper bounds into extra rows.
    col_names: list[str] = []
    piece_map: dict = {}  # var -> ("shift", col, lower) | ("split", col_pos, col_neg)
    extra_rows: list[tuple[dict, str, Fraction]] = []  # coeffs over columns
    for var in lp.variables:
        lo, hi = lp.bounds.get(var, (Fraction(0), None))
        lo = None if lo is None else Fraction(lo)
        hi = None if hi is None else Fraction(hi)
        if lo is None:
            cp = len(col_names)
            col_names.append(var + "+")
            cm = len(col_names)
            col_names.append(var + "-")
            piece_map[var] = ("split", cp, cm)
            if hi is not None:
                extra_rows.append(({cp: Fraction(1), cm: Fraction(-1)}, LE, hi))
        else:
            c = len(col_names)
            col_names.append(var)
            piece_map[var] = ("shift", c, lo)
            if hi is not None:
                if hi < lo:
                    return LpSolution(INFEASIBLE, {}, None)
                extra_rows.append(({c: Fraction(1)}, LE, hi - lo))

    def to_columns(coeffs: dict) -> tuple[dict, Fraction]:
        """Rewrite variable coefficients over columns; return (col coeffs, lhs offset)."""
        cols: dict = {}
        offset = Fraction(0)
        for var, c in coeffs.items():
            c = Fraction(c)
            if c == 0:
                continue
            piece = piece_map[var]
            if piece[0] == "shift":
                _, col, lo = piece
                cols[col] = cols.get(col, Fraction(0)) + c
                offset += c * lo
            else:
                _, cp, cm = piece
                cols[cp] = cols.get(cp, Fraction(0)) + c
                cols[cm] = cols.get(cm, Fraction(0)) - c
        return cols, offset

    rows_spec: list[tuple[dict, str, Fraction]] = []
    for con in lp.constraints:
        cols, offset = to_columns(con.coeffs)
        rows_spec.append((cols, con.relation, Fraction(con.rhs) - offset))
    rows_spec.extend(extra_rows)

    nstruct = len(col_names)
    # slack/surplus and artificial columns
    slack_of: list[Optional[int]] = []
    ncols = nstruct
    row_kinds = []
    for cols, rel, rhs in rows_spec:
        if rhs < 0:
            cols = {c: -v for c, v in cols.items()}
            rhs = -rhs
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        row_kinds.append((cols, rel, rhs))
    for cols, rel, rhs in row_kinds:
        if rel == LE:
            slack_of.append(ncols)
            ncols += 1
        elif rel == GE:
            slack_of.append(ncols)
            ncols += 1
        else:
            slack_of.append(None)
    art_of: list[Optional[int]] = []
    for cols, rel, rhs in row_kinds:
        if rel == LE:
            art_of.append(None)
        else:
            art_of.append(ncols)
            ncols += 1

    rows: list[list[int]] = []
    dens: list[int] = []
    basis: list[int] = []
    art_cols: set[int] = set(c for c in art_of if c is not None)
    for idx, (cols, rel, rhs) in enumerate(row_kinds):
        dvals = [v.denominator for v in cols.values()] + [rhs.denominator]
        den = reduce(math.lcm, dvals, 1)
        ints = [0] * (ncols + 1)
        for c, v in cols.items():
            ints[c] = int(v * den)
        ints[ncols] = int(rhs * den)
        if rel == LE:
            ints[slack_of[idx]] = den
            basis.append(slack_of[idx])
        elif rel == GE:
            ints[slack_of[idx]] = -den
            ints[art_of[idx]] = den
            basis.append(art_of[idx])
        else:
            ints[art_of[idx]] = den
            basis.append(art_of[idx])
        ints, den = _gcd_reduce(ints, den)
        rows.append(ints)
        dens.append(den)

    tab = _Tableau(rows, dens, basis, ncols)

    # Phase 1: minimize the sum of artificials (skipped when there are none).
    if art_cols:
        reduced = []
        for j in range(ncols):
            r = Fraction(1) if j in art_cols else Fraction(0)
            for i, b in enumerate(tab.basis):
                if b in art_cols and tab.rows[i][j]:
                    r -= Fraction(tab.rows[i][j], tab.dens[i])
            reduced.append(r)
        z0 = Fraction(0)
        for i, b in enumerate(tab.basis):
            if b in art_cols:
                z0 += Fraction(tab.rows[i][ncols], tab.dens[i])
        tab.set_objective(reduced, z0)
        allowed = [True] * ncols
        status = tab.run(allowed)
        assert status == OPTIMAL  # phase 1 is bounded below by 0
        phase1 = Fraction(-tab.zrow[ncols], tab.zden)
        if phase1 != 0:
            return LpSolution(INFEASIBLE, {}, None)
        # drive leftover artificials out of the basis (or drop redundant rows)
        drop: list[int] = []
        for i in range(len(tab.rows)):
            if tab.basis[i] in art_cols:
                piv_col = -1
                for j in range(ncols):
                    if j not in art_cols and tab.rows[i][j] > 0:
                        piv_col = j
                        break
                    if j not in art_cols and tab.rows[i][j] < 0:
                        # negate the row first so the pivot entry is positive
                        tab.rows[i] = [-v for v in tab.rows[i]]
                        piv_col = j
                        break
                if piv_col >= 0:
                    tab.pivot(i, piv_col)
                else:
                    drop.append(i)
        for i in reversed(drop):
            del tab.rows[i]
            del tab.dens[i]
            del tab.basis[i]

    # Phase 2 with the real objective (identically zero objectives skip it:
    # any feasible basic point is optimal).
    obj_cols, obj_offset = to_columns(lp.objective)
    if obj_cols:
        cost = [Fraction(0)] * ncols
        for c, v in obj_cols.items():
            cost[c] = v
        reduced = list(cost)
        z0 = Fraction(0)
        for i, b in enumerate(tab.basis):
            cb = cost[b]
            if cb:
                deni = tab.dens[i]
                row = tab.rows[i]
                for j in range(ncols):
                    if row[j]:
                        reduced[j] -= cb * Fraction(row[j], deni)
                z0 += cb * Fraction(row[ncols], deni)
        tab.set_objective(reduced, z0)
        allowed = [j not in art_cols for j in range(ncols)]
        status = tab.run(allowed)
        if status == UNBOUNDED:
            return LpSolution(UNBOUNDED, {}, None)

    col_values = tab.basic_values()
    values = {}
    for var in lp.variables:
        piece = piece_map[var]
        if piece[0] == "shift":
            _, col, lo = piece
            values[var] = col_values.get(col, Fraction(0)) + lo
        else:
            _, cp, cm = piece
            values[var] = col_values.get(cp, Fraction(0)) - col_values.get(cm, Fraction(0))
    obj_val = sum((Fraction(c) * values[v] for v, c in lp.objective.items()), Fraction(0))
    return LpSolution(OPTIMAL, values, obj_val)


def check_point(lp: LinearProgram, values: dict) -> list[Violation]:
    """Exactly evaluate every constraint and bound at `values`; list violations.

    Empty result iff the point is feasible.  Raises if a variable is missing.
    """
    _validate(lp)
    for var in lp.variables:
        if var not in values:
            raise ValidationError(f"no value supplied for variable {var!r}")
    out: list[Violation] = []
    for pos, con in enumerate(lp.constraints):
        lhs = sum((c * Fraction(values[v]) for v, c in con.coeffs.items()), Fraction(0))
        rhs = con.rhs
        if con.relation == LE and lhs > rhs:
            out.append(Violation("constraint", pos, LE, lhs, rhs, rhs - lhs))
        elif con.relation == GE and lhs < rhs:
            out.append(Violation("constraint", pos, GE, lhs, rhs, lhs - rhs))
        elif con.relation == EQ and lhs != rhs:
            out.append(Violation("constraint", pos, EQ, lhs, rhs, rhs - lhs))
    for var in lp.variables:
        lo, hi = lp.bounds.get(var, (Fraction(0), None))
        x = Fraction(values[var])
        if lo is not None and x < lo:
            out.append(Violation("bound", var, GE, x, Fraction(lo), x - Fraction(lo)))
        if hi is not None and x > hi:
            out.append(Violation("bound", var, LE, x, Fraction(hi), Fraction(hi) - x))
    return out


def dump_lp(lp: LinearProgram) -> str:
    """Human-readable equation dump (debugging aid, not a stable format)."""
    def term(c, v):
        return f"{c}*{v}"

    lines = ["min " + (" + ".join(term(c, v) for v, c in sorted(lp.objective.items())) or "0")]
    for con in lp.constraints:
        lhs = " + ".join(term(c, v) for v, c in sorted(con.coeffs.items())) or "0"
        lines.append(f"  {lhs} {con.relation} {con.rhs}")
    for var in lp.variables:
        lo, hi = lp.bounds.get(var, (Fraction(0), None))
        lines.append(f"  {lo if lo is not None else '-inf'} <= {var} <= {hi if hi is not None else 'inf'}")
    return "\n".join(lines)
