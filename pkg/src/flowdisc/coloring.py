"""Prefix/interval discrepancy evaluation and sign-finding algorithms.

A `SignedVectorSequence` is an ordered list of rational vectors together with
a (possibly partial) coloring in {-1, 0, +1}.  Three discrepancy measures are
supported:

- ``prefix``: max over prefixes k of the infinity norm of the signed sum,
- ``interval``: the same over all consecutive index windows,
- ``one_sided_interval``: max over windows and coordinates of the signed sum
  itself (upper deviations only, no absolute value).

Colorers: exhaustive search, online greedy, a floating-coefficient scheme with
a certified 2m prefix bound (Barany-Grinberg style), and a pairing-game
colorer for 2-sparse sign vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Optional

from .util import ValidationError, rat_from_str, rat_to_str

PREFIX = "prefix"
INTERVAL = "interval"
ONE_SIDED = "one_sided_interval"
_MODES = (PREFIX, INTERVAL, ONE_SIDED)


@dataclass
class SignedVectorSequence:
    m: int
    vectors: list  # list of tuples of Fractions, each of length m
    signs: list = field(default_factory=list)  # entries in {-1, 0, +1}; 0 = uncolored

    def __post_init__(self):
        self.vectors = [tuple(Fraction(x) for x in v) for v in self.vectors]
        if not self.signs:
            self.signs = [0] * len(self.vectors)
        for v in self.vectors:
            if len(v) != self.m:
                raise ValidationError(f"vector of dimension {len(v)}, expected {self.m}")
        if len(self.signs) != len(self.vectors):
            raise ValidationError("signs length differs from vector count")
        for s in self.signs:
            if s not in (-1, 0, 1):
                raise ValidationError(f"sign {s} outside {{-1, 0, +1}}")

    @property
    def n(self) -> int:
        return len(self.vectors)

    def l1_violations(self) -> list[int]:
        """Indices whose l1 norm exceeds 1 (the bounded-l1 setting is validated, not assumed)."""
        return [j for j, v in enumerate(self.vectors) if sum(abs(x) for x in v) > 1]

    def with_signs(self, signs) -> "SignedVectorSequence":
        return SignedVectorSequence(self.m, list(self.vectors), list(signs))


@dataclass(frozen=True)
class DiscrepancyReport:
    mode: str
    value: Fraction
    witness: tuple  # (coordinate, first index, last index), inclusive 0-based

    def reproduce(self, seq: SignedVectorSequence) -> Fraction:
        """Re-evaluate the witness window; must equal ``value``."""
        coord, lo, hi = self.witness
        total = sum(
            (seq.signs[j] * seq.vectors[j][coord] for j in range(lo, hi + 1)), Fraction(0)
        )
        return total if self.mode == ONE_SIDED else abs(total)


def _require_fully_signed(seq: SignedVectorSequence) -> None:
    for j, s in enumerate(seq.signs):
        if s == 0:
            raise ValidationError(f"vector {j} is uncolored")


def _scaled_columns(seq: SignedVectorSequence):
    """Per-coordinate integer entry lists plus their common scale (exactness keeper)."""
    cols = []
    for i in range(seq.m):
        scale = lcm(*(seq.vectors[j][i].denominator for j in range(seq.n))) if seq.n else 1
        ints = [int(seq.vectors[j][i] * scale) for j in range(seq.n)]
        cols.append((ints, scale))
    return cols


def discrepancy(seq: SignedVectorSequence, mode: str) -> DiscrepancyReport:
    """Evaluate a fully signed sequence under the requested measure, with witness."""
    if mode not in _MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    _require_fully_signed(seq)
    if seq.n == 0:
        return DiscrepancyReport(mode, Fraction(0), (0, 0, -1))
    best_val: Optional[Fraction] = None
    best_wit = None
    for i, (ints, scale) in enumerate(_scaled_columns(seq)):
        run = 0
        if mode == PREFIX:
            for k in range(seq.n):
                run += seq.signs[k] * ints[k]
                val = Fraction(abs(run), scale)
                if best_val is None or val > best_val:
                    best_val, best_wit = val, (i, 0, k)
        elif mode == INTERVAL:
            # spread of prefix sums (S_0 = 0 included) = max window |sum|
            lo_v = hi_v = 0
            lo_k = hi_k = -1  # prefix index of extreme (-1 = empty prefix)
            for k in range(seq.n):
                run += seq.signs[k] * ints[k]
                if run < lo_v:
                    lo_v, lo_k = run, k
                if run > hi_v:
                    hi_v, hi_k = run, k
            val = Fraction(hi_v - lo_v, scale)
            a, b = min(lo_k, hi_k), max(lo_k, hi_k)
            wit = (i, a + 1, b)
            if best_val is None or val > best_val:
                best_val, best_wit = val, wit
        else:  # one-sided: max over l of S_l - min_{q < l} S_q
            min_v, min_k = 0, -1
            for k in range(seq.n):
                prev_min, prev_min_k = min_v, min_k
                run += seq.signs[k] * ints[k]
                val = Fraction(run - prev_min, scale)
                if best_val is None or val > best_val:
                    best_val, best_wit = val, (i, prev_min_k + 1, k)
                if run < min_v:
                    min_v, min_k = run, k
    return DiscrepancyReport(mode, best_val, best_wit)


def _pattern_value(cols, signs, mode) -> Fraction:
    """Value-only evaluation used by the exhaustive search."""
    best = None
    for ints, scale in cols:
        run = 0
        if mode == PREFIX:
            peak = 0
            for k, s in enumerate(signs):
                run += s * ints[k]
                a = -run if run < 0 else run
                if a > peak:
                    peak = a
            val = Fraction(peak, scale)
        elif mode == INTERVAL:
            lo = hi = 0
            for k, s in enumerate(signs):
                run += s * ints[k]
                if run < lo:
                    lo = run
                elif run > hi:
                    hi = run
            val = Fraction(hi - lo, scale)
        else:
            mn = 0
            peak = None
            for k, s in enumerate(signs):
                run += s * ints[k]
                d = run - mn
                if peak is None or d > peak:
                    peak = d
                if run < mn:
                    mn = run
            val = Fraction(peak, scale)
        if best is None or val > best:
            best = val
    return best


def color_brute_force(seq: SignedVectorSequence, mode: str, limit: int = 20) -> list[int]:
    """Exhaustive optimal coloring; returns the lexicographically least optimum.

    For the flip-invariant measures (prefix, interval) the first sign is fixed
    to +1, halving the search.  One-sided interval values are not invariant
    under a global flip, so that mode enumerates all 2^n patterns.
    """
    if mode not in _MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    if seq.n > limit:
        raise ValidationError(f"n = {seq.n} exceeds brute-force limit {limit}")
    if seq.n == 0:
        return []
    cols = _scaled_columns(seq)
    if mode == ONE_SIDED:
        candidates = itertools.product((-1, 1), repeat=seq.n)
    else:
        candidates = ((1,) + rest for rest in itertools.product((-1, 1), repeat=seq.n - 1))
    best_val = None
    best_signs = None
    for signs in candidates:
        val = _pattern_value(cols, signs, mode)
        if best_val is None or val < best_val:
            best_val, best_signs = val, signs
    return list(best_signs)


def color_greedy(seq: SignedVectorSequence) -> list[int]:
    """Process vectors in order, choosing the sign that minimizes the running
    prefix infinity norm; ties go to +1."""
    sums = [Fraction(0)] * seq.m
    signs = []
    for v in seq.vectors:
        plus = max(abs(s + x) for s, x in zip(sums, v)) if seq.m else Fraction(0)
        minus = max(abs(s - x) for s, x in zip(sums, v)) if seq.m else Fraction(0)
        eps = 1 if plus <= minus else -1
        signs.append(eps)
        sums = [s + eps * x for s, x in zip(sums, v)]
    return signs


def _lex_least_kernel_vector(matrix: list[list[Fraction]], ncols: int) -> list[Fraction]:
    """Lexicographically least basis vector of the kernel, by exact elimination.

    `matrix` has full column count `ncols` and strictly fewer independent rows
    than columns, so the kernel is nontrivial.
    """
    rows = [list(r) for r in matrix]
    nrows = len(rows)
    pivot_of_col: dict[int, int] = {}
    rank = 0
    for col in range(ncols):
        sel = next((r for r in range(rank, nrows) if rows[r][col] != 0), None)
        if sel is None:
            continue
        rows[rank], rows[sel] = rows[sel], rows[rank]
        pr = rows[rank]
        inv = pr[col]
        rows[rank] = [x / inv for x in pr]
        for r in range(nrows):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        pivot_of_col[col] = rank
        rank += 1
    free_cols = [c for c in range(ncols) if c not in pivot_of_col]
    assert free_cols, "kernel unexpectedly trivial"
    basis = []
    for fc in free_cols:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for pc, pr in pivot_of_col.items():
            vec[pc] = -rows[pr][fc]
        basis.append(vec)
    return min(basis, key=tuple)


def color_floating(seq: SignedVectorSequence) -> list[int]:
    """Floating-coefficient colorer with a certified prefix bound of 2m.

    Requires every vector to have l1 norm at most 1.  Coefficients start at 0;
    whenever more than m of them are strictly fractional, the coefficient
    vector moves along an exact kernel direction of the coordinate matrix
    until some coefficient hits +-1 and freezes.  At most m coefficients stay
    fractional after every insertion, and the signed prefix sums of the final
    rounding never exceed 2m in infinity norm.
    """
    bad = seq.l1_violations()
    if bad:
        raise ValidationError(f"l1 norm exceeds 1 at indices {bad}")
    n, m = seq.n, seq.m
    alpha: dict[int, Fraction] = {}
    floating: list[int] = []
    signs = [0] * n
    for j in range(n):
        alpha[j] = Fraction(0)
        floating.append(j)
        while len(floating) > m:
            matrix = [[seq.vectors[idx][i] for idx in floating] for i in range(m)]
            lam = _lex_least_kernel_vector(matrix, len(floating))
            step = None
            for pos, l in enumerate(lam):
                if l == 0:
                    continue
                a = alpha[floating[pos]]
                t = (1 - a) / l if l > 0 else (-1 - a) / l
                if step is None or t < step:
                    step = t
            assert step is not None and step > 0
            hit = []
            for pos, idx in enumerate(floating):
                alpha[idx] += step * lam[pos]
                if abs(alpha[idx]) == 1:
                    hit.append(idx)
            for idx in hit:
                signs[idx] = int(alpha[idx])
                floating.remove(idx)
        assert len(floating) <= m
    for idx in floating:
        signs[idx] = 1 if alpha[idx] >= 0 else -1
    return signs


def color_two_sparse_paired(seq: SignedVectorSequence) -> list[int]:
    """Color 2-sparse sign vectors by two interleaved pairing strategies.

    Precondition: every entry lies in {-1, 0, +1} and every vector has at most
    two nonzero entries.  Each vector splits into its first and second nonzero
    entry; one balancing player guards the per-coordinate prefixes of the
    first entries, the other guards the second entries.  Each player's
    per-coordinate system stays within the pairing bound 4, so the full
    sequence has prefix discrepancy at most 8.
    """
    from .game import interleave_pairing_colorings  # local import: game has no coloring dep

    first_dim: list[Optional[int]] = []
    second_dim: list[Optional[int]] = []
    first_val: list[int] = []
    second_val: list[int] = []
    for j, v in enumerate(seq.vectors):
        nz = [(i, x) for i, x in enumerate(v) if x != 0]
        if len(nz) > 2:
            raise ValidationError(f"vector {j} has sparsity {len(nz)} > 2")
        for _, x in nz:
            if x not in (-1, 1):
                raise ValidationError(f"vector {j} has entry {x} outside {{-1, 0, +1}}")
        first_dim.append(nz[0][0] if nz else None)
        first_val.append(int(nz[0][1]) if nz else 0)
        second_dim.append(nz[1][0] if len(nz) > 1 else None)
        second_val.append(int(nz[1][1]) if len(nz) > 1 else 0)

    def side_games(dims, vals):
        games = {}
        for j in range(seq.n):
            if dims[j] is not None:
                games.setdefault(dims[j], []).append((j, vals[j]))
        return games

    colors = [0] * seq.n
    interleave_pairing_colorings(
        n=seq.n,
        games_a=side_games(first_dim, first_val),
        games_b=side_games(second_dim, second_val),
        dim_a=first_dim,
        dim_b=second_dim,
        colors=colors,
    )
    return colors


def seq_to_json(seq: SignedVectorSequence) -> dict:
    data = {
        "m": seq.m,
        "vectors": [[rat_to_str(x) for x in v] for v in seq.vectors],
    }
    if any(s != 0 for s in seq.signs):
        data["signs"] = list(seq.signs)
    return data


def seq_from_json(data: dict) -> SignedVectorSequence:
    try:
        m = int(data["m"])
        vectors = [[rat_from_str(x) for x in row] for row in data["vectors"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"vector file malformed: {exc}") from None
    signs = [int(s) for s in data.get("signs", [])]
    return SignedVectorSequence(m=m, vectors=vectors, signs=signs)


def get_colorer(name: str):
    """Resolve a colorer name to a callable `seq -> signs` (prefix objective)."""
    table = {
        "brute": lambda seq: color_brute_force(seq, PREFIX),
        "greedy": color_greedy,
        "floating": color_floating,
        "paired": color_two_sparse_paired,
    }
    if name not in table:
        raise ValidationError(f"unknown colorer {name!r} (choose from {sorted(table)})")
    return table[name]
