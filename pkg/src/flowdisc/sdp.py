"""Vector relaxation of prefix balancing via coordinate blocks.

Each coordinate of an input sequence is replaced by a block of r coordinates;
every vector spawns r copies, the l-th copy occupying the l-th slot of each
block.  A sign pattern for the block sequence folds into unit vectors
w_j = r^(-1/2) * (signs of vector j), and the squared block sums of the signed
prefix sums equal r times the squared prefix norms of the folded relaxation.
The convex body K caps every block's squared sum at (1+delta)^2 r; the block
size is chosen so a standard Gaussian vector lands outside one block's cap
with probability at most 1/(2nrm), via the explicit Laurent-Massart
chi-square tail.

All norm comparisons happen on squared rationals; no square roots are taken
except for display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .coloring import SignedVectorSequence
from .util import ValidationError


@dataclass
class BlockInstance:
    """Block expansion of a sequence: n*r vectors in R^(r*m).

    Coordinate (i, l) lives at index i*r + l (blocks are contiguous).  Block
    vector (j, l) carries v_i^(j) at (i, l) for every i and zero elsewhere,
    so its l2 norm equals the original vector's.
    """

    m: int
    n: int
    r: int
    base: list  # original vectors

    @property
    def dim(self) -> int:
        return self.m * self.r

    @property
    def count(self) -> int:
        return self.n * self.r

    def coordinate(self, i: int, slot: int) -> int:
        return i * self.r + slot

    def vector(self, j: int, slot: int) -> list:
        v = [Fraction(0)] * self.dim
        for i in range(self.m):
            v[self.coordinate(i, slot)] = self.base[j][i]
        return v

    def vectors(self) -> list:
        return [self.vector(j, slot) for j in range(self.n) for slot in range(self.r)]


def build_block_instance(seq: SignedVectorSequence, r: int) -> BlockInstance:
    if r < 1:
        raise ValidationError(f"block size must be >= 1, got {r}")
    return BlockInstance(m=seq.m, n=seq.n, r=r, base=[tuple(v) for v in seq.vectors])


def choose_r(delta, n: int, m: int) -> int:
    """Smallest block size passing the Laurent-Massart tail requirement.

    With x = ln(2 n r m), a chi-square with r degrees of freedom exceeds
    r + 2 sqrt(r x) + 2 x with probability at most e^(-x) = 1/(2 n r m); the
    block size must push that threshold below (1+delta)^2 r.
    """
    delta = float(delta)
    if delta <= 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    target = (1.0 + delta) ** 2
    r = 1
    while True:
        x = math.log(2 * n * r * m)
        if r + 2 * math.sqrt(r * x) + 2 * x <= target * r:
            return r
        r += 1


def in_body_K(point: list, r: int, delta) -> tuple[bool, list]:
    """Membership in K plus the exact per-block squared sums.

    K caps each block's squared coordinate sum at (1+delta)^2 r; the body is
    closed, convex and symmetric under negation.
    """
    delta = Fraction(delta)
    if len(point) % r != 0:
        raise ValidationError(f"dimension {len(point)} is not a multiple of r = {r}")
    cap = (1 + delta) ** 2 * r
    sums = []
    inside = True
    for base in range(0, len(point), r):
        s = sum((Fraction(x) ** 2 for x in point[base:base + r]), Fraction(0))
        sums.append(s)
        if s > cap:
            inside = False
    return inside, sums


@dataclass
class SdpSolution:
    """Unit vectors with entries +- r^(-1/2), stored as the sign matrix plus r."""

    r: int
    signs: list  # n rows of r entries in {-1, +1}

    def __post_init__(self):
        for row in self.signs:
            if len(row) != self.r:
                raise ValidationError("sign row length differs from r")
            for s in row:
                if s not in (-1, 1):
                    raise ValidationError(f"sign {s} outside {{-1, +1}}")

    @property
    def n(self) -> int:
        return len(self.signs)

    def norm_sq(self, j: int) -> Fraction:
        return sum((Fraction(s * s, self.r) for s in self.signs[j]), Fraction(0))


def signs_to_sdp_vectors(signs: list[int], r: int) -> SdpSolution:
    """Fold n*r block signs (grouped by vector) into n unit vectors."""
    if len(signs) % r != 0:
        raise ValidationError(f"{len(signs)} signs do not group into blocks of {r}")
    for s in signs:
        if s not in (-1, 1):
            raise ValidationError("all block signs must be set to +-1")
    rows = [signs[j * r:(j + 1) * r] for j in range(len(signs) // r)]
    return SdpSolution(r=r, signs=rows)


@dataclass(frozen=True)
class SdpDiscrepancyReport:
    value_sq: Fraction  # max over (coordinate, prefix) of the squared l2 norm
    witness: tuple      # (coordinate, prefix length)

    @property
    def value_float(self) -> float:
        return math.sqrt(float(self.value_sq))


def sdp_prefix_discrepancy(seq: SignedVectorSequence, sol: SdpSolution) -> SdpDiscrepancyReport:
    """Exact squared value of max_{i,k} l2-norm of sum_{j<=k} v_i^(j) w_j."""
    if sol.n != seq.n:
        raise ValidationError(f"{sol.n} unit vectors for {seq.n} input vectors")
    best = Fraction(0)
    wit = (0, 0)
    for i in range(seq.m):
        acc = [Fraction(0)] * sol.r
        for k in range(seq.n):
            coeff = seq.vectors[k][i]
            if coeff:
                row = sol.signs[k]
                for slot in range(sol.r):
                    acc[slot] += coeff * row[slot]
            val = sum((a * a for a in acc), Fraction(0)) / sol.r
            if val > best:
                best = val
                wit = (i, k + 1)
    return SdpDiscrepancyReport(value_sq=best, witness=wit)


def group_prefix_sums(block: BlockInstance, signs: list[int]) -> list:
    """Signed prefix sums of the block sequence at whole-vector boundaries."""
    if len(signs) != block.count:
        raise ValidationError("sign count differs from the block vector count")
    out = []
    acc = [Fraction(0)] * block.dim
    pos = 0
    for j in range(block.n):
        for slot in range(block.r):
            v = block.base[j]
            for i in range(block.m):
                acc[block.coordinate(i, slot)] += signs[pos] * v[i]
            pos += 1
        out.append(list(acc))
    return out


def group_prefixes_in_K(block: BlockInstance, signs: list[int], delta) -> bool:
    return all(in_body_K(s, block.r, delta)[0] for s in group_prefix_sums(block, signs))


def search_block_coloring(block: BlockInstance, delta, limit: int = 4096) -> Optional[list[int]]:
    """Depth-first search for block signs keeping every prefix sum inside K.

    Prunes as soon as a prefix leaves the body (membership is checked per
    step, which is sound because a violated prefix stays violated).  Returns
    the first coloring found in +1-first order, or None when the space is
    exhausted.
    """
    total = block.count
    if 2 ** total > limit * 2 ** 12:
        raise ValidationError(f"search space 2^{total} too large")
    delta = Fraction(delta)
    cap = (1 + delta) ** 2 * block.r
    flat = block.vectors()
    acc = [Fraction(0)] * block.dim
    signs: list[int] = []

    def block_sums_ok() -> bool:
        for base in range(0, block.dim, block.r):
            s = sum((acc[c] ** 2 for c in range(base, base + block.r)), Fraction(0))
            if s > cap:
                return False
        return True

    def dfs(pos: int) -> bool:
        if pos == total:
            return True
        v = flat[pos]
        for s in (1, -1):
            for c in range(block.dim):
                if v[c]:
                    acc[c] += s * v[c]
            signs.append(s)
            if block_sums_ok() and dfs(pos + 1):
                return True
            signs.pop()
            for c in range(block.dim):
                if v[c]:
                    acc[c] -= s * v[c]
        return False

    return signs[:] if dfs(0) else None


@dataclass(frozen=True)
class McTailReport:
    r: int
    threshold: float
    samples: int
    exceed: int
    fraction: float
    target: float      # 1 / (2 n r m)
    slack: float       # 3 * sqrt(q (1-q) / samples) at the observed fraction

    @property
    def within_target(self) -> bool:
        return self.fraction <= self.target + self.slack


def gaussian_measure_mc(r: int, delta, n: int, m: int, samples: int, seed: int) -> McTailReport:
    """Monte-Carlo estimate of one block's tail: P[chi^2_r > (1+delta)^2 r].

    Deterministic in the seed.  Reports the observed fraction next to the
    1/(2 n r m) requirement plus three binomial standard deviations of slack.
    """
    if samples < 10 ** 4:
        raise ValidationError(f"need at least 10^4 samples, got {samples}")
    threshold = (1.0 + float(delta)) ** 2 * r
    rng = np.random.default_rng(seed)
    exceed = 0
    chunk = 20000
    done = 0
    while done < samples:
        take = min(chunk, samples - done)
        g = rng.standard_normal((take, r))
        exceed += int(((g * g).sum(axis=1) > threshold).sum())
        done += take
    q = exceed / samples
    slack = 3.0 * math.sqrt(max(q * (1.0 - q), 1.0 / samples) / samples)
    return McTailReport(
        r=r,
        threshold=threshold,
        samples=samples,
        exceed=exceed,
        fraction=q,
        target=1.0 / (2 * n * r * m),
        slack=slack,
    )
