"""One-dimensional maker-breaker discrepancy game.

Two players alternately color elements of a value sequence with +-1.  The
breaker tries to drive some prefix sum far from zero, the maker keeps all
prefixes balanced.  A "robust" strategy also works when the opponent may pass
("wait").

Provided strategies:

- `PairingMaker`: partners consecutive elements and cancels them; certified
  discrepancy at most 4 on +-1 values, robust against waits.
- `GreedyMaker`: colors the first uncolored element to minimize |prefix|.
- `TreeBreaker`: the unbounded-discrepancy strategy for the layered hard
  instances from `breaker_hard_instance`, maintaining an explicit interval
  structure whose five invariants are asserted after every move.
- `RandomBreaker`: seeded uniform play, for tournaments.

`exhaustive_breaker_value` computes the best payoff a perfect breaker can
force against a fixed maker strategy (the certification tool for the pairing
bound).  `color_two_permutation` reuses the pairing strategy to color a value
sequence so that the prefixes of both the identity order and a second
permutation stay bounded by 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .util import InternalCheckError, ValidationError

MAKER = "maker"
BREAKER = "breaker"

WAIT = ("wait",)


def color_move(index: int, sign: int) -> tuple:
    return ("color", index, sign)


@dataclass
class GameState:
    values: tuple
    colors: list  # -1 / 0 / +1 per element
    to_move: str
    wait_allowed: dict
    history: list = field(default_factory=list)  # (player, index-or-None, sign-or-None)
    must_color: bool = False

    @property
    def n(self) -> int:
        return len(self.values)

    def uncolored(self) -> list[int]:
        return [i for i, c in enumerate(self.colors) if c == 0]


def _max_abs_prefix(values, colors) -> Fraction:
    run = Fraction(0)
    peak = Fraction(0)
    for v, c in zip(values, colors):
        if c:
            run += c * v
        a = -run if run < 0 else run
        if a > peak:
            peak = a
    return peak


def play_game(values, maker, breaker, starter=BREAKER, wait_allowed=(MAKER, BREAKER)):
    """Run a full game; returns (final GameState, per-move max |prefix| trace).

    Strategies are objects with ``move(state) -> move`` where a move is either
    ``("color", index, sign)`` or ``("wait",)``.  Waiting twice in a row while
    elements remain re-queries the current player with ``must_color`` set.
    """
    values = tuple(Fraction(v) for v in values)
    for v in values:
        if not -1 <= v <= 1:
            raise ValidationError(f"game value {v} outside [-1, 1]")
    if starter not in (MAKER, BREAKER):
        raise ValidationError(f"unknown starter {starter!r}")
    state = GameState(
        values=values,
        colors=[0] * len(values),
        to_move=starter,
        wait_allowed={MAKER: MAKER in wait_allowed, BREAKER: BREAKER in wait_allowed},
    )
    players = {MAKER: maker, BREAKER: breaker}
    trace: list[Fraction] = []
    prev_wait = False
    while state.uncolored():
        player = state.to_move
        state.must_color = False
        move = players[player].move(state)
        if move[0] == "wait" and (prev_wait or not state.wait_allowed[player]):
            state.must_color = True
            move = players[player].move(state)
            if move[0] == "wait":
                raise ValidationError(f"{player} strategy waited when forced to color")
        if move[0] == "wait":
            state.history.append((player, None, None))
            prev_wait = True
        elif move[0] == "color":
            _, idx, sign = move
            if not 0 <= idx < state.n or state.colors[idx] != 0:
                raise ValidationError(f"{player} strategy colored an unavailable index {idx}")
            if sign not in (-1, 1):
                raise ValidationError(f"{player} strategy produced sign {sign}")
            state.colors[idx] = sign
            state.history.append((player, idx, sign))
            prev_wait = False
        else:
            raise ValidationError(f"{player} strategy returned malformed move {move!r}")
        trace.append(_max_abs_prefix(state.values, state.colors))
        state.to_move = MAKER if player == BREAKER else BREAKER
    # replay check: history must reproduce the final coloring
    replay = [0] * state.n
    for _, idx, sign in state.history:
        if idx is not None:
            if replay[idx] != 0:
                raise InternalCheckError("history colored an element twice")
            replay[idx] = sign
    if replay != state.colors:
        raise InternalCheckError("history does not replay to the final state")
    return state, trace


# ---------------------------------------------------------------------------
# Pairing machinery (shared by the maker strategy and the two-system colorers)
# ---------------------------------------------------------------------------


class PairingGame:
    """Robust pairing logic over an ordered subset of shared elements.

    ``elements`` are global ids in game order; ``entries`` their (nonzero)
    values.  The strategy works in sign-normalized space: element e with
    entry x behaves like value |x| colored eps*sgn(x).  Pairs are consecutive
    element pairs; an odd trailing element is ignored (colored greedily only
    when it is the last one left, costing at most 1 in the bound).
    """

    def __init__(self, elements: list[int], entries: list):
        self.elements = list(elements)
        self.entry = {e: Fraction(v) for e, v in zip(elements, entries)}
        self.sgn = {e: (1 if self.entry[e] >= 0 else -1) for e in elements}
        npairs = len(self.elements) // 2
        self.pairs = [(self.elements[2 * q], self.elements[2 * q + 1]) for q in range(npairs)]

    def respond(self, colors) -> Optional[tuple[int, int]]:
        """Next pairing move given the shared coloring, or None if all colored.

        Half-colored pairs are completed first (the last such pair when there
        are several); otherwise the first uncolored element is colored
        greedily against the current prefix sum.
        """
        half = None
        for a, b in self.pairs:
            ca, cb = colors[a], colors[b]
            if (ca == 0) != (cb == 0):
                half = (a, b)
        if half is not None:
            a, b = half
            colored, open_ = (a, b) if colors[b] == 0 else (b, a)
            norm = colors[colored] * self.sgn[colored]
            return open_, -norm * self.sgn[open_]
        prefix = Fraction(0)
        for e in self.elements:
            if colors[e] == 0:
                norm = 1 if prefix < 0 else -1
                return e, norm * self.sgn[e]
            prefix += colors[e] * self.entry[e]
        return None

    def prefix_peak(self, colors) -> Fraction:
        run = Fraction(0)
        peak = Fraction(0)
        for e in self.elements:
            if colors[e]:
                run += colors[e] * self.entry[e]
            peak = max(peak, abs(run))
        return peak


class PairingMaker:
    """The robust pairing maker.  Certified discrepancy at most 4 on +-1 values.

    With ``allow_fractional`` the same pairing heuristic runs on arbitrary
    nonzero values in [-1, 1] (used in hard-instance tournaments); no bound is
    claimed there.
    """

    def __init__(self, allow_fractional: bool = False):
        self.allow_fractional = allow_fractional

    def move(self, state: GameState) -> tuple:
        if not self.allow_fractional:
            for v in state.values:
                if v not in (-1, 1):
                    raise ValidationError(f"pairing maker requires +-1 values, got {v}")
        game = PairingGame(list(range(state.n)), list(state.values))
        mv = game.respond(state.colors)
        if mv is None:
            return WAIT
        return color_move(*mv)


def maker_pairing_move(state: GameState) -> tuple:
    """Single pairing-maker move on +-1 values (functional facade)."""
    return PairingMaker().move(state)


class GreedyMaker:
    """Colors the first uncolored element with the sign that minimizes the
    resulting max |prefix| over the partial coloring; tie -> +1."""

    def move(self, state: GameState) -> tuple:
        for i in range(state.n):
            if state.colors[i] != 0:
                continue
            best = None
            for sign in (1, -1):
                trial = list(state.colors)
                trial[i] = sign
                peak = _max_abs_prefix(state.values, trial)
                if best is None or peak < best[0]:
                    best = (peak, sign)
            return color_move(i, best[1])
        return WAIT


class RandomBreaker:
    """Uniform random coloring moves; waits with probability `wait_prob` when legal."""

    def __init__(self, seed: int, wait_prob: float = 0.0):
        import random

        self.rng = random.Random(seed)
        self.wait_prob = wait_prob

    def move(self, state: GameState) -> tuple:
        open_ = state.uncolored()
        if not open_:
            return WAIT
        if (
            not state.must_color
            and state.wait_allowed[BREAKER]
            and self.rng.random() < self.wait_prob
        ):
            return WAIT
        idx = self.rng.choice(open_)
        sign = self.rng.choice((-1, 1))
        return color_move(idx, sign)


def interleave_pairing_colorings(n, games_a, games_b, dim_a, dim_b, colors) -> None:
    """Alternate two families of pairing games until every element is colored.

    ``games_a``/``games_b`` map a dimension key to ``[(element, entry), ...]``
    in game order; ``dim_a``/``dim_b`` give each element's dimension on that
    side (None = the element does not participate on that side).  Side A
    guards the per-dimension prefixes of its entries, side B of its own; each
    responds in the dimension of the opponent's last move, falling back to a
    proactive move on the first uncolored element.
    """
    built_a = {d: PairingGame([e for e, _ in lst], [v for _, v in lst]) for d, lst in games_a.items()}
    built_b = {d: PairingGame([e for e, _ in lst], [v for _, v in lst]) for d, lst in games_b.items()}
    sides = {"a": (built_a, dim_a), "b": (built_b, dim_b)}
    turn = "a"
    last_elem: Optional[int] = None
    while any(c == 0 for c in colors):
        games, dims = sides[turn]
        move = None
        if last_elem is not None and dims[last_elem] is not None:
            move = games[dims[last_elem]].respond(colors)
        if move is None:
            e0 = next(i for i in range(n) if colors[i] == 0)
            if dims[e0] is None:
                move = (e0, 1)
            else:
                move = games[dims[e0]].respond(colors)
                assert move is not None
        elem, sign = move
        assert colors[elem] == 0
        colors[elem] = sign
        last_elem = elem
        turn = "b" if turn == "a" else "a"


def color_two_permutation(values, sigma) -> list[int]:
    """Color values so both the identity and the sigma-order prefixes stay small.

    On values in {-1, 0, +1} both prefix systems are bounded by 4 (zeros are
    colored +1 and do not participate).
    """
    values = [Fraction(v) for v in values]
    n = len(values)
    if sorted(sigma) != list(range(n)):
        raise ValidationError("sigma is not a permutation of range(n)")
    nz = [i for i in range(n) if values[i] != 0]
    order_b = [sigma[k] for k in range(n) if values[sigma[k]] != 0]
    colors = [0] * n
    for i in range(n):
        if values[i] == 0:
            colors[i] = 1
    if nz:
        interleave_pairing_colorings(
            n=n,
            games_a={0: [(i, values[i]) for i in nz]},
            games_b={0: [(i, values[i]) for i in order_b]},
            dim_a=[0 if values[i] != 0 else None for i in range(n)],
            dim_b=[0 if values[i] != 0 else None for i in range(n)],
            colors=colors,
        )
    return colors


def permutation_prefix_peaks(values, sigma, colors) -> tuple[Fraction, Fraction]:
    """Max |prefix| of the identity system and of the sigma system."""
    values = [Fraction(v) for v in values]
    n = len(values)

    def peak(order):
        run = Fraction(0)
        best = Fraction(0)
        for i in order:
            run += colors[i] * values[i]
            best = max(best, abs(run))
        return best

    return peak(range(n)), peak(sigma)


# ---------------------------------------------------------------------------
# Exhaustive adversary
# ---------------------------------------------------------------------------


def exhaustive_breaker_value(values, maker, starter=BREAKER, allow_wait=True, limit=12) -> Fraction:
    """Best payoff (max-over-time prefix discrepancy) a perfect breaker forces.

    The maker plays the supplied strategy, which must be a pure function of
    (values, colors).  Payoff counts every intermediate position, so the value
    of a state is its own discrepancy joined with the best continuation.
    """
    values = tuple(Fraction(v) for v in values)
    n = len(values)
    if n > limit:
        raise ValidationError(f"n = {n} exceeds exhaustive search limit {limit}")
    memo: dict = {}

    def disc_of(colors) -> Fraction:
        return _max_abs_prefix(values, colors)

    def state_for(colors, to_move) -> GameState:
        return GameState(
            values=values,
            colors=list(colors),
            to_move=to_move,
            wait_allowed={MAKER: False, BREAKER: allow_wait},
        )

    def visit(colors: tuple, to_move: str) -> Fraction:
        key = (colors, to_move)
        if key in memo:
            return memo[key]
        here = disc_of(colors)
        if all(colors):
            memo[key] = here
            return here
        if to_move == MAKER:
            move = maker.move(state_for(colors, MAKER))
            if move[0] != "color":
                raise ValidationError("maker strategy must color while elements remain")
            _, idx, sign = move
            nxt = list(colors)
            assert nxt[idx] == 0
            nxt[idx] = sign
            val = max(here, visit(tuple(nxt), BREAKER))
        else:
            val = here
            for idx in range(n):
                if colors[idx]:
                    continue
                for sign in (-1, 1):
                    nxt = list(colors)
                    nxt[idx] = sign
                    val = max(val, visit(tuple(nxt), MAKER))
            if allow_wait:
                val = max(val, visit(colors, MAKER))
        memo[key] = val
        return val

    return visit((0,) * n, starter)


# ---------------------------------------------------------------------------
# Hard instances and the tree breaker
# ---------------------------------------------------------------------------


@dataclass
class TreeShape:
    """Preorder layout of the complete k^2-ary tree of value layers."""

    k: int
    layer: list[int]
    parent: list[Optional[int]]
    children: list[list[int]]
    subtree_size: list[int]
    child_rank: list[int]  # 1-based rank among siblings; root has rank 1

    def next_sib(self, i: int) -> Optional[int]:
        p = self.parent[i]
        if p is None:
            return None
        sibs = self.children[p]
        r = self.child_rank[i]
        return sibs[r] if r < len(sibs) else None

    def first_child(self, i: int) -> Optional[int]:
        return self.children[i][0] if self.children[i] else None

    def value(self, i: int) -> Fraction:
        return 1 - Fraction(self.layer[i], self.k)


def build_hard_tree(k: int) -> TreeShape:
    if k < 2 or k % 2 != 0:
        raise ValidationError(f"k must be even and >= 2, got {k}")
    size = sum((k * k) ** d for d in range(k // 2))
    if size > 10 ** 6:
        raise ValidationError(f"hard instance for k = {k} has {size} elements; too large")
    depth_max = k // 2 - 1  # nodes exist at layers 0..depth_max
    layer: list[int] = []
    parent: list[Optional[int]] = []
    children: list[list[int]] = []
    child_rank: list[int] = []

    def emit(d: int, par: Optional[int], rank: int) -> int:
        idx = len(layer)
        layer.append(d)
        parent.append(par)
        children.append([])
        child_rank.append(rank)
        if par is not None:
            children[par].append(idx)
        if d < depth_max:
            for q in range(k * k):
                emit(d + 1, idx, q + 1)
        return idx

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10 * k + 100))
    try:
        emit(0, None, 1)
    finally:
        sys.setrecursionlimit(old_limit)
    size = [1] * len(layer)
    for i in range(len(layer) - 1, -1, -1):
        for c in children[i]:
            size[i] += size[c]
    return TreeShape(k=k, layer=layer, parent=parent, children=children,
                     subtree_size=size, child_rank=child_rank)


def breaker_hard_instance(k: int) -> list[Fraction]:
    """Values of the layered hard instance: preorder walk, layer d worth 1 - d/k."""
    tree = build_hard_tree(k)
    return [tree.value(i) for i in range(len(tree.layer))]


@dataclass
class BreakerStructure:
    """The breaker's live interval structure (indices i_0 .. i_{l+1})."""

    indices: list[int]

    @property
    def ell(self) -> int:
        return len(self.indices) - 2


def check_breaker_structure(tree: TreeShape, values, colors, structure: BreakerStructure) -> None:
    """Assert the five structural properties; raises InternalCheckError otherwise."""
    idx = structure.indices
    ell = structure.ell
    if ell < 1:
        raise InternalCheckError("structure must keep at least i_0, i_1, i_2")
    if any(not 0 <= i < len(values) for i in idx) or any(a >= b for a, b in zip(idx, idx[1:])):
        raise InternalCheckError(f"structure indices not strictly increasing: {idx}")
    # (1) interior special indices are colored +1
    for j in range(1, ell + 1):
        if colors[idx[j]] != 1:
            raise InternalCheckError(f"special index i_{j}={idx[j]} not colored +1")
    gap_sums = []
    for j in range(ell + 1):
        u = Fraction(0)
        for e in range(idx[j] + 1, idx[j + 1]):
            if colors[e] == 0:
                # (2) uncolored gap elements strictly smaller than the gap's left anchor
                if values[e] >= values[idx[j]]:
                    raise InternalCheckError(
                        f"uncolored {e} (value {values[e]}) not below anchor i_{j}"
                    )
            else:
                u += colors[e] * values[e]
        # (3) each gap's colored mass is nonnegative
        if u < 0:
            raise InternalCheckError(f"gap {j} has negative colored mass {u}")
        gap_sums.append(u)
    # (4) the working subtrees are untouched
    last = idx[-2]
    base = last + 1
    for e in range(base, last + tree.subtree_size[last]):
        if colors[e] != 0:
            raise InternalCheckError(f"subtree of i_l contains colored element {e}")
    s = tree.next_sib(last)
    while s is not None:
        for e in range(s, s + tree.subtree_size[s]):
            if colors[e] != 0:
                raise InternalCheckError(f"sibling subtree at {s} contains colored element {e}")
        s = tree.next_sib(s)
    # (5) the frontier index is shallow enough and the mass matches its child rank
    frontier = idx[-1]
    if values[frontier] < 1 - Fraction(ell, tree.k):
        raise InternalCheckError(
            f"frontier value {values[frontier]} below 1 - l/k = {1 - Fraction(ell, tree.k)}"
        )
    j_rank = tree.child_rank[frontier]
    total = sum(gap_sums, Fraction(0))
    if total < Fraction(j_rank - 2, tree.k):
        raise InternalCheckError(
            f"gap mass {total} below (j-2)/k = {Fraction(j_rank - 2, tree.k)}"
        )


class TreeBreaker:
    """Breaker strategy for hard instances; asserts its invariants every move.

    Builds the interval structure while the tree has room (cases: merge a gap
    the maker touched, or descend one layer), then freezes the achieved
    interval and keeps reinforcing the larger of its two boundary prefixes by
    coloring the largest remaining element inside it.

    The structural guarantees assume the breaker moves first.
    """

    def __init__(self, k: int):
        self.tree = build_hard_tree(k)
        self.values = [self.tree.value(i) for i in range(len(self.tree.layer))]
        self.structure: Optional[BreakerStructure] = None
        self.phase = "open"
        self.claim: Optional[tuple[int, int]] = None  # (i_0, i_{l+1}) frozen at endgame
        self.checked_moves = 0  # build-phase moves that passed the invariant check
        self._seen_history = 0

    # -- helpers ----------------------------------------------------------
    def _opponent_moves(self, state: GameState) -> list[Optional[int]]:
        moves = []
        for player, idx, _ in state.history[self._seen_history:]:
            if player != BREAKER:
                moves.append(idx)
        self._seen_history = len(state.history) + 1  # +1 accounts for our reply
        return moves

    def _color(self, state: GameState, idx: int, sign: int) -> tuple:
        return color_move(idx, sign)

    def _maintenance_move(self, state: GameState) -> tuple:
        lo, hi = self.claim
        prefix = Fraction(0)
        pref_lo = Fraction(0)
        for e in range(hi):
            if state.colors[e]:
                prefix += state.colors[e] * state.values[e]
            if e == lo:
                pref_lo = prefix
        # reinforce whichever boundary prefix is further from zero
        if abs(pref_lo) > abs(prefix):
            target, total = lo, pref_lo
        else:
            target, total = hi - 1, prefix
        sign = 1 if total >= 0 else -1
        open_ = [e for e in range(target + 1) if state.colors[e] == 0]
        if open_:
            pick = max(open_, key=lambda e: (self.values[e], -e))
            return self._color(state, pick, sign)
        # claimed prefix exhausted: keep pushing the achieved deviation by
        # coloring the heaviest remaining element in the same direction
        rest = state.uncolored()
        if not rest:
            return WAIT
        pick = max(rest, key=lambda e: (self.values[e], -e))
        return self._color(state, pick, sign)

    def _enter_maintenance(self, idx: list[int]) -> None:
        self.phase = "maintain"
        self.claim = (idx[0], idx[-1])

    # -- main move --------------------------------------------------------
    def move(self, state: GameState) -> tuple:
        if list(state.values) != self.values:
            raise ValidationError("tree breaker bound to a different hard instance")
        opp = self._opponent_moves(state)
        if self.phase == "maintain":
            return self._maintenance_move(state)
        if self.phase == "open":
            self.phase = "build"
            root = 0
            i1 = self.tree.first_child(root)
            if i1 is None:  # k = 2: the instance is the lone root
                self._enter_maintenance([0, 0, 1])
                self.claim = (0, 1)
                if state.colors[0] == 0:
                    return self._color(state, 0, 1)
                return self._maintenance_move(state)
            while i1 is not None and state.colors[i1] != 0:
                i1 = self.tree.next_sib(i1)  # defensive: opponent moved first
            i2 = self.tree.next_sib(i1)
            self.structure = BreakerStructure(indices=[root, i1, i2])
            mv = self._color(state, i1, 1)
            self._assert_after(state, mv)
            return mv

        idx = self.structure.indices
        ell = self.structure.ell
        last_opp = opp[-1] if opp else None
        gap_t = None
        if last_opp is not None:
            for t in range(1, ell + 1):
                if idx[t] < last_opp < idx[t + 1]:
                    gap_t = t
                    break
        if gap_t is not None:
            # merge the touched gap leftward, advance the frontier one sibling
            ns = self.tree.next_sib(idx[-1])
            if ns is None:
                self._enter_maintenance(idx)
                return self._maintenance_move(state)
            new_idx = idx[:gap_t] + idx[gap_t + 1:] + [ns]
            self.structure = BreakerStructure(indices=new_idx)
            mv = self._color(state, new_idx[-2], 1)
            self._assert_after(state, mv)
            return mv
        # the maker did not interfere: descend one layer
        fc = self.tree.first_child(idx[-2])
        if fc is None:
            self._enter_maintenance(idx)
            return self._maintenance_move(state)
        new_idx = [idx[1] - 1] + idx[1:-1] + [fc, self.tree.next_sib(fc)]
        self.structure = BreakerStructure(indices=new_idx)
        mv = self._color(state, fc, 1)
        self._assert_after(state, mv)
        return mv

    def _assert_after(self, state: GameState, mv: tuple) -> None:
        colors = list(state.colors)
        _, idx, sign = mv
        colors[idx] = sign
        check_breaker_structure(self.tree, self.values, colors, self.structure)
        self.checked_moves += 1


def breaker_tree_move(state: GameState, breaker: TreeBreaker) -> tuple:
    """Single tree-breaker move (functional facade over the stateful strategy)."""
    return breaker.move(state)
