"""Wick pairings of harmonic-coefficient products and exact diagram sums.

A moment of a product of bispectrum estimators expands, by the diagram
formula for Gaussian vectors, into a sum over perfect matchings ("diagrams")
of an index set with one row per estimator factor and one column slot per
harmonic coefficient.  This module enumerates and classifies those diagrams
and evaluates each diagram's m-sum exactly enough to serve as the brute-force
oracle against which every closed-form moment in :mod:`sphbispec.bispectrum`
is checked.

Individual m-terms are products of square roots of rationals, which are not
closed under addition, so diagram sums are accumulated in arbitrary-precision
decimals (60 significant digits by default) built from exact
:class:`~sphbispec.wigner.SignedSqrtRational` 3j values.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from decimal import Decimal, localcontext
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

from .wigner import wigner3j

__all__ = [
    "BudgetExceededError",
    "IndexSet",
    "Diagram",
    "DiagramFlags",
    "TripleAssignment",
    "enumerate_pairings",
    "classify",
    "evaluate_diagram",
    "moment_by_diagram_sum",
    "moment_breakdown",
    "kappa_u_by_connected_sum",
]

Slot = tuple[int, int]
Edge = tuple[Slot, Slot]


class BudgetExceededError(RuntimeError):
    """Raised when a diagram evaluation visits more m-nodes than allowed."""


@dataclass(frozen=True)
class IndexSet:
    """Rows of column slots; slot (r, c) is column c of row r."""

    row_sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "row_sizes", tuple(self.row_sizes))
        if not self.row_sizes:
            raise ValueError("index set needs at least one row")
        if any(q < 1 for q in self.row_sizes):
            raise ValueError("every row must have at least one slot")

    @property
    def total_slots(self) -> int:
        return sum(self.row_sizes)

    def slots(self) -> list[Slot]:
        return [(r, c) for r, q in enumerate(self.row_sizes) for c in range(q)]


@dataclass(frozen=True)
class Diagram:
    """A perfect matching of an index set's slots.

    ``edges`` is kept in canonical form (each edge sorted, edges sorted);
    classification flags are exposed as properties that delegate to the
    cached :func:`classify`, so they can never drift out of sync with the
    edge list.
    """

    row_sizes: tuple[int, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "row_sizes", tuple(self.row_sizes))
        object.__setattr__(
            self, "edges", tuple(tuple(sorted(e)) for e in self.edges)
        )
        if list(self.edges) != sorted(self.edges):
            object.__setattr__(self, "edges", tuple(sorted(self.edges)))
        covered = [s for e in self.edges for s in e]
        expected = IndexSet(self.row_sizes).slots()
        if sorted(covered) != expected or len(covered) != len(set(covered)):
            raise ValueError("edges do not form a perfect matching of the slots")

    @property
    def has_flat_edge(self) -> bool:
        return classify(self).has_flat_edge

    @property
    def is_paired(self) -> bool:
        return classify(self).is_paired

    @property
    def is_connected(self) -> bool:
        return classify(self).is_connected

    @property
    def min_loop_order(self) -> float:
        return classify(self).min_loop_order

    @property
    def components(self) -> tuple[tuple[int, ...], ...]:
        return classify(self).components


class DiagramFlags(NamedTuple):
    has_flat_edge: bool
    is_paired: bool
    is_connected: bool
    min_loop_order: float  # 1 for flat edges, girth otherwise, inf for forests
    components: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class TripleAssignment:
    """One multipole triple per row: column c of row r carries triples[r][c]."""

    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "triples", tuple(tuple(t) for t in self.triples)
        )
        for t in self.triples:
            if len(t) != 3:
                raise ValueError(f"each row needs exactly 3 multipoles, got {t}")
            if any(not isinstance(l, int) or l < 0 for l in t):
                raise ValueError(f"multipoles must be nonnegative integers, got {t}")


def enumerate_pairings(index_set: IndexSet) -> Iterator[Diagram]:
    """Yield every perfect matching exactly once, lexicographically.

    The smallest unmatched slot is always matched next, so the stream order
    is deterministic; the total count is (2k)!/(k! 2^k) for 2k slots.
    """
    slots = index_set.slots()
    if len(slots) % 2:
        raise ValueError("odd slot count admits no perfect matching")
    row_sizes = index_set.row_sizes
    acc: list[Edge] = []

    def rec(unmatched: list[Slot]) -> Iterator[Diagram]:
        if not unmatched:
            yield Diagram(row_sizes, tuple(acc))
            return
        s0 = unmatched[0]
        for i in range(1, len(unmatched)):
            acc.append((s0, unmatched[i]))
            yield from rec(unmatched[1:i] + unmatched[i + 1 :])
            acc.pop()

    yield from rec(slots)


@lru_cache(maxsize=1 << 18)
def classify(d: Diagram) -> DiagramFlags:
    """Recompute all structural flags of a diagram from its edge list."""
    n_rows = len(d.row_sizes)
    cross = [(a[0], b[0]) for a, b in d.edges if a[0] != b[0]]
    has_flat = len(cross) != len(d.edges)

    # connected components of the row multigraph (isolated rows can only
    # occur when a row's slots are matched entirely among themselves)
    parent = list(range(n_rows))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for r, s in cross:
        parent[find(r)] = find(s)
    comp_map: dict[int, list[int]] = {}
    for r in range(n_rows):
        comp_map.setdefault(find(r), []).append(r)
    components = tuple(tuple(sorted(c)) for c in sorted(comp_map.values()))

    if has_flat:
        min_loop = 1.0
    else:
        multiplicity = Counter(frozenset(e) for e in cross)
        if any(v >= 2 for v in multiplicity.values()):
            min_loop = 2.0
        else:
            min_loop = _girth(n_rows, cross)

    return DiagramFlags(
        has_flat_edge=has_flat,
        is_paired=not has_flat and all(len(c) == 2 for c in components),
        is_connected=len(components) == 1,
        min_loop_order=min_loop,
        components=components,
    )


def _girth(n_rows: int, cross: list[tuple[int, int]]) -> float:
    """Shortest cycle length of a simple graph (inf for forests)."""
    adj: dict[int, set[int]] = {r: set() for r in range(n_rows)}
    for r, s in cross:
        adj[r].add(s)
        adj[s].add(r)
    best = math.inf
    for start in range(n_rows):
        dist = {start: 0}
        parent = {start: -1}
        queue = [start]
        for u in queue:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    queue.append(v)
                elif parent[u] != v:
                    best = min(best, dist[u] + dist[v] + 1)
    return best


# --------------------------------------------------------------------------
# diagram evaluation
# --------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _threej_table(triple: tuple[int, int, int], digits: int) -> dict[Slot, Decimal]:
    """Nonzero 3j(l1,l2,l3; m1,m2,-m1-m2) values keyed by (m1, m2)."""
    l1, l2, l3 = triple
    table: dict[Slot, Decimal] = {}
    for m1 in range(-l1, l1 + 1):
        for m2 in range(max(-l2, -l3 - m1), min(l2, l3 - m1) + 1):
            v = wigner3j(l1, l2, l3, m1, m2, -m1 - m2)
            if not v.is_zero():
                table[(m1, m2)] = v.to_decimal(digits + 10)
    return table


def _row_candidates(triple, fixed, flat_pair, table):
    """Admissible (m0, m1, m2) for one row under slot constraints.

    ``fixed`` maps column index to a forced m value; ``flat_pair`` is an
    optional intra-row edge (ca, cb) imposing m_cb = -m_ca.  The zero-sum
    constraint of the 3j symbol removes one degree of freedom, so at most
    two nested loops remain.
    """
    l0, l1, l2 = triple
    fixed = dict(fixed)
    if flat_pair is not None:
        ca, cb = flat_pair
        if ca in fixed and cb not in fixed:
            fixed[cb] = -fixed[ca]
        elif cb in fixed and ca not in fixed:
            fixed[ca] = -fixed[cb]
        elif ca in fixed and cb in fixed and fixed[ca] != -fixed[cb]:
            return
        elif ca not in fixed and cb not in fixed:
            # the third slot is then pinned to zero by the m-sum rule
            cc = 3 - ca - cb
            mc = fixed.get(cc, 0)
            if mc != 0:
                return
            bound = min(triple[ca], triple[cb])
            for ma in range(-bound, bound + 1):
                m = [0, 0, 0]
                m[ca], m[cb], m[cc] = ma, -ma, 0
                yield tuple(m)
            return

    free = [c for c in range(3) if c not in fixed]
    if len(free) == 0:
        if sum(fixed.values()) == 0:
            yield (fixed[0], fixed[1], fixed[2])
    elif len(free) == 1:
        c = free[0]
        m = [0, 0, 0]
        for k, v in fixed.items():
            m[k] = v
        m[c] = -sum(fixed.values())
        if abs(m[c]) <= triple[c]:
            yield tuple(m)
    elif len(free) == 2:
        ca, cb = free
        cc = 3 - ca - cb
        mc = fixed[cc]
        for ma in range(-triple[ca], triple[ca] + 1):
            mb = -mc - ma
            if abs(mb) <= triple[cb]:
                m = [0, 0, 0]
                m[ca], m[cb], m[cc] = ma, mb, mc
                yield tuple(m)
    else:
        for (m0, m1) in table:
            yield (m0, m1, -m0 - m1)


def evaluate_diagram(
    d: Diagram,
    L: TripleAssignment,
    *,
    digits: int = 60,
    budget: int = 10**8,
) -> Decimal:
    """Exact-accumulated diagram sum D(gamma; L).

    Sums, over all m-assignments admitted by the matching, the product over
    rows of 3j(l_r1 l_r2 l_r3; m_r1 m_r2 m_r3) times the edge factor
    (-1)^m delta_{m,-m'} delta_{l,l'}.  Only a spanning set of free m's is
    walked: each row's third m is fixed by the zero-sum rule and edges
    propagate forced values row to row.

    Raises :class:`BudgetExceededError` after visiting more than ``budget``
    m-nodes.
    """
    if any(q != 3 for q in d.row_sizes):
        raise ValueError("diagram evaluation requires rows of exactly 3 columns")
    if len(L.triples) != len(d.row_sizes):
        raise ValueError("triple assignment does not match the diagram's rows")

    for (r, c), (s, k) in d.edges:
        if L.triples[r][c] != L.triples[s][k]:
            return Decimal(0)  # the edge's multipole delta kills every term

    n_rows = len(d.row_sizes)
    cross = [e for e in d.edges if e[0][0] != e[1][0]]
    flat_pair: dict[int, tuple[int, int]] = {}
    for (r, c), (s, k) in d.edges:
        if r == s:
            flat_pair[r] = (c, k)

    # breadth-first row order per component so forced m's flow forward
    adj: dict[int, set[int]] = {r: set() for r in range(n_rows)}
    for (r, _), (s, _) in cross:
        adj[r].add(s)
        adj[s].add(r)
    order: list[int] = []
    seen: set[int] = set()
    for start in range(n_rows):
        if start in seen:
            continue
        seen.add(start)
        queue = [start]
        for u in queue:
            order.append(u)
            for v in sorted(adj[u]):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    position = {r: i for i, r in enumerate(order)}

    # for each row: edges it completes (to earlier rows or flat) carry the
    # (-1)^m phase at this row's endpoint; edges to later rows force values
    forces: dict[int, list[tuple[int, Slot]]] = {r: [] for r in range(n_rows)}
    phase_cols: dict[int, list[int]] = {r: [] for r in range(n_rows)}
    for (r, c), (s, k) in cross:
        if position[r] > position[s]:
            (r, c), (s, k) = (s, k), (r, c)
        forces[r].append((c, (s, k)))   # row r fixed first, forces (s, k)
        phase_cols[s].append(k)         # phase applied when edge completes
    for r, (c, _k) in flat_pair.items():
        phase_cols[r].append(c)

    tables = {r: _threej_table(L.triples[r], digits) for r in range(n_rows)}
    visited = 0

    def row_sum(pos: int, forced: dict[Slot, int]) -> Decimal:
        nonlocal visited
        r = order[pos]
        triple = L.triples[r]
        table = tables[r]
        fixed = {c: forced[(r, c)] for c in range(3) if (r, c) in forced}
        total = Decimal(0)
        for m in _row_candidates(triple, fixed, flat_pair.get(r), table):
            visited += 1
            if visited > budget:
                raise BudgetExceededError(
                    f"diagram m-sum exceeded the budget of {budget} nodes"
                )
            value = table.get((m[0], m[1]))
            if value is None:
                continue
            if sum(m[c] for c in phase_cols[r]) % 2:
                value = -value
            if pos + 1 == n_rows:
                total += value
                continue
            for c, slot in forces[r]:
                forced[slot] = -m[c]
            total += value * row_sum(pos + 1, forced)
            for _, slot in forces[r]:
                del forced[slot]
        return total

    with localcontext() as ctx:
        ctx.prec = digits + 10
        result = row_sum(0, {})
    with localcontext() as ctx:
        ctx.prec = digits
        return +result


# --------------------------------------------------------------------------
# moment oracle
# --------------------------------------------------------------------------


def _weighted_matchings(rows: list[tuple[int, int, int]]) -> Iterator[tuple[tuple[Edge, ...], int]]:
    """Orbit representatives of matchings under permutations of equal rows.

    Rows carrying the same triple and not yet holding any matched slot are
    interchangeable, so when the smallest unmatched slot picks a partner in
    such a group it suffices to take the group's smallest untouched row and
    weight the branch by the number of untouched rows (the current slot's
    own row excluded).  Summing weights over the yielded representatives
    reproduces the full matching count exactly.
    """
    n_rows = len(rows)
    groups: dict[tuple[int, int, int], list[int]] = {}
    for r, t in enumerate(rows):
        groups.setdefault(t, []).append(r)

    slot_list = [(r, c) for r in range(n_rows) for c in range(3)]
    unmatched: set[Slot] = set(slot_list)
    touched: set[int] = set()
    edges: list[Edge] = []

    def rec(weight: int) -> Iterator[tuple[tuple[Edge, ...], int]]:
        if not unmatched:
            yield tuple(sorted(edges)), weight
            return
        s0 = min(unmatched)
        r0 = s0[0]
        partners: list[tuple[Slot, int]] = []
        for s in sorted(unmatched):
            if s > s0 and (s[0] == r0 or s[0] in touched):
                partners.append((s, 1))
        for members in groups.values():
            candidates = [r for r in members if r not in touched and r != r0]
            if candidates:
                rep = min(candidates)
                for c in range(3):
                    partners.append(((rep, c), len(candidates)))

        unmatched.discard(s0)
        newly0 = r0 not in touched
        touched.add(r0)
        for s1, w in partners:
            unmatched.discard(s1)
            newly1 = s1[0] not in touched
            touched.add(s1[0])
            edges.append((s0, s1))
            yield from rec(weight * w)
            edges.pop()
            if newly1:
                touched.discard(s1[0])
            unmatched.add(s1)
        if newly0:
            touched.discard(r0)
        unmatched.add(s0)

    yield from rec(1)


def _validated_rows(
    assignments: Sequence[tuple[Sequence[int], int]]
) -> list[tuple[int, int, int]]:
    merged: dict[tuple[int, int, int], int] = {}
    for triple, power in assignments:
        t = tuple(sorted(triple))
        if len(t) != 3 or any(not isinstance(l, int) or l < 1 for l in t):
            raise ValueError(f"multipole triple must be 3 integers >= 1, got {triple}")
        if sum(t) % 2:
            raise ValueError(
                f"triple {triple} has odd multipole sum; the normalized "
                "bispectrum's parity phase is undefined there"
            )
        if not isinstance(power, int) or power < 0:
            raise ValueError(f"power must be a nonnegative integer, got {power}")
        merged[t] = merged.get(t, 0) + power
    rows: list[tuple[int, int, int]] = []
    for t, n in sorted(merged.items()):
        rows.extend([t] * n)
    return rows


def moment_breakdown(
    assignments: Sequence[tuple[Sequence[int], int]],
    *,
    budget: int = 10**8,
    digits: int = 60,
) -> dict:
    """Moment oracle with a per-classification breakdown.

    ``assignments`` lists (triple, power) factors of E[prod I^power]; powers
    are the literal exponents, so an odd total gives an exactly zero moment.
    Returns a dict with the total ``value`` plus diagram counts and partial
    sums keyed by class (flat / paired / connected_nonpaired / mixed).
    Diagrams with a flat edge are counted but not evaluated: their m-sums
    vanish identically (a separately tested invariant).
    """
    rows = _validated_rows(assignments)
    if not rows:
        raise ValueError("assignments contribute no estimator factors")
    classes = {
        name: {"count": 0, "value": Decimal(0)}
        for name in ("flat", "paired", "connected_nonpaired", "mixed")
    }
    out = {"rows": len(rows), "total_diagrams": 0, "classes": classes, "value": Decimal(0)}
    if (3 * len(rows)) % 2:
        return out

    L = TripleAssignment(tuple(rows))
    row_sizes = (3,) * len(rows)
    total = Decimal(0)
    with localcontext() as ctx:
        ctx.prec = digits + 10
        for edges, weight in _weighted_matchings(rows):
            d = Diagram(row_sizes, edges)
            flags = classify(d)
            if flags.has_flat_edge:
                name = "flat"
                value = Decimal(0)
            else:
                if flags.is_paired:
                    name = "paired"
                elif flags.is_connected:
                    name = "connected_nonpaired"
                else:
                    name = "mixed"
                value = evaluate_diagram(d, L, digits=digits, budget=budget)
            classes[name]["count"] += weight
            classes[name]["value"] += weight * value
            out["total_diagrams"] += weight
            total += weight * value
    with localcontext() as ctx:
        ctx.prec = digits
        out["value"] = +total
        for entry in classes.values():
            entry["value"] = +entry["value"]
    return out


def moment_by_diagram_sum(
    assignments: Sequence[tuple[Sequence[int], int]],
    *,
    budget: int = 10**8,
    digits: int = 60,
) -> Decimal:
    """E[prod_i I_{t_i}^{n_i}] by brute-force summation over all diagrams.

    Each (triple, n) factor contributes n rows of 3 slots; the moment is the
    sum of :func:`evaluate_diagram` over every perfect matching (odd total
    exponent: no matching exists and the moment is exactly 0).
    """
    return moment_breakdown(assignments, budget=budget, digits=digits)["value"]


def kappa_u_by_connected_sum(
    triple: Sequence[int],
    u: int,
    *,
    budget: int = 10**8,
    digits: int = 60,
) -> Decimal:
    """Cumulant-type sum over connected diagrams on u rows of one triple.

    u must be even and at least 4: the connected 2-row diagrams are the
    paired baseline of the variance, not a cumulant correction.
    """
    if not isinstance(u, int) or u % 2 or u < 4:
        raise ValueError("u must be an even integer >= 4")
    rows = _validated_rows([(triple, u)])
    L = TripleAssignment(tuple(rows))
    row_sizes = (3,) * u
    with localcontext() as ctx:
        ctx.prec = digits + 10
        total = Decimal(0)
        for edges, weight in _weighted_matchings(rows):
            d = Diagram(row_sizes, edges)
            flags = classify(d)
            if not flags.is_connected or flags.has_flat_edge:
                continue
            total += weight * evaluate_diagram(d, L, digits=digits, budget=budget)
    with localcontext() as ctx:
        ctx.prec = digits
        return +total
