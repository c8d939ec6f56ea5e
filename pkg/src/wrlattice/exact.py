"""Exhaustive enumeration on small tori, counting oracles and strip transfer matrices.

Two independent enumeration routes are provided:

* the colored route walks every admissible colored configuration by
  backtracking (guarded at ``(q+1)^v <= 1e8``);
* the occupation route walks all ``2^v`` occupation patterns (``v <= 24``)
  and weighs each by ``z^N q^C``, C the number of occupied clusters, which
  is the number of admissible colorings. It is valid for any q and z and
  is what the chessboard check uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numba import njit

from .lattice import (
    CORNERS,
    DIAG_OFFSETS,
    NN_OFFSETS,
    Adjacency,
    Torus,
    neighbor_table,
    plaquette_sites,
)
from .model import Configuration, ModelSpec, Variant
from .plaquette import VARIANT_CODE, Kind, PlaquetteClass, _classify_values, _to_class

MAX_STATES = 10**8
MAX_OCC_SITES = 24
MAX_TRANSFER_STATES = 4096


class CapacityError(RuntimeError):
    """Requested enumeration exceeds the configured size guard."""


class ConvergenceError(RuntimeError):
    pass


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# ---------------------------------------------------------------------------
# colored route
# ---------------------------------------------------------------------------

def _earlier_bonds(m: ModelSpec, t: Torus):
    """Per-site list of (earlier site, hard) pairs; hard means any two particles clash."""
    offs = [(o, m.variant is Variant.MOLECULAR_HC) for o in NN_OFFSETS]
    if m.variant in (Variant.SQUARE, Variant.MOLECULAR_HC):
        offs += [(o, False) for o in DIAG_OFFSETS]
    n = t.n_sites
    nbr = np.full((n, 8), -1, np.int64)
    hard = np.zeros((n, 8), np.bool_)
    cnt = np.zeros(n, np.int64)
    for s in range(n):
        x, y = t.site(s)
        seen = set()
        for (dx, dy), h in offs:
            j = t.index((x + dx, y + dy))
            if j < s and j not in seen:
                seen.add(j)
                nbr[s, cnt[s]] = j
                hard[s, cnt[s]] = h
                cnt[s] += 1
    return nbr, hard, cnt


@njit(cache=True)
def _enumerate(n, q, nbr, hard, cnt, out, fill):
    vals = np.zeros(n, np.int64)
    vals[0] = -1
    s = 0
    k = 0
    while s >= 0:
        vals[s] += 1
        if vals[s] > q:
            s -= 1
            continue
        v = vals[s]
        ok = True
        if v != 0:
            for a in range(cnt[s]):
                w = vals[nbr[s, a]]
                if w != 0 and (hard[s, a] or w != v):
                    ok = False
                    break
        if not ok:
            continue
        if s == n - 1:
            if fill:
                for j in range(n):
                    out[k, j] = vals[j]
            k += 1
        else:
            s += 1
            vals[s] = -1
    return k


@lru_cache(maxsize=16)
def _configurations(m_key, t: Torus) -> np.ndarray:
    variant, q = m_key
    m = ModelSpec(variant, 1.0, q=q)
    nbr, hard, cnt = _earlier_bonds(m, t)
    n = t.n_sites
    k = _enumerate(n, q, nbr, hard, cnt, np.empty((0, n), np.int8), False)
    out = np.empty((k, n), np.int8)
    _enumerate(n, q, nbr, hard, cnt, out, True)
    out.setflags(write=False)
    return out


def enumerate_configurations(m: ModelSpec, t: Torus) -> np.ndarray:
    """All admissible colored configurations as an int8 array ``(K, W, H)``."""
    if not m.discrete:
        raise ValueError("exhaustive enumeration needs a discrete variant")
    if (m.q + 1) ** t.n_sites > MAX_STATES:
        raise CapacityError(
            f"(q+1)^(W*H) = {m.q + 1}^{t.n_sites} exceeds the enumeration guard {MAX_STATES:.0e}"
        )
    return _configurations((m.variant, m.q), t).reshape(-1, *t.shape)


def _weighted_sum(counts_by_n: np.ndarray, z) -> Fraction:
    z = _as_fraction(z)
    return sum((int(c) * z**n for n, c in enumerate(counts_by_n) if c), Fraction(0))


def partition_function(m: ModelSpec, t: Torus) -> Fraction:
    """Exact sum of ``z^N`` over admissible configurations.

    Uses the colored route when it fits the guard and the occupation route
    (``v <= 24``) otherwise.
    """
    if not m.discrete:
        raise ValueError("partition_function needs a discrete variant")
    if (m.q + 1) ** t.n_sites <= MAX_STATES:
        cfgs = enumerate_configurations(m, t)
        n = (cfgs != 0).sum(axis=(1, 2))
        return _weighted_sum(np.bincount(n, minlength=t.n_sites + 1), m.z)
    tab = occupation_table(m.variant, t)
    return tab.weight(np.ones(len(tab.count), bool), m.q, m.z)


def event_probability(m: ModelSpec, t: Torus, predicate, vectorized: bool = False) -> Fraction:
    """Exact Gibbs probability of ``predicate``.

    ``predicate`` takes a Configuration, or with ``vectorized=True`` the
    whole ``(K, W, H)`` stack of admissible grids and returns a bool array.
    """
    cfgs = enumerate_configurations(m, t)
    if vectorized:
        hit = np.asarray(predicate(cfgs), dtype=bool)
    else:
        hit = np.fromiter(
            (bool(predicate(Configuration._trusted(m, c))) for c in cfgs), bool, len(cfgs)
        )
    n = (cfgs != 0).sum(axis=(1, 2))
    size = t.n_sites + 1
    num = _weighted_sum(np.bincount(n[hit], minlength=size), m.z)
    den = _weighted_sum(np.bincount(n, minlength=size), m.z)
    return num / den


@njit(cache=True)
def _classify_rows(vals, vcode):
    k = vals.shape[0]
    kinds = np.empty(k, np.int64)
    colors = np.empty(k, np.int64)
    for r in range(k):
        a, b = _classify_values(float(vals[r, 0]), float(vals[r, 1]), float(vals[r, 2]),
                                float(vals[r, 3]), vcode, 0.0)
        kinds[r] = a
        colors[r] = b
    return kinds, colors


def plaquette_classes(m: ModelSpec, cfgs: np.ndarray, i=(0, 0)):
    """Class codes and colors of plaquette ``i`` across a stack of grids."""
    t = Torus(*cfgs.shape[1:])
    ps = plaquette_sites(t, i)
    vals = np.stack([cfgs[:, ps[c].x, ps[c].y] for c in CORNERS], axis=1)
    return _classify_rows(vals.astype(np.int64), VARIANT_CODE[m.variant])


def _distribution(labels, n, t: Torus, z) -> dict:
    size = t.n_sites + 1
    den = _weighted_sum(np.bincount(n, minlength=size), z)
    out = {}
    for lab in sorted(set(labels), key=repr):
        sel = np.array([x == lab for x in labels])
        out[lab] = _weighted_sum(np.bincount(n[sel], minlength=size), z) / den
    return out


def site_marginal(m: ModelSpec, t: Torus, i=(0, 0)) -> dict:
    """Exact law of the state at site ``i``: ``{0: p_empty, a: p_color_a}``."""
    cfgs = enumerate_configurations(m, t)
    n = (cfgs != 0).sum(axis=(1, 2))
    x, y = t.wrap(*i)
    return _distribution(cfgs[:, x, y].tolist(), n, t, m.z)


def plaquette_class_distribution(m: ModelSpec, t: Torus, i=(0, 0)) -> dict:
    """Exact law of the class of plaquette ``i`` keyed by PlaquetteClass."""
    cfgs = enumerate_configurations(m, t)
    n = (cfgs != 0).sum(axis=(1, 2))
    kinds, colors = plaquette_classes(m, cfgs, i)
    labels = [_to_class(m, k, c) for k, c in zip(kinds.tolist(), colors.tolist())]
    return _distribution(labels, n, t, m.z)


# ---------------------------------------------------------------------------
# occupation route
# ---------------------------------------------------------------------------

def code_to_kind(variant: Variant) -> np.ndarray:
    """Class of every reflected occupation code, ignoring colors."""
    variant = Variant(variant)
    tab = np.empty(16, np.int64)
    for code in range(16):
        bits = [(code >> k) & 1 for k in range(4)]
        if variant is Variant.ROTOR:
            vals = [0.0 if b else math.nan for b in bits]
        else:
            vals = [1.0 if b else 0.0 for b in bits]
        kind, _ = _classify_values(vals[0], vals[1], vals[2], vals[3], VARIANT_CODE[variant], 0.25)
        tab[code] = kind
    return tab


@njit(cache=True)
def _scan(v, corner_idx, hard_nn, adj, adj_cnt, nn, nn_cnt, kind_of, keys):
    labels = np.empty(v, np.int64)
    queue = np.empty(v, np.int64)
    occ = np.zeros(v, np.bool_)
    for p in range(1 << v):
        n = 0
        for s in range(v):
            occ[s] = (p >> s) & 1
            n += occ[s]
        feasible = True
        if hard_nn:
            for s in range(v):
                if occ[s]:
                    for a in range(nn_cnt[s]):
                        if occ[nn[s, a]]:
                            feasible = False
                            break
                if not feasible:
                    break
        if not feasible:
            keys[p] = -1
            continue
        # clusters
        for s in range(v):
            labels[s] = -1
        c = 0
        for s in range(v):
            if occ[s] and labels[s] < 0:
                labels[s] = c
                head = 0
                tail = 1
                queue[0] = s
                while head < tail:
                    u = queue[head]
                    head += 1
                    for a in range(adj_cnt[u]):
                        w = adj[u, a]
                        if occ[w] and labels[w] < 0:
                            labels[w] = c
                            queue[tail] = w
                            tail += 1
                c += 1
        mask = 0
        k0 = 0
        for i in range(v):
            code = 0
            for k in range(4):
                if occ[corner_idx[i, k]]:
                    code |= 1 << k
            kind = kind_of[code]
            mask |= 1 << kind
            if i == 0:
                k0 = kind
        keys[p] = n | (c << 8) | (k0 << 16) | (mask << 24)


@dataclass(frozen=True)
class OccupationTable:
    """Aggregated occupation patterns: particle number, cluster count, origin class, class set."""

    torus: Torus
    n: np.ndarray
    clusters: np.ndarray
    origin: np.ndarray
    kinds_mask: np.ndarray
    count: np.ndarray

    def weight(self, select: np.ndarray, q, z) -> Fraction:
        q = int(q)
        z = _as_fraction(z)
        total = Fraction(0)
        for n, c, k in zip(self.n[select].tolist(), self.clusters[select].tolist(), self.count[select].tolist()):
            total += k * z**n * q**c
        return total

    def probability(self, select: np.ndarray, q, z) -> Fraction:
        return self.weight(select, q, z) / self.weight(np.ones(len(self.count), bool), q, z)

    def subset_of(self, kinds) -> np.ndarray:
        allowed = 0
        for k in kinds:
            allowed |= 1 << int(k)
        return (self.kinds_mask & ~allowed) == 0

    def origin_in(self, kinds) -> np.ndarray:
        return np.isin(self.origin, [int(k) for k in kinds])


def corner_index(t: Torus) -> np.ndarray:
    """Flat site index of each reflected corner of every plaquette, shape ``(v, 4)``."""
    out = np.empty((t.n_sites, 4), np.int64)
    for s in range(t.n_sites):
        ps = plaquette_sites(t, t.site(s))
        for k, c in enumerate(CORNERS):
            out[s, k] = t.index(ps[c])
    return out


@lru_cache(maxsize=16)
def occupation_table(variant: Variant, t: Torus) -> OccupationTable:
    variant = Variant(variant)
    if variant is Variant.ROTOR:
        raise ValueError("occupation enumeration needs a discrete variant")
    v = t.n_sites
    if v > MAX_OCC_SITES:
        raise CapacityError(f"2^{v} occupation patterns exceed the guard 2^{MAX_OCC_SITES}")
    spec = ModelSpec(variant, 1.0, q=1)
    adj, adj_cnt = neighbor_table(t, spec.cluster_adjacency)
    nn, nn_cnt = neighbor_table(t, Adjacency.NN)
    keys = np.empty(1 << v, np.int64)
    _scan(v, corner_index(t), variant is Variant.MOLECULAR_HC, adj, adj_cnt, nn, nn_cnt,
          code_to_kind(variant), keys)
    uniq, count = np.unique(keys[keys >= 0], return_counts=True)
    return OccupationTable(
        t,
        n=uniq & 0xFF,
        clusters=(uniq >> 8) & 0xFF,
        origin=(uniq >> 16) & 0xFF,
        kinds_mask=uniq >> 24,
        count=count,
    )


@dataclass(frozen=True)
class ChessboardResult:
    family: tuple
    lhs: float
    rhs: float
    holds: bool
    lhs_exact: Fraction = field(repr=False, default=None)
    tiling_exact: Fraction = field(repr=False, default=None)


def _kind_set(F) -> tuple:
    if isinstance(F, (Kind, PlaquetteClass, int)):
        F = {F}
    out = set()
    for f in F:
        if isinstance(f, PlaquetteClass):
            if f.color is not None:
                raise ValueError("chessboard families are color-blind; pass kinds")
            f = f.kind
        out.add(Kind(f))
    return tuple(sorted(out))


def chessboard_check(m: ModelSpec, t: Torus, F, slack: float = 1e-12) -> ChessboardResult:
    """Compare P(0 in V(F)) with P(every plaquette in F)^(1/v)."""
    kinds = _kind_set(F)
    tab = occupation_table(m.variant, t)
    lhs = tab.probability(tab.origin_in(kinds), m.q, m.z)
    tiling = tab.probability(tab.subset_of(kinds), m.q, m.z)
    rhs = float(tiling) ** (1.0 / t.n_sites)
    return ChessboardResult(kinds, float(lhs), rhs, float(lhs) <= rhs + slack, lhs, tiling)


# ---------------------------------------------------------------------------
# family counts
# ---------------------------------------------------------------------------

FAMILIES = ("GordL", "GevenL", "GoddL", "B0L", "B1L", "B2L", "B3L", "E1L", "F1L", "F2L", "F3L", "FhcL")

FAMILY_KIND = {
    "GordL": Kind.GORD, "GevenL": Kind.GEVEN, "GoddL": Kind.GODD,
    "B0L": Kind.B0, "B1L": Kind.B1, "B2L": Kind.B2, "B3L": Kind.B3,
}

FAMILY_VARIANT = {
    **{f: Variant.DIAMOND for f in FAMILY_KIND},
    "E1L": Variant.MOLECULAR_HC, "FhcL": Variant.MOLECULAR_HC,
    "F1L": Variant.SQUARE, "F2L": Variant.DIAMOND, "F3L": Variant.DIAMOND,
}


@dataclass(frozen=True)
class CountReport:
    family: str
    torus: Torus
    q: int
    formula_value: int
    exact: bool
    particle_number: int
    brute_force_value: int | None = None

    @property
    def consistent(self) -> bool | None:
        if self.brute_force_value is None:
            return None
        if self.exact:
            return self.brute_force_value == self.formula_value
        return self.brute_force_value <= self.formula_value


def _cell_shape(t: Torus, cell) -> tuple[int, int]:
    a, b = cell
    if t.width % a == 0 and t.height % b == 0:
        return a, b
    if t.width % b == 0 and t.height % a == 0:
        return b, a
    raise ValueError(f"torus {t.width}x{t.height} cannot be tiled by {a}x{b} cells")


def _formula(family: str, t: Torus, q: int) -> tuple[int, bool, int]:
    W, H, v = t.width, t.height, t.n_sites
    if family == "GordL":
        return q, True, v
    if family in ("GevenL", "GoddL"):
        return q ** (v // 2), True, v // 2
    if family == "B0L":
        return 1, True, 0
    if family == "B2L":
        return 2 * (q ** (H // 2) + q ** (W // 2)), True, v // 2
    if family == "B1L":
        return 2 * (2 ** (H // 2) + 2 ** (W // 2)) * q ** (v // 4), False, v // 4
    if family == "B3L":
        return 2 * q * (2 ** (H // 2) + 2 ** (W // 2)), False, 3 * v // 4
    if family == "E1L":
        if W % 4:
            raise ValueError(f"E1L needs W divisible by 4, got W={W}")
        return 2 * (2 * q) ** (W // 4), True, 3 * v // 8
    if family == "F1L":
        return q ** (v // 4), True, v // 4
    if family == "F2L":
        _cell_shape(t, (3, 4))
        return q ** (v // 12), True, v // 2
    if family in ("F3L", "FhcL"):
        _cell_shape(t, (8, 7))
        return q ** (v // 56), True, (3 * v // 4 if family == "F3L" else 3 * v // 8)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _plaquette_constraints(t: Torus, variant: Variant, allowed_kinds):
    kind_of = code_to_kind(variant)
    cidx = corner_index(t)
    allowed = {int(k) for k in allowed_kinds}
    cons = []
    for i in range(t.n_sites):
        sites = tuple(int(s) for s in cidx[i])

        def check(bits, sites=sites):
            code = sum(bits[s] << k for k, s in enumerate(sites))
            return int(kind_of[code]) in allowed

        cons.append((sites, check))
    return cons


def _e1_constraints(t: Torus):
    """Every horizontal double plaquette at even x has good halves of different families."""
    kind_of = code_to_kind(Variant.MOLECULAR_HC)
    cidx = corner_index(t)

    def fam(code):
        k = int(kind_of[code])
        if k in (Kind.GORD_EVEN, Kind.GORD_ODD):
            return 1
        if k == Kind.GDIS:
            return 2
        return 0

    cons = []
    for x in range(0, t.width, 2):
        for y in range(t.height):
            a = tuple(int(s) for s in cidx[t.index((x, y))])
            b = tuple(int(s) for s in cidx[t.index((x + 1, y))])

            def check(bits, a=a, b=b):
                fa = fam(sum(bits[s] << k for k, s in enumerate(a)))
                fb = fam(sum(bits[s] << k for k, s in enumerate(b)))
                return fa > 0 and fb > 0 and fa != fb

            cons.append((a + b, check))
    return cons


def _count_clusters(bits, adj, adj_cnt) -> int:
    seen = set()
    c = 0
    for s, b in enumerate(bits):
        if not b or s in seen:
            continue
        c += 1
        stack = [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            for a in range(adj_cnt[u]):
                w = int(adj[u, a])
                if bits[w] and w not in seen:
                    seen.add(w)
                    stack.append(w)
    return c


def count_patterns(t: Torus, variant: Variant, constraints, q: int) -> int:
    """Number of admissible colored configurations meeting every constraint.

    Pruned backtracking over occupations: a constraint is checked as soon
    as all of its sites are assigned; each surviving occupation pattern
    contributes ``q^C`` colorings.
    """
    variant = Variant(variant)
    n = t.n_sites
    by_last = [[] for _ in range(n)]
    for sites, check in constraints:
        by_last[max(sites)].append(check)
    nn, nn_cnt = neighbor_table(t, Adjacency.NN)
    earlier = [[int(j) for j in nn[s, : nn_cnt[s]] if j < s] for s in range(n)]
    hard = variant is Variant.MOLECULAR_HC
    adj, adj_cnt = neighbor_table(t, ModelSpec(variant, 1.0, q=1).cluster_adjacency)
    bits = [0] * n
    total = 0

    def rec(s):
        nonlocal total
        if s == n:
            total += q ** _count_clusters(bits, adj, adj_cnt)
            return
        for b in (0, 1):
            if b and hard and any(bits[j] for j in earlier[s]):
                continue
            bits[s] = b
            if all(chk(bits) for chk in by_last[s]):
                rec(s + 1)
        bits[s] = 0

    rec(0)
    return total


def family_member(family: str, t: Torus, colors=None, offset: int = 0, parities=None) -> np.ndarray:
    """A member of a block-construction family (E1L, F1L, F2L, F3L, FhcL).

    ``colors`` holds one color per independent block (per column group for
    E1L, per particle for F1L); it defaults to all 1. For E1L, ``offset``
    (0 or 2) places the empty columns and ``parities`` picks the
    even-odd-even (0) or odd-even-odd (1) layout of each column group.
    """
    W, H = t.shape
    grid = np.zeros(t.shape, np.int32)
    x, y = np.indices(t.shape)

    def color(k):
        return 1 if colors is None else int(colors[k])

    if family == "F1L":
        for k, (a, b) in enumerate(zip(*np.nonzero((x % 2 == 0) & (y % 2 == 0)))):
            grid[a, b] = color(k)
        return grid
    if family == "E1L":
        if W % 4:
            raise ValueError("E1L needs W divisible by 4")
        if offset not in (0, 2):
            raise ValueError("empty columns sit at 0 or 2 mod 4")
        for g in range(W // 4):
            par = 0 if parities is None else parities[g]
            for k in range(3):
                col = (offset + 4 * g + 1 + k) % W
                grid[col, (np.arange(H) + k + par) % 2 == 0] = color(g)
        return grid
    if family == "F2L":
        cw, ch = _cell_shape(t, (3, 4))
        bw, bh = (2, 3) if (cw, ch) == (3, 4) else (3, 2)
    elif family in ("F3L", "FhcL"):
        cw, ch = _cell_shape(t, (8, 7))
        bw, bh = (7, 6) if (cw, ch) == (8, 7) else (6, 7)
    else:
        raise ValueError(f"{family} has no block generator")
    k = 0
    for cx in range(0, W, cw):
        for cy in range(0, H, ch):
            block = (x >= cx) & (x < cx + bw) & (y >= cy) & (y < cy + bh)
            if family == "FhcL":
                block &= (x + y) % 2 == 0
            grid[block] = color(k)
            k += 1
    return grid


def family_count(family: str, t: Torus, q: int, brute_force: bool = True) -> CountReport:
    formula, exact, npart = _formula(family, t, q)
    brute = None
    if brute_force:
        variant = FAMILY_VARIANT[family]
        if family in FAMILY_KIND:
            cons = _plaquette_constraints(t, variant, {FAMILY_KIND[family]})
            brute = count_patterns(t, variant, cons, q)
        elif family == "E1L":
            brute = count_patterns(t, variant, _e1_constraints(t), q)
        else:
            # a fixed occupation pattern: count its colorings directly
            occ = family_member(family, t) != 0
            spec = ModelSpec(variant, 1.0, q=q)
            adj, adj_cnt = neighbor_table(t, spec.cluster_adjacency)
            brute = q ** _count_clusters(occ.ravel().astype(int).tolist(), adj, adj_cnt)
    return CountReport(family, t, q, formula, exact, npart, brute)


# ---------------------------------------------------------------------------
# strip transfer matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureCurve:
    z: np.ndarray
    pressure: np.ndarray
    density: np.ndarray
    entropy: np.ndarray
    width: int
    variant: Variant
    q: int


def _ring_states(q: int, W: int) -> np.ndarray:
    return np.array(np.meshgrid(*[np.arange(q + 1)] * W, indexing="ij")).reshape(W, -1).T


def _ring_ok(m: ModelSpec, rows: np.ndarray) -> np.ndarray:
    W = rows.shape[1]
    ok = np.ones(len(rows), bool)
    for x in range(W):
        a, b = rows[:, x], rows[:, (x + 1) % W]
        if (x + 1) % W == x:
            continue
        clash = (a != 0) & (b != 0)
        if m.variant is not Variant.MOLECULAR_HC:
            clash &= a != b
        ok &= ~clash
    return ok


def transfer_matrix(m: ModelSpec, W: int, z=None):
    """Symmetric row-to-row transfer matrix of a periodic strip of width W.

    Returns ``(T, n_particles)``; rows are ring states admissible on their
    own. ``Tr(T^H)`` is the partition function of the ``W x H`` torus.
    """
    if not m.discrete:
        raise ValueError("transfer matrices need a discrete variant")
    if W < 2:
        raise ValueError("strip width must be >= 2")
    if (m.q + 1) ** W > MAX_TRANSFER_STATES:
        raise CapacityError(f"(q+1)^W = {(m.q + 1) ** W} exceeds {MAX_TRANSFER_STATES}")
    rows = _ring_states(m.q, W)
    rows = rows[_ring_ok(m, rows)]
    npart = (rows != 0).sum(axis=1)
    a = rows[:, None, :]
    b = rows[None, :, :]
    occ_a, occ_b = a != 0, b != 0
    both = occ_a & occ_b
    if m.variant is Variant.MOLECULAR_HC:
        clash = both.any(axis=2)
    else:
        clash = (both & (a != b)).any(axis=2)
    if m.variant in (Variant.SQUARE, Variant.MOLECULAR_HC):
        for sh in {1 % W, (-1) % W}:
            bs = np.roll(b, -sh, axis=2)
            clash |= ((occ_a & (bs != 0)) & (a != bs)).any(axis=2)
    compat = ~clash
    zz = float(m.z if z is None else z)
    half = zz ** (npart / 2.0)
    return compat * half[:, None] * half[None, :], npart


def largest_eigenvalue(T: np.ndarray, rtol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Perron eigenvalue of a symmetric nonnegative matrix by power iteration."""
    v = np.ones(T.shape[0]) / math.sqrt(T.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = T @ v
        new = float(v @ w)
        nrm = np.linalg.norm(w)
        resid = np.linalg.norm(w - new * v) / new
        v = w / nrm
        if abs(new - lam) <= rtol * new and resid <= 1e-6:
            return new
        lam = new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def strip_pressure(m: ModelSpec, W: int, z) -> float:
    T, _ = transfer_matrix(m, W, z)
    return math.log(largest_eigenvalue(T)) / W


def transfer_pressure(m: ModelSpec, W: int, z_grid, h: float = 1e-4) -> PressureCurve:
    """Strip pressure, density (central difference in log z) and entropy on a z grid."""
    z_grid = np.asarray(z_grid, float)
    if np.any(z_grid <= 0):
        raise ValueError("activities must be positive")
    P = np.array([strip_pressure(m, W, z) for z in z_grid])
    up = np.array([strip_pressure(m, W, z * math.exp(h)) for z in z_grid])
    dn = np.array([strip_pressure(m, W, z * math.exp(-h)) for z in z_grid])
    rho = (up - dn) / (2 * h)
    s = P - rho * np.log(z_grid)
    return PressureCurve(z_grid, P, rho, s, W, m.variant, m.q)


def torus_partition_from_transfer(m: ModelSpec, W: int, H: int) -> int | float:
    """``Tr(T^H)``, exact in integers when z is an integer."""
    T, npart = transfer_matrix(m, W, 1.0)
    z = m.z
    if float(z).is_integer():
        # integer arithmetic: conjugate the sqrt weights back onto one side
        Ti = (T > 0).astype(object) * np.array([int(z) ** int(k) for k in npart], dtype=object)[None, :]
        P = np.identity(len(npart), dtype=object)
        for _ in range(H):
            P = P.dot(Ti)
        return int(np.trace(P))
    T, _ = transfer_matrix(m, W, z)
    return float(np.trace(np.linalg.matrix_power(T, H)))
