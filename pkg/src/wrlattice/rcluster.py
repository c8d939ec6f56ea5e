"""Occupation-field (site-random-cluster) representation of the colored gas.

Summing out colors leaves a law on occupation fields ``n`` with weight
``(qz)^N(n) * q^(C(n) - N(n))``, C the number of occupied clusters. Its
single-site conditionals depend on kappa, the number of distinct clusters
touching the neighborhood of the site.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .lattice import Adjacency, Torus, neighbor_table
from .sampler import make_rng

INFINITY = math.inf


@dataclass(frozen=True)
class OccupationField:
    torus: Torus
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits).astype(np.bool_)
        if b.shape != self.torus.shape:
            raise ValueError(f"field shape {b.shape} does not match torus {self.torus.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @classmethod
    def from_sites(cls, t: Torus, sites) -> "OccupationField":
        b = np.zeros(t.shape, dtype=bool)
        for x, y in sites:
            b[t.wrap(x, y)] = True
        return cls(t, b)

    def __eq__(self, other):
        return isinstance(other, OccupationField) and self.torus == other.torus and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.torus, self.bits.tobytes()))


@dataclass(frozen=True)
class RCParams:
    q: float  # integer >= 1 or math.inf
    zeta: float

    def __post_init__(self):
        if self.q != INFINITY and (int(self.q) != self.q or self.q < 1):
            raise ValueError(f"q must be a positive integer or infinity, got {self.q!r}")
        if not self.zeta > 0:
            raise ValueError(f"zeta must be > 0, got {self.zeta!r}")

    @classmethod
    def from_activity(cls, q, z) -> "RCParams":
        return cls(q, q * z)

    @property
    def infinite(self) -> bool:
        return self.q == INFINITY


@njit(cache=True, nogil=True)
def _kappa(occ, s, adj, adj_cnt, seen, queue, stamp):
    """Clusters of ``occ`` minus ``s`` that contain a neighbor of ``s``."""
    seen[s] = stamp
    k = 0
    for a in range(adj_cnt[s]):
        j = adj[s, a]
        if not occ[j] or seen[j] == stamp:
            continue
        k += 1
        seen[j] = stamp
        head = 0
        tail = 1
        queue[0] = j
        while head < tail:
            v = queue[head]
            head += 1
            for b in range(adj_cnt[v]):
                w = adj[v, b]
                if occ[w] and seen[w] != stamp:
                    seen[w] = stamp
                    queue[tail] = w
                    tail += 1
    return k


@njit(cache=True, nogil=True)
def _rc_run(occ, adj, adj_cnt, q, infinite, zeta, U, seen, queue, stamp0, trace_out):
    n = occ.shape[0]
    stamp = stamp0
    for t in range(U.shape[0]):
        for s in range(n):
            stamp += 1
            k = _kappa(occ, s, adj, adj_cnt, seen, queue, stamp)
            if infinite:
                p = zeta / (1.0 + zeta) if k == 0 else 0.0
            else:
                p = zeta / (zeta + q ** k)
            occ[s] = U[t, s] < p
        if trace_out.shape[1] > 0:
            for s in range(n):
                trace_out[t, s] = occ[s]
    return stamp


def kappa(f: OccupationField, i, k: Adjacency = Adjacency.NN) -> int:
    t = f.torus
    adj, adj_cnt = neighbor_table(t, k)
    seen = np.zeros(t.n_sites, np.int64)
    queue = np.empty(t.n_sites, np.int64)
    return int(_kappa(f.bits.ravel(), t.index(i), adj, adj_cnt, seen, queue, 1))


def rc_conditional(p: RCParams, kappa_val: int):
    """Probability that a site is occupied given kappa.

    Exact (a Fraction) when q and zeta are integers or Fractions.
    """
    if kappa_val < 0:
        raise ValueError("kappa must be >= 0")
    if p.infinite:
        if kappa_val > 0:
            return 0
        return p.zeta / (1 + p.zeta) if isinstance(p.zeta, float) else Fraction(p.zeta) / (1 + Fraction(p.zeta))
    q = int(p.q)
    if isinstance(p.zeta, float):
        return p.zeta / (p.zeta + float(q) ** kappa_val)
    zeta = Fraction(p.zeta)
    return zeta / (zeta + q ** kappa_val)


class RCChain:
    """Heat-bath chain on occupation fields, sites visited in raster order."""

    def __init__(self, p: RCParams, t: Torus, k: Adjacency = Adjacency.NN, seed: int = 0, bits=None):
        self.params = p
        self.torus = t
        self.rng = make_rng(seed)
        self.adj, self.adj_cnt = neighbor_table(t, k)
        self.occ = np.zeros(t.n_sites, np.bool_) if bits is None else np.asarray(bits, np.bool_).ravel().copy()
        self.seen = np.zeros(t.n_sites, np.int64)
        self.queue = np.empty(t.n_sites, np.int64)
        self.stamp = 0

    def _run(self, n_sweeps: int, trace: bool):
        n = self.torus.n_sites
        per = max(1, (1 << 20) // n)
        out = np.empty((n_sweeps, n if trace else 0), np.bool_)
        q = 0.0 if self.params.infinite else float(self.params.q)
        done = 0
        while done < n_sweeps:
            k = min(per, n_sweeps - done)
            U = self.rng.random((k, n))
            self.stamp = _rc_run(self.occ, self.adj, self.adj_cnt, q, self.params.infinite,
                                 float(self.params.zeta), U, self.seen, self.queue, self.stamp,
                                 out[done:done + k])
            done += k
        return out

    def advance(self, n_sweeps: int) -> "RCChain":
        self._run(int(n_sweeps), False)
        return self

    def trace(self, n_sweeps: int) -> np.ndarray:
        """Full occupation fields after each sweep, shape ``(n_sweeps, W*H)``."""
        return self._run(int(n_sweeps), True)

    @property
    def field(self) -> OccupationField:
        return OccupationField(self.torus, self.occ.reshape(self.torus.shape).copy())


def rc_sweep(p: RCParams, f: OccupationField, k: Adjacency, rng: np.random.Generator) -> OccupationField:
    t = f.torus
    adj, adj_cnt = neighbor_table(t, k)
    occ = f.bits.ravel().copy()
    U = rng.random((1, t.n_sites))
    q = 0.0 if p.infinite else float(p.q)
    _rc_run(occ, adj, adj_cnt, q, p.infinite, float(p.zeta), U,
            np.zeros(t.n_sites, np.int64), np.empty(t.n_sites, np.int64), 0,
            np.empty((1, 0), np.bool_))
    return OccupationField(t, occ.reshape(t.shape))


def colorize(f: OccupationField, q: int, k: Adjacency, rng: np.random.Generator) -> np.ndarray:
    """Give every occupied cluster an independent uniform color in 1..q."""
    from .sampler import _clusters

    t = f.torus
    adj, adj_cnt = neighbor_table(t, k)
    labels = np.empty(t.n_sites, np.int64)
    nc = _clusters(f.bits.ravel(), adj, adj_cnt, labels, np.empty(t.n_sites, np.int64))
    colors = rng.integers(1, q + 1, size=nc)
    out = np.zeros(t.n_sites, np.int32)
    occ = labels >= 0
    out[occ] = colors[labels[occ]]
    return out.reshape(t.shape)


def project(states: np.ndarray) -> np.ndarray:
    """Occupation bits of a discrete or rotor state grid."""
    states = np.asarray(states)
    if states.dtype.kind == "f":
        return ~np.isnan(states)
    return states != 0
