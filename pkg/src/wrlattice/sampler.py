"""Heat-bath and cluster-recoloring Markov chains on the torus.

Random numbers come from a seeded ``numpy.random.Generator`` (PCG64) and are
drawn in blocks: each sweep consumes ``n`` uniforms for the site updates plus
``n`` more when cluster moves are scheduled, so a run is bit-reproducible
from its seed regardless of how sweeps are batched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .lattice import Adjacency, Torus, diagonal_table, neighbor_table
from .model import (
    Configuration,
    InadmissibleConfiguration,
    ModelSpec,
    Variant,
    config_admissible,
    discrete_mode,
    empty_grid,
    forced_color,
    rotor_window,
)

GENERATOR = "numpy.PCG64"
_CHUNK = 1 << 20  # uniforms per block


@dataclass(frozen=True)
class ChainSchedule:
    burn_in_sweeps: int = 0
    measure_sweeps: int = 0
    measure_every: int = 1
    cluster_move_every: int = 0
    seed: int = 0

    def __post_init__(self):
        for name in ("burn_in_sweeps", "measure_sweeps", "cluster_move_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.measure_every < 1:
            raise ValueError("measure_every must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class InitialState:
    """How a chain's first configuration is built.

    kind is one of ``empty``, ``checkerboard-even``, ``checkerboard-odd``,
    ``monochromatic`` and ``random``. ``value`` is the color (or orientation)
    for monochromatic starts and an optional fixed color for checkerboards.
    """

    kind: str
    value: float | None = None

    KINDS = ("empty", "checkerboard-even", "checkerboard-odd", "monochromatic", "random")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown initial state {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "monochromatic" and self.value is None:
            raise ValueError("monochromatic start needs a color or orientation")

    @classmethod
    def parse(cls, text: str) -> "InitialState":
        kind, _, val = text.partition(":")
        return cls(kind.strip(), float(val) if val else None)

    def __str__(self):
        if self.value is None:
            return self.kind
        v = int(self.value) if float(self.value).is_integer() else self.value
        return f"{self.kind}:{v}"


EMPTY_INIT = InitialState("empty")
CHECKERBOARD_EVEN = InitialState("checkerboard-even")
CHECKERBOARD_ODD = InitialState("checkerboard-odd")
RANDOM_INIT = InitialState("random")


def monochromatic(a) -> InitialState:
    return InitialState("monochromatic", a)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def initial_grid(m: ModelSpec, t: Torus, init: InitialState, rng=None) -> np.ndarray:
    rng = rng if rng is not None else make_rng(0)
    grid = empty_grid(m, t)
    rotor = m.variant is Variant.ROTOR
    if init.kind == "empty":
        pass
    elif init.kind.startswith("checkerboard"):
        mask = t.parity_mask(0 if init.kind.endswith("even") else 1)
        if init.value is not None:
            grid[mask] = init.value
        elif rotor:
            grid[mask] = rng.random(int(mask.sum()))
        elif m.variant is Variant.DIAMOND:
            # no two checkerboard sites interact, so colors are free
            grid[mask] = rng.integers(1, m.q + 1, size=int(mask.sum()))
        else:
            grid[mask] = 1
    elif init.kind == "monochromatic":
        if m.variant is Variant.MOLECULAR_HC:
            raise InadmissibleConfiguration("the fully occupied configuration violates the hard core")
        grid[:] = init.value if rotor else int(init.value)
    else:
        grid = _random_fill(m, t, rng)
    if not config_admissible(m, grid):
        raise InadmissibleConfiguration(f"initial state {init} is not admissible for {m.variant.value}")
    return grid


def _random_fill(m: ModelSpec, t: Torus, rng) -> np.ndarray:
    flat = empty_grid(m, t).ravel()
    nn, nn_cnt = neighbor_table(t)
    dg, dg_cnt = diagonal_table(t)
    for s in rng.permutation(t.n_sites):
        if m.variant is Variant.ROTOR:
            start, width = rotor_window(flat, s, nn, nn_cnt, m.alpha)
            if width > 0 and rng.random() < 0.5:
                flat[s] = (start + width * (1.0 - rng.random())) % 1.0
            continue
        c = forced_color(flat, s, nn, nn_cnt, dg, dg_cnt, discrete_mode(m))
        if c < 0:
            continue
        choices = [0] + (list(range(1, m.q + 1)) if c == 0 else [c])
        flat[s] = choices[rng.integers(len(choices))]
    return flat.reshape(t.shape)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _hb_site_discrete(states, s, nn, nn_cnt, dg, dg_cnt, mode, q, z, u):
    c = forced_color(states, s, nn, nn_cnt, dg, dg_cnt, mode)
    if c < 0:
        states[s] = 0
        return
    k = q if c == 0 else 1
    r = u * (1.0 + k * z)
    if r < 1.0:
        states[s] = 0
        return
    j = int((r - 1.0) / z)
    if j >= k:
        j = k - 1
    states[s] = j + 1 if c == 0 else c


@njit(cache=True, nogil=True)
def _hb_site_rotor(thetas, s, nn, nn_cnt, alpha, z, u):
    start, width = rotor_window(thetas, s, nn, nn_cnt, alpha)
    r = u * (1.0 + z * width)
    off = (r - 1.0) / z
    if r < 1.0 or off <= 0.0 or off >= width:
        thetas[s] = np.nan
        return
    # inverse CDF of the uniform law on the open arc
    thetas[s] = (start + off) % 1.0


@njit(cache=True, nogil=True)
def _clusters(occ, adj, adj_cnt, labels, queue):
    n = occ.shape[0]
    for s in range(n):
        labels[s] = -1
    nc = 0
    for s in range(n):
        if not occ[s] or labels[s] >= 0:
            continue
        labels[s] = nc
        head = 0
        tail = 1
        queue[0] = s
        while head < tail:
            v = queue[head]
            head += 1
            for k in range(adj_cnt[v]):
                w = adj[v, k]
                if occ[w] and labels[w] < 0:
                    labels[w] = nc
                    queue[tail] = w
                    tail += 1
        nc += 1
    return nc


@njit(cache=True, nogil=True)
def _recolor(states, adj, adj_cnt, q, u, labels, queue):
    occ = states != 0
    nc = _clusters(occ, adj, adj_cnt, labels, queue)
    for s in range(states.shape[0]):
        if labels[s] >= 0:
            c = 1 + int(u[labels[s]] * q)
            states[s] = c if c <= q else q
    return nc


@njit(cache=True, nogil=True)
def _rotate(thetas, adj, adj_cnt, u, labels, queue):
    occ = ~np.isnan(thetas)
    nc = _clusters(occ, adj, adj_cnt, labels, queue)
    for s in range(thetas.shape[0]):
        if labels[s] >= 0:
            thetas[s] = (thetas[s] + u[labels[s]]) % 1.0
    return nc


@njit(cache=True, nogil=True)
def _run_discrete(states, nn, nn_cnt, dg, dg_cnt, adj, adj_cnt, mode, q, z,
                  U, cluster_every, sweep0, trace_idx, trace_out):
    n = states.shape[0]
    labels = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for t in range(U.shape[0]):
        row = U[t]
        for s in range(n):
            _hb_site_discrete(states, s, nn, nn_cnt, dg, dg_cnt, mode, q, z, row[s])
        if cluster_every > 0 and (sweep0 + t + 1) % cluster_every == 0:
            _recolor(states, adj, adj_cnt, q, row[n:], labels, queue)
        for k in range(trace_idx.shape[0]):
            trace_out[t, k] = states[trace_idx[k]]


@njit(cache=True, nogil=True)
def _run_rotor(thetas, nn, nn_cnt, adj, adj_cnt, alpha, z,
               U, cluster_every, sweep0, trace_idx, trace_out):
    n = thetas.shape[0]
    labels = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for t in range(U.shape[0]):
        row = U[t]
        for s in range(n):
            _hb_site_rotor(thetas, s, nn, nn_cnt, alpha, z, row[s])
        if cluster_every > 0 and (sweep0 + t + 1) % cluster_every == 0:
            _rotate(thetas, adj, adj_cnt, row[n:], labels, queue)
        for k in range(trace_idx.shape[0]):
            trace_out[t, k] = thetas[trace_idx[k]]


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------

class Chain:
    """A single Markov chain that owns its configuration.

    Sweeps visit sites in raster order (flat index ``x * H + y``). With
    ``cluster_every = k > 0`` every k-th sweep is followed by an independent
    recoloring (or rotation) of all occupied clusters.
    """

    def __init__(self, m: ModelSpec, t: Torus, init: InitialState | np.ndarray = EMPTY_INIT,
                 seed: int = 0, cluster_every: int = 0):
        self.model = m
        self.torus = t
        self.seed = seed
        self.cluster_every = int(cluster_every)
        self.rng = make_rng(seed)
        if isinstance(init, InitialState):
            grid = initial_grid(m, t, init, self.rng)
        else:
            grid = np.array(init, dtype=m.dtype)
            if grid.shape != t.shape or not config_admissible(m, grid):
                raise InadmissibleConfiguration("initial grid is not admissible")
        self.states = np.ascontiguousarray(grid, dtype=m.dtype).ravel()
        self.sweeps = 0
        self.nn, self.nn_cnt = neighbor_table(t)
        self.dg, self.dg_cnt = diagonal_table(t)
        self.adj, self.adj_cnt = neighbor_table(t, m.cluster_adjacency)

    @property
    def width(self) -> int:
        n = self.torus.n_sites
        return 2 * n if self.cluster_every > 0 else n

    @property
    def grid(self) -> np.ndarray:
        return self.states.reshape(self.torus.shape)

    def configuration(self) -> Configuration:
        return Configuration._trusted(self.model, self.grid)

    def set_model(self, m: ModelSpec):
        """Change the activity in place (used by warm-started sweeps)."""
        if (m.variant, m.q, m.alpha) != (self.model.variant, self.model.q, self.model.alpha):
            raise ValueError("only the activity may change along a chain")
        self.model = m

    def _run(self, n_sweeps: int, trace_idx, trace_out):
        m = self.model
        per = max(1, _CHUNK // self.width)
        done = 0
        while done < n_sweeps:
            k = min(per, n_sweeps - done)
            U = self.rng.random((k, self.width))
            out = trace_out[done:done + k]
            if m.variant is Variant.ROTOR:
                _run_rotor(self.states, self.nn, self.nn_cnt, self.adj, self.adj_cnt,
                           m.alpha, float(m.z), U, self.cluster_every, self.sweeps,
                           trace_idx, out)
            else:
                _run_discrete(self.states, self.nn, self.nn_cnt, self.dg, self.dg_cnt,
                              self.adj, self.adj_cnt, discrete_mode(m), m.q, float(m.z),
                              U, self.cluster_every, self.sweeps, trace_idx, out)
            self.sweeps += k
            done += k

    def advance(self, n_sweeps: int) -> "Chain":
        self._run(int(n_sweeps), np.zeros(0, np.int64), np.empty((int(n_sweeps), 0), self.model.dtype))
        return self

    def trace(self, sites, n_sweeps: int) -> np.ndarray:
        """Run ``n_sweeps`` and return the states at ``sites`` after every sweep."""
        idx = np.array([self.torus.index(s) for s in sites], dtype=np.int64)
        out = np.empty((int(n_sweeps), len(idx)), dtype=self.model.dtype)
        self._run(int(n_sweeps), idx, out)
        return out


def heat_bath_update(m: ModelSpec, cfg: Configuration, i, rng: np.random.Generator) -> Configuration:
    """Resample site ``i`` from its exact conditional law."""
    t = cfg.torus
    s = t.index(i)
    flat = np.array(cfg.states, dtype=m.dtype).ravel()
    nn, nn_cnt = neighbor_table(t)
    u = rng.random()
    if m.variant is Variant.ROTOR:
        _hb_site_rotor(flat, s, nn, nn_cnt, m.alpha, float(m.z), u)
    else:
        dg, dg_cnt = diagonal_table(t)
        _hb_site_discrete(flat, s, nn, nn_cnt, dg, dg_cnt, discrete_mode(m), m.q, float(m.z), u)
    return Configuration._trusted(m, flat.reshape(t.shape))


def cluster_transform(m: ModelSpec, cfg: Configuration, rng: np.random.Generator) -> Configuration:
    """Independent uniform recoloring (rotation for rotors) of every occupied cluster."""
    t = cfg.torus
    flat = np.array(cfg.states, dtype=m.dtype).ravel()
    adj, adj_cnt = neighbor_table(t, m.cluster_adjacency)
    u = rng.random(t.n_sites)
    labels = np.empty(t.n_sites, np.int64)
    queue = np.empty(t.n_sites, np.int64)
    if m.variant is Variant.ROTOR:
        _rotate(flat, adj, adj_cnt, u, labels, queue)
    else:
        _recolor(flat, adj, adj_cnt, m.q, u, labels, queue)
    return Configuration._trusted(m, flat.reshape(t.shape))


def occupied_clusters(cfg: Configuration, kind: Adjacency | None = None):
    """Flat cluster labels (-1 on empty sites) and the number of clusters."""
    t = cfg.torus
    adj, adj_cnt = neighbor_table(t, kind or cfg.model.cluster_adjacency)
    labels = np.empty(t.n_sites, np.int64)
    queue = np.empty(t.n_sites, np.int64)
    nc = _clusters(cfg.occupied().ravel(), adj, adj_cnt, labels, queue)
    return labels.reshape(t.shape), int(nc)


def run_chain(m: ModelSpec, t: Torus, init: InitialState, sched: ChainSchedule):
    """Yield one MeasurementRecord every ``measure_every`` sweeps after burn-in."""
    from .measure import measure

    chain = Chain(m, t, init, seed=sched.seed, cluster_every=sched.cluster_move_every)
    chain.advance(sched.burn_in_sweeps)
    for _ in range(sched.measure_sweeps // sched.measure_every):
        chain.advance(sched.measure_every)
        yield measure(m, chain.grid, sweep=chain.sweeps, seed=sched.seed)

