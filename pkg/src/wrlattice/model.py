"""Site states, the four exclusion rules, and local allowed-state sets.

Discrete configurations are integer arrays with 0 for an empty site and
``1..q`` for colors. Rotor configurations are float arrays holding the
orientation in turns (``[0, 1)``) with ``NaN`` for an empty site.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np
from numba import njit

from .lattice import Adjacency, Site, Torus, diagonal_table, neighbor_table


class Variant(str, enum.Enum):
    DIAMOND = "diamond"
    SQUARE = "square"
    MOLECULAR_HC = "molecular-hc"
    ROTOR = "rotor"


class Bond(str, enum.Enum):
    NN = "nn"
    DIAGONAL = "diagonal"


class InadmissibleConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class Empty:
    def __repr__(self):
        return "Empty"


EMPTY = Empty()


@dataclass(frozen=True)
class Color:
    a: int


@dataclass(frozen=True)
class Orientation:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % 1.0)


SiteState = Union[Empty, Color, Orientation]


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant
    z: float
    q: int | None = None
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.z > 0:
            raise ValueError(f"activity z must be > 0, got {self.z!r}")
        if self.variant is Variant.ROTOR:
            if self.q is not None:
                raise ValueError("the rotor model takes alpha, not q")
            if self.alpha is None or not 0 < self.alpha < 0.25:
                raise ValueError(f"rotor alpha must lie in (0, 1/4), got {self.alpha!r}")
        else:
            if self.alpha is not None:
                raise ValueError(f"alpha is only meaningful for the rotor model, not {self.variant.value}")
            if self.q is None or int(self.q) != self.q or self.q < 1:
                raise ValueError(f"q must be an integer >= 1, got {self.q!r}")
            object.__setattr__(self, "q", int(self.q))

    @property
    def discrete(self) -> bool:
        return self.variant is not Variant.ROTOR

    @property
    def bonds(self) -> tuple[Bond, ...]:
        if self.variant in (Variant.DIAMOND, Variant.ROTOR):
            return (Bond.NN,)
        return (Bond.NN, Bond.DIAGONAL)

    @property
    def cluster_adjacency(self) -> Adjacency:
        """Adjacency under which occupied clusters share one color (or rotation)."""
        if self.variant in (Variant.DIAMOND, Variant.ROTOR):
            return Adjacency.NN
        return Adjacency.STAR

    @property
    def dtype(self):
        return np.float64 if self.variant is Variant.ROTOR else np.int32

    def with_z(self, z) -> "ModelSpec":
        return ModelSpec(self.variant, z, self.q, self.alpha)


def circular_distance(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def pair_admissible(m: ModelSpec, s1: SiteState, s2: SiteState, bond: Bond) -> bool:
    bond = Bond(bond)
    if bond not in m.bonds:
        raise ValueError(f"{bond.value} bonds do not occur in the {m.variant.value} model")
    if isinstance(s1, Empty) or isinstance(s2, Empty):
        return True
    if m.variant is Variant.ROTOR:
        if not (isinstance(s1, Orientation) and isinstance(s2, Orientation)):
            raise TypeError("rotor states must be Orientation or Empty")
        return circular_distance(s1.theta, s2.theta) < m.alpha
    if not (isinstance(s1, Color) and isinstance(s2, Color)):
        raise TypeError("discrete states must be Color or Empty")
    if m.variant is Variant.MOLECULAR_HC and bond is Bond.NN:
        return False
    return s1.a == s2.a


def state_of(m: ModelSpec, value) -> SiteState:
    if m.variant is Variant.ROTOR:
        return EMPTY if math.isnan(value) else Orientation(float(value))
    return EMPTY if value == 0 else Color(int(value))


def value_of(m: ModelSpec, s: SiteState):
    if isinstance(s, Empty):
        return np.nan if m.variant is Variant.ROTOR else 0
    if isinstance(s, Orientation):
        if m.variant is not Variant.ROTOR:
            raise TypeError("orientations only occur in the rotor model")
        return s.theta
    if m.variant is Variant.ROTOR:
        raise TypeError("colors do not occur in the rotor model")
    if not 1 <= s.a <= m.q:
        raise ValueError(f"color {s.a} outside 1..{m.q}")
    return s.a


def _shift(arr, dx, dy):
    return np.roll(arr, (-dx, -dy), axis=(0, 1))


def config_admissible(m: ModelSpec, grid) -> bool:
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape[0] % 2 or grid.shape[1] % 2:
        raise ValueError(f"grid dimensions must be even, got {grid.shape}")
    if m.variant is Variant.ROTOR:
        occ = ~np.isnan(grid)
        for dx, dy in ((1, 0), (0, 1)):
            other = _shift(grid, dx, dy)
            both = occ & ~np.isnan(other)
            d = np.abs(grid - other) % 1.0
            d = np.minimum(d, 1.0 - d)
            if np.any(both & ~(d < m.alpha)):
                return False
        return True
    if np.any((grid < 0) | (grid > m.q)):
        return False
    occ = grid != 0
    for dx, dy in ((1, 0), (0, 1)):
        other = _shift(grid, dx, dy)
        clash = occ & (other != 0)
        if m.variant is not Variant.MOLECULAR_HC:
            clash &= other != grid
        if np.any(clash):
            return False
    if m.variant in (Variant.SQUARE, Variant.MOLECULAR_HC):
        for dx, dy in ((1, 1), (1, -1)):
            other = _shift(grid, dx, dy)
            if np.any(occ & (other != 0) & (other != grid)):
                return False
    return True


@dataclass(frozen=True)
class Configuration:
    model: ModelSpec
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.states, dtype=self.model.dtype)
        Torus(*arr.shape)
        if not config_admissible(self.model, arr):
            raise InadmissibleConfiguration("configuration violates the exclusion rule")
        arr.setflags(write=False)
        object.__setattr__(self, "states", arr)

    @classmethod
    def _trusted(cls, model: ModelSpec, arr: np.ndarray) -> "Configuration":
        # skips the admissibility scan; callers guarantee it
        obj = object.__new__(cls)
        arr = np.array(arr, dtype=model.dtype)
        arr.setflags(write=False)
        object.__setattr__(obj, "model", model)
        object.__setattr__(obj, "states", arr)
        return obj

    @property
    def torus(self) -> Torus:
        return Torus(*self.states.shape)

    def state(self, i) -> SiteState:
        x, y = self.torus.wrap(*i)
        return state_of(self.model, self.states[x, y])

    def occupied(self) -> np.ndarray:
        if self.model.variant is Variant.ROTOR:
            return ~np.isnan(self.states)
        return self.states != 0

    def particle_number(self) -> int:
        return int(self.occupied().sum())

    def replace(self, i, s: SiteState) -> "Configuration":
        arr = self.states.copy()
        x, y = self.torus.wrap(*i)
        arr[x, y] = value_of(self.model, s)
        return Configuration(self.model, arr)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.model == other.model and np.array_equal(
            self.states, other.states, equal_nan=self.model.variant is Variant.ROTOR
        )

    def __hash__(self):
        return hash((self.model, self.states.tobytes()))


# ---------------------------------------------------------------------------
# local conditional structure, shared with the sampler kernels
# ---------------------------------------------------------------------------

MODE_DIAMOND, MODE_SQUARE, MODE_HC = 0, 1, 2


def discrete_mode(m: ModelSpec) -> int:
    return {
        Variant.DIAMOND: MODE_DIAMOND,
        Variant.SQUARE: MODE_SQUARE,
        Variant.MOLECULAR_HC: MODE_HC,
    }[m.variant]


@njit(cache=True, nogil=True)
def forced_color(states, s, nn, nn_cnt, dg, dg_cnt, mode):
    """Constraint on site ``s`` from its neighbors.

    Returns -1 if the site must stay empty, 0 if every color is allowed,
    and ``c > 0`` if only color ``c`` is allowed.
    """
    c = 0
    for k in range(nn_cnt[s]):
        v = states[nn[s, k]]
        if v != 0:
            if mode == MODE_HC:
                return -1
            if c == 0:
                c = v
            elif c != v:
                return -1
    if mode != MODE_DIAMOND:
        for k in range(dg_cnt[s]):
            v = states[dg[s, k]]
            if v != 0:
                if c == 0:
                    c = v
                elif c != v:
                    return -1
    return c


@njit(cache=True, nogil=True)
def rotor_window(thetas, s, nn, nn_cnt, alpha):
    """Allowed orientation arc at ``s`` as ``(start, width)`` in turns.

    Width 1.0 means the full circle (no occupied neighbor); width 0.0 means
    no orientation is allowed. Windows have width ``2 * alpha < 1/2``, so
    their intersection is a single arc.
    """
    ref = np.nan
    lo = 0.0
    hi = 0.0
    for k in range(nn_cnt[s]):
        t = thetas[nn[s, k]]
        if math.isnan(t):
            continue
        if math.isnan(ref):
            ref = t
            lo = -alpha
            hi = alpha
        else:
            d = (t - ref + 0.5) % 1.0 - 0.5
            lo = max(lo, d - alpha)
            hi = min(hi, d + alpha)
    if math.isnan(ref):
        return 0.0, 1.0
    if hi <= lo:
        return 0.0, 0.0
    return (ref + lo) % 1.0, hi - lo


@dataclass(frozen=True)
class DiscreteSet:
    colors: frozenset

    def __contains__(self, s):
        return isinstance(s, Empty) or (isinstance(s, Color) and s.a in self.colors)


@dataclass(frozen=True)
class Arc:
    intervals: tuple  # ((start, width), ...) in turns, circular

    @property
    def measure(self) -> float:
        return float(sum(w for _, w in self.intervals))

    def __contains__(self, s):
        if isinstance(s, Empty):
            return True
        if not isinstance(s, Orientation):
            return False
        return any(0.0 < (s.theta - a) % 1.0 < w or (w >= 1.0) for a, w in self.intervals)


AllowedStates = Union[DiscreteSet, Arc]


def allowed_states(m: ModelSpec, cfg: Configuration, i) -> AllowedStates:
    t = cfg.torus
    s = t.index(i)
    nn, nn_cnt = neighbor_table(t)
    flat = cfg.states.ravel()
    if m.variant is Variant.ROTOR:
        start, width = rotor_window(flat, s, nn, nn_cnt, m.alpha)
        return Arc(((start, width),) if width > 0 else ())
    dg, dg_cnt = diagonal_table(t)
    c = forced_color(flat, s, nn, nn_cnt, dg, dg_cnt, discrete_mode(m))
    if c < 0:
        return DiscreteSet(frozenset())
    if c == 0:
        return DiscreteSet(frozenset(range(1, m.q + 1)))
    return DiscreteSet(frozenset({int(c)}))


def site_conditional(m: ModelSpec, cfg: Configuration, i):
    """Exact single-site conditional law at ``i`` given the rest.

    Discrete models: ``{state: probability}`` as Fractions when ``z`` is
    rational. Rotor: ``(p_empty, Arc)`` with the orientation uniform on the arc.
    """
    allowed = allowed_states(m, cfg, i)
    z = Fraction(m.z) if not isinstance(m.z, float) else m.z
    if isinstance(allowed, Arc):
        mass = z * allowed.measure
        return 1 / (1 + mass), allowed
    k = len(allowed.colors)
    norm = 1 + k * z
    law = {EMPTY: 1 / norm}
    for a in sorted(allowed.colors):
        law[Color(a)] = z / norm
    return law


def empty_grid(m: ModelSpec, t: Torus) -> np.ndarray:
    if m.variant is Variant.ROTOR:
        return np.full(t.shape, np.nan)
    return np.zeros(t.shape, dtype=np.int32)


def neighbor_states(cfg: Configuration, i, kind=Adjacency.NN) -> list[SiteState]:
    from .lattice import neighbors

    return [cfg.state(j) for j in neighbors(cfg.torus, i, kind)]


__all__ = [
    "Variant", "Bond", "ModelSpec", "Configuration", "InadmissibleConfiguration",
    "EMPTY", "Empty", "Color", "Orientation", "SiteState", "pair_admissible",
    "config_admissible", "allowed_states", "site_conditional", "DiscreteSet", "Arc",
    "circular_distance", "state_of", "value_of", "empty_grid", "Site",
]
