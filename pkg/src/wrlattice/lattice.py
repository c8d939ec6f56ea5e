"""Torus geometry, neighbor tables and reflection-adjusted plaquette reads.

Site arrays throughout the package have shape ``(W, H)`` and are indexed
``arr[x, y]``; the flat index of site ``(x, y)`` is ``x * H + y``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class Site(NamedTuple):
    x: int
    y: int


class Adjacency(str, enum.Enum):
    NN = "nn"
    STAR = "star"


NN_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIAG_OFFSETS = ((1, 1), (-1, 1), (1, -1), (-1, -1))

# plaquette-local corners, in the bit order used for occupation codes
CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class Torus:
    width: int
    height: int

    def __post_init__(self):
        for name, n in (("width", self.width), ("height", self.height)):
            if int(n) != n or n < 2:
                raise ValueError(f"torus {name} must be an integer >= 2, got {n!r}")
            if n % 2:
                raise ValueError(f"torus {name} must be even, got {n}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    def wrap(self, x: int, y: int) -> Site:
        return Site(x % self.width, y % self.height)

    def index(self, i) -> int:
        x, y = self.wrap(*i)
        return x * self.height + y

    def site(self, s: int) -> Site:
        return Site(*divmod(s, self.height))

    def sites(self):
        for x in range(self.width):
            for y in range(self.height):
                yield Site(x, y)

    def parity_mask(self, parity: int = 0) -> np.ndarray:
        """Boolean ``(W, H)`` mask of sites with ``(x + y) % 2 == parity``."""
        x, y = np.indices(self.shape)
        return (x + y) % 2 == parity


def _offsets(kind: Adjacency):
    if Adjacency(kind) is Adjacency.NN:
        return NN_OFFSETS
    return NN_OFFSETS + DIAG_OFFSETS


def neighbors(t: Torus, i, kind: Adjacency = Adjacency.NN) -> list[Site]:
    """Distinct neighbors of ``i``; wrap-around duplicates on width-2 tori collapse."""
    x, y = t.wrap(*i)
    out: list[Site] = []
    for dx, dy in _offsets(kind):
        j = t.wrap(x + dx, y + dy)
        if j not in out:
            out.append(j)
    return out


@lru_cache(maxsize=64)
def _table(t: Torus, offsets: tuple) -> tuple[np.ndarray, np.ndarray]:
    n = t.n_sites
    table = np.full((n, len(offsets)), -1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    for s in range(n):
        x, y = t.site(s)
        seen = []
        for dx, dy in offsets:
            j = t.index((x + dx, y + dy))
            if j not in seen:
                seen.append(j)
        table[s, : len(seen)] = seen
        counts[s] = len(seen)
    table.setflags(write=False)
    counts.setflags(write=False)
    return table, counts


def neighbor_table(t: Torus, kind: Adjacency = Adjacency.NN):
    """Flat-index neighbor table ``(n_sites, 4 or 8)`` padded with -1, plus counts."""
    return _table(t, _offsets(kind))


def diagonal_table(t: Torus):
    """Flat-index table of the distance-sqrt(2) neighbors only."""
    return _table(t, DIAG_OFFSETS)


def reflection_flags(i) -> tuple[int, int]:
    """Horizontal/vertical flip flags applied to the plaquette read at ``i``."""
    return (i[0] & 1, i[1] & 1)


def plaquette_sites(t: Torus, i) -> dict[tuple[int, int], Site]:
    """Torus sites feeding each local corner of the reflected plaquette at ``i``."""
    x, y = t.wrap(*i)
    fx, fy = reflection_flags((x, y))
    return {
        (dx, dy): t.wrap(x + (dx ^ fx), y + (dy ^ fy)) for dx, dy in CORNERS
    }


def local_pattern(t: Torus, cfg, i) -> dict[tuple[int, int], object]:
    """Reflected 2x2 pattern of plaquette ``C + i``.

    The raw read is flipped horizontally when ``x(i)`` is odd and vertically
    when ``y(i)`` is odd, so neighboring plaquettes of a periodic pattern
    read the same local pattern.
    """
    return {c: cfg.state(j) for c, j in plaquette_sites(t, i).items()}


def reflected_corners(arr: np.ndarray) -> np.ndarray:
    """Vectorized reflected reads of every plaquette.

    Returns an array of shape ``(4, W, H)`` whose entry ``[k, x, y]`` is the
    value at local corner ``CORNERS[k]`` of the reflected plaquette at
    ``(x, y)``.
    """
    W, H = arr.shape
    x = np.arange(W)[:, None]
    y = np.arange(H)[None, :]
    fx, fy = x & 1, y & 1
    out = np.empty((4,) + arr.shape, dtype=arr.dtype)
    for k, (dx, dy) in enumerate(CORNERS):
        out[k] = arr[(x + (dx ^ fx)) % W, (y + (dy ^ fy)) % H]
    return out
