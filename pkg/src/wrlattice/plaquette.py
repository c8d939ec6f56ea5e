"""Plaquette classes, good-plaquette fields, and torus-wrapping detection."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from numba import njit

from .lattice import CORNERS, Adjacency, Torus, reflected_corners
from .model import Configuration, ModelSpec, Variant, state_of, value_of


class Kind(enum.IntEnum):
    B0 = 0
    B1 = 1
    B2 = 2
    B3 = 3
    GEVEN = 4
    GODD = 5
    GORD = 6
    GDIS = 7
    BSTAG = 8
    GORD_EVEN = 9  # molecular hard core: staggered and single-colored
    GORD_ODD = 10
    INVAL = 11
    DEMOTED = 12  # good plaquette dropped by the hat rule


ALIGNED = "aligned"

_COLORED = {Kind.GORD, Kind.GORD_EVEN, Kind.GORD_ODD}


@dataclass(frozen=True)
class PlaquetteClass:
    kind: Kind
    color: int | str | None = None

    def __repr__(self):
        if self.color is None:
            return self.kind.name
        return f"{self.kind.name}({self.color})"


GOOD_KINDS = {
    Variant.DIAMOND: frozenset({Kind.GEVEN, Kind.GODD, Kind.GORD}),
    Variant.ROTOR: frozenset({Kind.GEVEN, Kind.GODD, Kind.GORD}),
    Variant.SQUARE: frozenset({Kind.GORD, Kind.GDIS}),
    Variant.MOLECULAR_HC: frozenset({Kind.GORD_EVEN, Kind.GORD_ODD, Kind.GDIS}),
}

# plaquette families reported by the measurement layer
WRAP_FAMILIES = {
    Variant.DIAMOND: (Kind.GEVEN, Kind.GODD, Kind.GORD),
    Variant.ROTOR: (Kind.GEVEN, Kind.GODD, Kind.GORD),
    Variant.SQUARE: (Kind.GORD, Kind.GDIS),
    Variant.MOLECULAR_HC: (Kind.GORD_EVEN, Kind.GORD_ODD, Kind.GDIS),
}

VARIANT_CODE = {Variant.DIAMOND: 0, Variant.SQUARE: 1, Variant.MOLECULAR_HC: 2, Variant.ROTOR: 3}


class WrappingStatus(str, enum.Enum):
    NONE = "none"
    X_ONLY = "x-only"
    Y_ONLY = "y-only"
    BOTH = "both"

    @property
    def both(self) -> bool:
        return self is WrappingStatus.BOTH


# ---------------------------------------------------------------------------
# classification kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rotor_close(a, b, alpha):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d) < alpha


@njit(cache=True)
def _classify_values(v0, v1, v2, v3, vcode, alpha):
    """Class code and color for reflected corner values (bit order of CORNERS).

    Discrete values are colors with 0 empty; rotor values are turns with
    NaN empty (passed as float for every variant).
    """
    rotor = vcode == 3
    vals = (v0, v1, v2, v3)
    code = 0
    for k in range(4):
        occ = not math.isnan(vals[k]) if rotor else vals[k] != 0
        if occ:
            code |= 1 << k
    if code == 0:
        return 0, 0
    # side pairs in bit order: (0,1) bottom, (2,3) top, (0,2) left, (1,3) right
    if rotor:
        for a, b in ((0, 1), (2, 3), (0, 2), (1, 3)):
            if (code >> a) & 1 and (code >> b) & 1:
                if not _rotor_close(vals[a], vals[b], alpha):
                    return 11, 0
    else:
        first = 0.0
        same = True
        for k in range(4):
            if (code >> k) & 1:
                if first == 0.0:
                    first = vals[k]
                elif vals[k] != first:
                    same = False
        if vcode == 0:
            # diamond: only side pairs constrain colors
            for a, b in ((0, 1), (2, 3), (0, 2), (1, 3)):
                if (code >> a) & 1 and (code >> b) & 1 and vals[a] != vals[b]:
                    return 11, 0
        elif not same:
            return 11, 0
    color = 0
    if not rotor:
        for k in range(4):
            if (code >> k) & 1:
                color = int(vals[k])
                break
    n = 0
    for k in range(4):
        n += (code >> k) & 1
    if vcode == 2:
        if n == 1:
            return 7, 0
        if code == 9:
            return 9, color
        if code == 6:
            return 10, color
        return 11, 0
    if n == 1:
        return (7, 0) if vcode == 1 else (1, 0)
    if code == 9 or code == 6:
        if vcode == 1:
            return 8, 0
        return (4, 0) if code == 9 else (5, 0)
    if n == 2:
        return 2, 0
    if n == 3:
        return 3, 0
    return 6, color


@njit(cache=True)
def _classify_grid(corners, vcode, alpha):
    _, W, H = corners.shape
    kinds = np.empty((W, H), dtype=np.int8)
    colors = np.zeros((W, H), dtype=np.int32)
    for x in range(W):
        for y in range(H):
            k, c = _classify_values(
                float(corners[0, x, y]), float(corners[1, x, y]),
                float(corners[2, x, y]), float(corners[3, x, y]), vcode, alpha,
            )
            kinds[x, y] = k
            colors[x, y] = c
    return kinds, colors


def classify_grid(m: ModelSpec, states: np.ndarray):
    """Class codes and colors of every plaquette of a raw state grid."""
    corners = reflected_corners(np.asarray(states))
    alpha = m.alpha if m.alpha is not None else 0.0
    return _classify_grid(corners, VARIANT_CODE[m.variant], alpha)


def _to_class(m: ModelSpec, kind: int, color: int) -> PlaquetteClass:
    kind = Kind(int(kind))
    if kind in _COLORED:
        if m.variant is Variant.ROTOR:
            return PlaquetteClass(kind, ALIGNED)
        return PlaquetteClass(kind, int(color))
    return PlaquetteClass(kind)


def classify(m: ModelSpec, p) -> PlaquetteClass:
    """Class of a reflected local pattern ``{(dx, dy): SiteState}``."""
    vals = []
    for c in CORNERS:
        v = value_of(m, p[c])
        vals.append(float(v))
    alpha = m.alpha if m.alpha is not None else 0.0
    k, col = _classify_values(vals[0], vals[1], vals[2], vals[3], VARIANT_CODE[m.variant], alpha)
    return _to_class(m, k, col)


# ---------------------------------------------------------------------------
# class fields
# ---------------------------------------------------------------------------

_ORDERED_HC = (int(Kind.GORD_EVEN), int(Kind.GORD_ODD))


@njit(cache=True)
def _hc_family(k):
    # 1 ordered, 2 disordered, 0 not good
    if k == 9 or k == 10:
        return 1
    if k == 7:
        return 2
    return 0


@njit(cache=True)
def _apply_hat(kinds, colors):
    W, H = kinds.shape
    out_k = kinds.copy()
    out_c = colors.copy()
    for x in range(W):
        for y in range(H):
            f = _hc_family(kinds[x, y])
            if f == 0:
                continue
            if _hc_family(kinds[(x + 1) % W, y]) != f or _hc_family(kinds[x, (y + 1) % H]) != f:
                out_k[x, y] = 12
                out_c[x, y] = 0
    return out_k, out_c


@dataclass(frozen=True)
class ClassField:
    model: ModelSpec
    torus: Torus
    kinds: np.ndarray
    colors: np.ndarray
    hat: bool = False

    @property
    def labels(self) -> np.ndarray:
        """Object grid of PlaquetteClass values, ``labels[x, y]`` for plaquette ``(x, y)``."""
        out = np.empty(self.kinds.shape, dtype=object)
        for x, y in np.ndindex(self.kinds.shape):
            out[x, y] = _to_class(self.model, self.kinds[x, y], self.colors[x, y])
        return out

    def label(self, i) -> PlaquetteClass:
        x, y = self.torus.wrap(*i)
        return _to_class(self.model, self.kinds[x, y], self.colors[x, y])

    def histogram(self) -> dict[str, int]:
        cnt = np.bincount(self.kinds.ravel().astype(np.int64), minlength=len(Kind))
        return {k.name: int(cnt[k]) for k in Kind if cnt[k]}

    def class_histogram(self) -> Counter:
        return Counter(self.labels.ravel().tolist())

    def mask(self, family) -> np.ndarray:
        return family_mask(self, family)


def good_field(m: ModelSpec, cfg: Configuration, hat: bool = False) -> ClassField:
    if hat and m.variant is not Variant.MOLECULAR_HC:
        raise ValueError("the hat rule is defined for the molecular hard-core model only")
    kinds, colors = classify_grid(m, cfg.states)
    if hat:
        kinds, colors = _apply_hat(kinds, colors)
    return ClassField(m, cfg.torus, kinds, colors, hat)


def family_mask(field: ClassField, family) -> np.ndarray:
    """Boolean mask of plaquettes whose label lies in ``family``.

    Members may be ``Kind`` values (any color) or ``PlaquetteClass`` values
    (exact color match; ``color=None`` matches any color).
    """
    if isinstance(family, (Kind, PlaquetteClass)):
        family = {family}
    mask = np.zeros(field.kinds.shape, dtype=bool)
    for f in family:
        if isinstance(f, PlaquetteClass):
            hit = field.kinds == int(f.kind)
            if f.color is not None and f.color != ALIGNED:
                hit &= field.colors == int(f.color)
            mask |= hit
        else:
            mask |= field.kinds == int(Kind(f))
    return mask


# ---------------------------------------------------------------------------
# connected components with winding bookkeeping
# ---------------------------------------------------------------------------

NN_STEPS = np.array([(1, 0), (-1, 0), (0, 1), (0, -1)], dtype=np.int64)
STAR_STEPS = np.array(
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)], dtype=np.int64
)
CONTIGUITY_STEPS = np.array(
    [(dx, dy) for dx in range(-2, 3) for dy in range(-2, 3) if dx * dx + dy * dy in (4, 5)],
    dtype=np.int64,
)


def steps_for(kind: Adjacency) -> np.ndarray:
    return NN_STEPS if Adjacency(kind) is Adjacency.NN else STAR_STEPS


@njit(cache=True)
def label_components(mask, steps):
    """BFS labeling of ``mask`` on the torus.

    Each site also gets an unwrapped coordinate; reaching an already
    labeled site of the same component at a different unwrapped position
    means the component winds around the torus in that direction.
    Returns ``(labels, n, wraps_x, wraps_y)``; labels are -1 off the mask.
    """
    W, H = mask.shape
    labels = np.full((W, H), -1, dtype=np.int64)
    ux = np.zeros((W, H), dtype=np.int64)
    uy = np.zeros((W, H), dtype=np.int64)
    qx = np.empty(W * H, dtype=np.int64)
    qy = np.empty(W * H, dtype=np.int64)
    wx = np.zeros(W * H, dtype=np.bool_)
    wy = np.zeros(W * H, dtype=np.bool_)
    n = 0
    for sx in range(W):
        for sy in range(H):
            if not mask[sx, sy] or labels[sx, sy] >= 0:
                continue
            labels[sx, sy] = n
            ux[sx, sy] = sx
            uy[sx, sy] = sy
            head = 0
            tail = 1
            qx[0] = sx
            qy[0] = sy
            while head < tail:
                x = qx[head]
                y = qy[head]
                head += 1
                for k in range(steps.shape[0]):
                    nx = ux[x, y] + steps[k, 0]
                    ny = uy[x, y] + steps[k, 1]
                    tx = nx % W
                    ty = ny % H
                    if not mask[tx, ty]:
                        continue
                    if labels[tx, ty] < 0:
                        labels[tx, ty] = n
                        ux[tx, ty] = nx
                        uy[tx, ty] = ny
                        qx[tail] = tx
                        qy[tail] = ty
                        tail += 1
                    else:
                        if ux[tx, ty] != nx:
                            wx[n] = True
                        if uy[tx, ty] != ny:
                            wy[n] = True
            n += 1
    return labels, n, wx[:n].copy(), wy[:n].copy()


def _status(wx: np.ndarray, wy: np.ndarray) -> WrappingStatus:
    if np.any(wx & wy):
        return WrappingStatus.BOTH
    if wx.any():
        return WrappingStatus.X_ONLY
    if wy.any():
        return WrappingStatus.Y_ONLY
    return WrappingStatus.NONE


def mask_wrapping(mask: np.ndarray, adjacency=Adjacency.NN) -> WrappingStatus:
    """Wrapping status of the components of a boolean site or plaquette mask.

    ``BOTH`` requires a single component winding in both directions.
    """
    steps = adjacency if isinstance(adjacency, np.ndarray) else steps_for(adjacency)
    _, _, wx, wy = label_components(np.ascontiguousarray(mask, dtype=np.bool_), steps)
    return _status(wx, wy)


def wrapping_status(field: ClassField, family, adjacency=Adjacency.NN) -> WrappingStatus:
    return mask_wrapping(family_mask(field, family), adjacency)


def site_sea_status(cfg: Configuration, parity: int, occupied: bool = True) -> WrappingStatus:
    """Star-adjacency wrapping of the sites of one parity class that are occupied (or empty)."""
    occ = cfg.occupied()
    mask = cfg.torus.parity_mask(parity) & (occ if occupied else ~occ)
    return mask_wrapping(mask, Adjacency.STAR)


@dataclass(frozen=True)
class Components:
    labels: np.ndarray
    n: int
    status: WrappingStatus

    def same(self, i, j) -> bool:
        a = self.labels[i[0], i[1]]
        return a >= 0 and a == self.labels[j[0], j[1]]


def contiguity_components(cfg: Configuration) -> Components:
    """Occupied sites linked when their centers lie at distance 2 or sqrt(5)."""
    if cfg.model.variant is not Variant.SQUARE:
        raise ValueError("contiguity is defined for the square model")
    labels, n, wx, wy = label_components(cfg.occupied(), CONTIGUITY_STEPS)
    return Components(labels, int(n), _status(wx, wy))


# ---------------------------------------------------------------------------
# the seven cover sets for the hard-core hat rule
# ---------------------------------------------------------------------------

def w_sets(m: ModelSpec, cfg: Configuration) -> np.ndarray:
    """Boolean ``(7, W, H)`` membership of every plaquette index in W_1..W_7.

    W_1..W_3 mark empty plaquettes and their two negative translates; W_4..W_7
    mark horizontal/vertical double plaquettes (split by the parity of the
    first or second coordinate) whose halves are good of different families.
    """
    if m.variant is not Variant.MOLECULAR_HC:
        raise ValueError("the cover sets are defined for the molecular hard-core model")
    kinds, _ = classify_grid(m, cfg.states)
    fam = np.zeros(kinds.shape, dtype=np.int8)
    fam[(kinds == Kind.GORD_EVEN) | (kinds == Kind.GORD_ODD)] = 1
    fam[kinds == Kind.GDIS] = 2
    b0 = kinds == Kind.B0
    right = np.roll(fam, -1, axis=0)
    up = np.roll(fam, -1, axis=1)
    e1 = (fam > 0) & (right > 0) & (fam != right)
    e2 = (fam > 0) & (up > 0) & (fam != up)
    x, y = np.indices(kinds.shape)
    out = np.empty((7,) + kinds.shape, dtype=bool)
    out[0] = b0
    out[1] = np.roll(b0, -1, axis=0)
    out[2] = np.roll(b0, -1, axis=1)
    out[3] = e1 & (x % 2 == 0)
    out[4] = e1 & (x % 2 == 1)
    out[5] = e2 & (y % 2 == 0)
    out[6] = e2 & (y % 2 == 1)
    return out


def hat_cover_holds(m: ModelSpec, cfg: Configuration) -> bool:
    """Check that every plaquette outside the hat-good set lies in some W_k."""
    field = good_field(m, cfg, hat=True)
    good = family_mask(field, {Kind.GORD_EVEN, Kind.GORD_ODD, Kind.GDIS})
    covered = w_sets(m, cfg).any(axis=0)
    return bool(np.all(good | covered))


def pattern_from_code(m: ModelSpec, code: int, colors=(1, 1, 1, 1)):
    """Local pattern with corners occupied per the bits of ``code``."""
    p = {}
    for k, c in enumerate(CORNERS):
        if (code >> k) & 1:
            p[c] = state_of(m, colors[k])
        else:
            p[c] = state_of(m, np.nan if m.variant is Variant.ROTOR else 0)
    return p
