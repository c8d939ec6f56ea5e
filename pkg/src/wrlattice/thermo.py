"""Contour-bound calculators, activity sweeps and density-jump location."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .lattice import Torus
from .measure import MeasurementRecord, measure
from .model import ModelSpec, Variant
from .plaquette import WRAP_FAMILIES
from .sampler import (
    CHECKERBOARD_EVEN,
    EMPTY_INIT,
    Chain,
    ChainSchedule,
    InitialState,
    monochromatic,
)


@dataclass(frozen=True)
class ContourBounds:
    variant: Variant
    terms: dict
    total: float
    epsilon: float | None

    @property
    def delta(self) -> float:
        return self.total


def sea_epsilon(delta: float) -> float | None:
    """epsilon = 4 delta / (1 - 5 delta)^2, defined for delta < 1/5."""
    if not 0 < delta < 0.2:
        return None
    return 4 * delta / (1 - 5 * delta) ** 2


def contour_bound(m: ModelSpec) -> ContourBounds:
    """Per-class bounds on the plaquette probabilities and their combination."""
    z = float(m.z)
    if m.variant is Variant.ROTOR:
        if z < 1:
            raise ValueError(f"rotor bounds need z >= 1, got z={z}")
        a = float(m.alpha)
        terms = {
            "B3": 2 ** 0.75 * a ** (1 / 56),
            "B2": 2 ** 0.5 * a ** (1 / 12),
            "B1": z ** -0.25,
            "B0": z ** -0.5,
        }
        total = sum(terms.values())
    else:
        q = float(m.q)
        zq = z * q
        if zq < 1:
            raise ValueError(f"contour bounds need z*q >= 1, got {zq}")
        if m.variant is Variant.DIAMOND:
            terms = {"B3": q ** (-1 / 56), "B2": q ** (-1 / 12), "B1": zq ** -0.25, "B0": zq ** -0.5}
            total = sum(terms.values())
        elif m.variant is Variant.SQUARE:
            terms = {"B3": q ** (-1 / 56), "B2": q ** (-1 / 12), "BSTAG": q ** (-1 / 12), "B0": zq ** -0.25}
            total = sum(terms.values())
        else:
            # W_1..W_3 (empty plaquettes) and W_4..W_7 (mixed double plaquettes)
            terms = {"W1-3": zq ** -0.25, "W4-7": q ** (-1 / 28)}
            total = 7 * max(terms.values()) ** (1 / 7)
    return ContourBounds(m.variant, terms, total, sea_epsilon(total))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    direction: str
    variant: Variant
    z: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    fractions: dict = field(default_factory=dict)
    wrapping: dict = field(default_factory=dict)
    top_class: list = field(default_factory=list)
    records: list = field(default_factory=list, repr=False)

    def at(self, z) -> int:
        return int(np.argmin(np.abs(np.log(self.z) - math.log(z))))


def batch_stderr(x, n_batches: int = 10) -> float:
    """Standard error of the mean from non-overlapping batch means."""
    x = np.asarray(x, float)
    b = min(n_batches, len(x))
    if b < 2:
        return 0.0
    means = np.array([c.mean() for c in np.array_split(x, b)])
    return float(means.std(ddof=1) / math.sqrt(b))


def default_init(m: ModelSpec, direction: str) -> InitialState:
    if direction == "up":
        if m.variant in (Variant.DIAMOND, Variant.ROTOR):
            return CHECKERBOARD_EVEN
        return EMPTY_INIT
    if m.variant is Variant.MOLECULAR_HC:
        return InitialState("checkerboard-even", 1)
    return monochromatic(0.0 if m.variant is Variant.ROTOR else 1)


def default_bracket(m: ModelSpec) -> tuple[float, float]:
    """Activity window where the transition is expected, widened by 2 on each side."""
    if m.variant is Variant.DIAMOND:
        lo, hi = m.q / 5, 5 * m.q
    elif m.variant is Variant.SQUARE:
        lo, hi = m.q ** (1 / 3) / 3, 3 * m.q ** (1 / 3)
    elif m.variant is Variant.MOLECULAR_HC:
        lo, hi = m.q / 18, 18 * m.q
    else:
        lo, hi = m.alpha ** -2 / 18, 5 * m.alpha ** -2
    return lo / 2, hi * 2


def geometric_grid(z_min: float, z_max: float, points: int) -> np.ndarray:
    if not 0 < z_min < z_max or points < 2:
        raise ValueError("need 0 < z_min < z_max and at least two points")
    return np.geomspace(z_min, z_max, points)


def summarize(records: list[MeasurementRecord], families, n_batches: int = 10):
    dens = [r.density for r in records]
    fr = {f.name: float(np.mean([r.fraction(f) for r in records])) for f in families}
    wr = {f.name: float(np.mean([r.wraps_both(f) for r in records])) for f in families}
    tops = [r.top_class for r in records]
    top = max(set(tops), key=tops.count) if tops else ""
    return float(np.mean(dens)), batch_stderr(dens, n_batches), fr, wr, top


def density_sweep(m: ModelSpec, t: Torus, z_grid, direction: str, sched: ChainSchedule,
                  init: InitialState | None = None, keep_records: bool = False) -> SweepResult:
    """Warm-started sweep: one chain walks the grid, re-equilibrating at each z."""
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    z_grid = np.sort(np.asarray(z_grid, float))
    if np.any(np.diff(z_grid) <= 0) or z_grid[0] <= 0:
        raise ValueError("z grid must be positive and strictly monotone")
    if direction == "down":
        z_grid = z_grid[::-1]
    init = init or default_init(m, direction)
    chain = Chain(m.with_z(z_grid[0]), t, init, seed=sched.seed, cluster_every=sched.cluster_move_every)
    families = WRAP_FAMILIES[m.variant]
    out = SweepResult(direction, m.variant, z_grid, np.zeros(len(z_grid)), np.zeros(len(z_grid)),
                      {f.name: np.zeros(len(z_grid)) for f in families},
                      {f.name: np.zeros(len(z_grid)) for f in families})
    for k, z in enumerate(z_grid):
        mz = m.with_z(z)
        chain.set_model(mz)
        chain.advance(sched.burn_in_sweeps)
        recs = []
        for _ in range(max(1, sched.measure_sweeps // sched.measure_every)):
            chain.advance(sched.measure_every)
            recs.append(measure(mz, chain.grid, sweep=chain.sweeps, seed=sched.seed))
        mean, se, fr, wr, top = summarize(recs, families)
        out.density[k] = mean
        out.stderr[k] = se
        for f in families:
            out.fractions[f.name][k] = fr[f.name]
            out.wrapping[f.name][k] = wr[f.name]
        out.top_class.append(top)
        if keep_records:
            out.records.append(recs)
    return out


# ---------------------------------------------------------------------------
# jump location
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JumpBracket:
    z_lo: float
    z_hi: float
    z_star: float
    gap: float
    gap_z: float


def _ascending(sr: SweepResult):
    order = np.argsort(sr.z)
    return sr.z[order], sr.density[order], sr.stderr[order]


def _crossing(z, rho, level) -> float:
    fit = isotonic_regression(rho, increasing=True).x
    above = np.nonzero(fit >= level)[0]
    if len(above) == 0 or above[0] == 0:
        raise ValueError(f"level {level} is not bracketed by the sweep range")
    k = above[0]
    lz0, lz1 = math.log(z[k - 1]), math.log(z[k])
    f0, f1 = fit[k - 1], fit[k]
    frac = (level - f0) / (f1 - f0) if f1 > f0 else 1.0
    return math.exp(lz0 + frac * (lz1 - lz0))


def locate_jump(sr_up: SweepResult, sr_down: SweepResult, level: float = 2 / 3) -> JumpBracket | None:
    """Bracket where the two monotone-fitted branches cross ``level``.

    Returns None when the branches never separate by more than two joint
    standard errors (a smooth crossing).
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    zu, ru, su = _ascending(sr_up)
    zd, rd, sd = _ascending(sr_down)
    lzu, lzd = np.log(zu), np.log(zd)
    # compare the branches on the up-grid points covered by the down grid
    inside = (lzu >= lzd[0]) & (lzu <= lzd[-1])
    if not inside.any():
        raise ValueError("sweeps do not overlap")
    rd_i = np.interp(lzu[inside], lzd, rd)
    sd_i = np.interp(lzu[inside], lzd, sd)
    gaps = rd_i - ru[inside]
    j = int(np.argmax(gaps))
    joint = math.hypot(su[inside][j], sd_i[j])
    z_up = _crossing(zu, ru, level)
    z_dn = _crossing(zd, rd, level)
    if gaps[j] <= 2 * joint:
        return None
    lo, hi = min(z_up, z_dn), max(z_up, z_dn)
    return JumpBracket(lo, hi, math.sqrt(lo * hi), float(gaps[j]), float(zu[inside][j]))


def exact_sweep(z, density, direction: str = "up", variant=Variant.DIAMOND) -> SweepResult:
    """Wrap an exact density curve (zero error bars) as a SweepResult."""
    z = np.asarray(z, float)
    return SweepResult(direction, Variant(variant), z, np.asarray(density, float), np.zeros(len(z)))
