"""Per-sample observables of a configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .model import ModelSpec, Variant
from .plaquette import WRAP_FAMILIES, Kind, classify_grid, mask_wrapping
from .sampler import GENERATOR


@dataclass
class MeasurementRecord:
    sweep: int
    density: float
    rho_even: float
    rho_odd: float
    staggered: float
    dominant_color_fraction: float
    histogram: dict = field(default_factory=dict)
    top_class: str = ""
    top_fraction: float = 0.0
    wrapping: dict = field(default_factory=dict)
    seed: int = 0
    generator: str = GENERATOR

    def fraction(self, kind) -> float:
        n = sum(self.histogram.values())
        return self.histogram.get(Kind(kind).name, 0) / n if n else 0.0

    def wraps_both(self, kind) -> bool:
        return self.wrapping.get(Kind(kind).name) == "both"

    def to_dict(self) -> dict:
        return asdict(self)


def occupation(m: ModelSpec, grid: np.ndarray) -> np.ndarray:
    return ~np.isnan(grid) if m.variant is Variant.ROTOR else grid != 0


def dominant_color_fraction(m: ModelSpec, grid: np.ndarray) -> float:
    """Share of particles carrying the most common color.

    For rotors this is the length of the mean unit vector of the
    occupied orientations.
    """
    occ = occupation(m, grid)
    if not occ.any():
        return 0.0
    if m.variant is Variant.ROTOR:
        return float(abs(np.exp(2j * np.pi * grid[occ]).mean()))
    counts = np.bincount(grid[occ].astype(np.int64), minlength=m.q + 1)
    return float(counts.max() / occ.sum())


def measure(m: ModelSpec, grid: np.ndarray, sweep: int = 0, seed: int = 0) -> MeasurementRecord:
    occ = occupation(m, grid)
    x, y = np.indices(grid.shape)
    even = (x + y) % 2 == 0
    rho_e = float(occ[even].mean())
    rho_o = float(occ[~even].mean())
    kinds, colors = classify_grid(m, grid)
    cnt = np.bincount(kinds.ravel().astype(np.int64), minlength=len(Kind))
    hist = {k.name: int(cnt[k]) for k in Kind if cnt[k]}
    # top class keeps colors apart (GORD(3) and GORD(5) are different classes)
    keys, freq = np.unique(kinds.astype(np.int64) * (1 << 32) + colors, return_counts=True)
    j = int(np.argmax(freq))
    kind, color = Kind(int(keys[j] >> 32)), int(keys[j] & 0xFFFFFFFF)
    top = kind.name if color == 0 else f"{kind.name}({color})"
    wrapping = {
        f.name: mask_wrapping(kinds == int(f)).value for f in WRAP_FAMILIES[m.variant]
    }
    return MeasurementRecord(
        sweep=int(sweep),
        density=(rho_e + rho_o) / 2,
        rho_even=rho_e,
        rho_odd=rho_o,
        staggered=abs(rho_e - rho_o),
        dominant_color_fraction=dominant_color_fraction(m, grid),
        histogram=hist,
        top_class=top,
        top_fraction=float(freq[j] / kinds.size),
        wrapping=wrapping,
        seed=int(seed),
        generator=GENERATOR,
    )
