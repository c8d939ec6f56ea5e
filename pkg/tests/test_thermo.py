import math

import numpy as np
import pytest

from wrlattice.lattice import Torus
from wrlattice.model import ModelSpec
from wrlattice.sampler import ChainSchedule
from wrlattice.thermo import (
    SweepResult,
    contour_bound,
    default_bracket,
    density_sweep,
    exact_sweep,
    geometric_grid,
    locate_jump,
    sea_epsilon,
)


def test_diamond_bound_value():
    q = 2.0 ** 56
    b = contour_bound(ModelSpec("diamond", 1, q=2 ** 56))
    assert b.total == pytest.approx(0.5394, abs=1e-3)
    assert b.terms["B3"] == pytest.approx(0.5)
    assert b.terms["B0"] == pytest.approx(q ** -0.5)


def test_bound_guards():
    with pytest.raises(ValueError):
        contour_bound(ModelSpec("diamond", 0.1, q=2))
    with pytest.raises(ValueError):
        contour_bound(ModelSpec("rotor", 0.5, alpha=0.01))


def test_bound_formulas():
    q, z = 10 ** 6, 3.0
    sq = contour_bound(ModelSpec("square", z, q=q))
    assert sq.total == pytest.approx(q ** (-1 / 56) + 2 * q ** (-1 / 12) + (z * q) ** -0.25)
    hc = contour_bound(ModelSpec("molecular-hc", z, q=q))
    assert hc.total == pytest.approx(7 * max((z * q) ** -0.25, q ** (-1 / 28)) ** (1 / 7))
    r = contour_bound(ModelSpec("rotor", 16.0, alpha=1e-6))
    assert r.total == pytest.approx(2 ** 0.75 * 1e-6 ** (1 / 56) + 2 ** 0.5 * 1e-6 ** (1 / 12) + 0.5 + 0.25)


def test_rotor_alpha_to_zero():
    r = contour_bound(ModelSpec("rotor", 16.0, alpha=1e-200))
    assert r.total == pytest.approx(0.75, abs=0.05)


@pytest.mark.parametrize("variant", ["diamond", "square", "molecular-hc", "rotor"])
def test_bounds_decreasing(variant):
    totals = []
    for q in np.geomspace(1e4, 1e8, 9):
        if variant == "rotor":
            m = ModelSpec("rotor", q, alpha=1 / q)
        else:
            m = ModelSpec(variant, 1, q=int(q))
        totals.append(contour_bound(m).total)
    assert np.all(np.diff(totals) < 0)


def test_epsilon_link():
    assert sea_epsilon(0.1) == pytest.approx(0.4 / 0.25)
    assert sea_epsilon(0.3) is None
    b = contour_bound(ModelSpec("diamond", 1, q=2 ** 200))
    assert b.epsilon is not None and b.epsilon > 0


def test_geometric_grid():
    g = geometric_grid(1, 100, 3)
    assert np.allclose(g, [1, 10, 100])
    with pytest.raises(ValueError):
        geometric_grid(5, 1, 4)


def test_default_brackets():
    lo, hi = default_bracket(ModelSpec("diamond", 1, q=64))
    assert (lo, hi) == pytest.approx((6.4, 640))
    lo, hi = default_bracket(ModelSpec("square", 1, q=64))
    assert (lo, hi) == pytest.approx((4 / 6, 24))


def _step(z, at, lo=0.25, hi=1.0, direction="up"):
    return exact_sweep(z, np.where(z < at, lo, hi), direction)


def test_locate_synthetic_step():
    z = np.geomspace(1, 50, 4001)
    jb = locate_jump(_step(z, 7.0), _step(z, 5.0, direction="down"))
    assert jb is not None
    assert jb.z_lo == pytest.approx(5.0, rel=2e-3)
    assert jb.z_hi == pytest.approx(7.0, rel=2e-3)
    assert jb.z_star == pytest.approx(math.sqrt(35), rel=2e-3)
    assert jb.gap == pytest.approx(0.75)


def test_locate_free_gas_none():
    z = np.geomspace(0.1, 50, 200)
    rho = z / (1 + z)
    assert locate_jump(exact_sweep(z, rho), exact_sweep(z, rho, "down")) is None


def test_locate_not_bracketed():
    z = np.geomspace(1, 10, 20)
    flat = exact_sweep(z, np.full(20, 0.3))
    with pytest.raises(ValueError):
        locate_jump(flat, flat)
    with pytest.raises(ValueError):
        locate_jump(flat, flat, level=1.5)


def test_free_gas_sweep():
    m, t = ModelSpec("diamond", 1, q=1), Torus(8, 8)
    sr = density_sweep(m, t, [0.25, 1.0, 4.0], "up", ChainSchedule(200, 4000, 10, 0, seed=11))
    want = sr.z / (1 + sr.z)
    assert np.all(np.abs(sr.density - want) <= 3 * sr.stderr)
    assert list(sr.z) == sorted(sr.z)


def test_down_sweep_order_and_hc_density():
    m, t = ModelSpec("molecular-hc", 1, q=4), Torus(8, 8)
    sr = density_sweep(m, t, geometric_grid(0.5, 500, 6), "down", ChainSchedule(100, 500, 10, 1, seed=2))
    assert sr.z[0] > sr.z[-1]
    assert np.all(sr.density <= 0.5 + 3 * sr.stderr)
    assert np.all((sr.density >= 0) & (sr.density <= 1))
    assert sr.at(500) == 0


def test_sweep_validation():
    m, t = ModelSpec("diamond", 1, q=2), Torus(4, 4)
    with pytest.raises(ValueError):
        density_sweep(m, t, [1, 2], "sideways", ChainSchedule(1, 1))
    with pytest.raises(ValueError):
        density_sweep(m, t, [1, 1], "up", ChainSchedule(1, 1))
