from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrlattice.lattice import Torus
from wrlattice.model import (
    EMPTY,
    Arc,
    Bond,
    Color,
    Configuration,
    DiscreteSet,
    InadmissibleConfiguration,
    ModelSpec,
    Orientation,
    allowed_states,
    circular_distance,
    config_admissible,
    pair_admissible,
    site_conditional,
)

DISCRETE = ["diamond", "square", "molecular-hc"]


def spec(variant, z=1.0):
    if variant == "rotor":
        return ModelSpec("rotor", z, alpha=0.1)
    return ModelSpec(variant, z, q=3)


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec("diamond", 1, q=2, alpha=0.1)
    with pytest.raises(ValueError):
        ModelSpec("rotor", 1, alpha=0.3)
    with pytest.raises(ValueError):
        ModelSpec("rotor", 1, q=2, alpha=0.1)
    with pytest.raises(ValueError):
        ModelSpec("square", 0, q=2)
    with pytest.raises(ValueError):
        ModelSpec("square", 1, q=0)
    with pytest.raises(ValueError):
        ModelSpec("hexagonal", 1, q=2)


def test_pair_rules():
    d, s, hc = spec("diamond"), spec("square"), spec("molecular-hc")
    assert not pair_admissible(d, Color(1), Color(2), Bond.NN)
    assert pair_admissible(d, Color(2), Color(2), Bond.NN)
    with pytest.raises(ValueError):
        pair_admissible(d, Color(1), Color(2), Bond.DIAGONAL)
    assert not pair_admissible(s, Color(1), Color(2), Bond.DIAGONAL)
    assert pair_admissible(s, Color(1), Color(1), Bond.DIAGONAL)
    assert not pair_admissible(hc, Color(1), Color(1), Bond.NN)
    assert pair_admissible(hc, Color(1), Color(1), Bond.DIAGONAL)
    assert pair_admissible(hc, EMPTY, Color(3), Bond.NN)


def test_rotor_boundary():
    r = ModelSpec("rotor", 1, alpha=0.125)
    assert pair_admissible(r, Orientation(0.95), Orientation(0.05), Bond.NN)
    # distance exactly alpha is excluded (dyadic values, no rounding)
    assert not pair_admissible(r, Orientation(0.0), Orientation(0.125), Bond.NN)
    assert circular_distance(0.9, 0.1) == pytest.approx(0.2)


@pytest.mark.parametrize("variant", DISCRETE + ["rotor"])
def test_empty_admissible(variant):
    m = spec(variant)
    grid = np.full((4, 4), np.nan) if variant == "rotor" else np.zeros((4, 4), int)
    assert config_admissible(m, grid)


def test_monochromatic_admissibility():
    full = np.ones((4, 4), int)
    assert config_admissible(spec("diamond"), full)
    assert config_admissible(spec("square"), full)
    assert not config_admissible(spec("molecular-hc"), full)
    with pytest.raises(InadmissibleConfiguration):
        Configuration(spec("molecular-hc"), full)


def test_configuration_frozen():
    cfg = Configuration(spec("diamond"), np.zeros((2, 2), int))
    with pytest.raises(ValueError):
        cfg.states[0, 0] = 1
    assert cfg.replace((0, 0), Color(2)).particle_number() == 1


def grids(variant, q=3):
    n = 16
    if variant == "rotor":
        vals = st.one_of(st.just(np.nan), st.floats(0, 1, exclude_max=True))
    else:
        vals = st.integers(0, q)
    return st.lists(vals, min_size=n, max_size=n).map(
        lambda v: np.array(v, dtype=float if variant == "rotor" else int).reshape(4, 4))


@pytest.mark.parametrize("variant", DISCRETE + ["rotor"])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_symmetry_invariance(variant, data):
    m = spec(variant)
    g = data.draw(grids(variant))
    ok = config_admissible(m, g)
    assert config_admissible(m, np.roll(g, (1, 3), axis=(0, 1))) == ok
    assert config_admissible(m, g[::-1, :]) == ok
    assert config_admissible(m, g.T) == ok
    if variant == "rotor":
        assert config_admissible(m, (g + 0.37) % 1.0) == ok
    else:
        perm = np.array([0, 2, 3, 1])
        assert config_admissible(m, perm[g]) == ok


@pytest.mark.parametrize("variant", DISCRETE + ["rotor"])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_hereditary(variant, data):
    m = spec(variant)
    g = data.draw(grids(variant))
    if not config_admissible(m, g):
        return
    x, y = data.draw(st.integers(0, 3)), data.draw(st.integers(0, 3))
    h = g.copy()
    h[x, y] = np.nan if variant == "rotor" else 0
    assert config_admissible(m, h)


@pytest.mark.parametrize("variant", DISCRETE)
@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_allowed_states_exact(variant, data):
    m = spec(variant)
    g = data.draw(grids(variant))
    if not config_admissible(m, g):
        return
    cfg = Configuration(m, g)
    i = (data.draw(st.integers(0, 3)), data.draw(st.integers(0, 3)))
    allowed = allowed_states(m, cfg, i)
    assert EMPTY in allowed
    for a in range(1, m.q + 1):
        h = g.copy()
        h[i] = a
        assert (Color(a) in allowed) == config_admissible(m, h)


def test_rotor_arc_intersection():
    m = ModelSpec("rotor", 1, alpha=0.1)
    g = np.full((4, 4), np.nan)
    g[1, 0], g[0, 1] = 0.95, 0.02
    arc = allowed_states(m, Configuration(m, g), (0, 0))
    assert arc.measure == pytest.approx(0.2 - 0.07)
    assert Orientation(0.99) in arc
    assert Orientation(0.93) in arc
    assert Orientation(0.91) not in arc
    assert Orientation(0.06) not in arc
    # no neighbors: the whole circle
    free = allowed_states(m, Configuration(m, np.full((4, 4), np.nan)), (0, 0))
    assert isinstance(free, Arc) and free.measure == pytest.approx(1.0)


def test_site_conditional_free_site():
    m = ModelSpec("diamond", 1, q=3)
    law = site_conditional(m, Configuration(m, np.zeros((2, 2), int)), (0, 0))
    assert law[EMPTY] == Fraction(1, 4)
    assert all(law[Color(a)] == Fraction(1, 4) for a in (1, 2, 3))


def test_site_conditional_forced():
    m = ModelSpec("diamond", 2, q=3)
    g = np.zeros((4, 4), int)
    g[1, 0] = 2
    law = site_conditional(m, Configuration(m, g), (0, 0))
    assert law == {EMPTY: Fraction(1, 3), Color(2): Fraction(2, 3)}
    g[0, 1] = 3
    law = site_conditional(m, Configuration(m, g), (0, 0))
    assert law == {EMPTY: 1}
    assert isinstance(allowed_states(m, Configuration(m, g), (0, 0)), DiscreteSet)
