from collections import Counter

import numpy as np
import pytest

from wrlattice.exact import site_marginal
from wrlattice.lattice import Torus
from wrlattice.model import Color, Configuration, InadmissibleConfiguration, ModelSpec, config_admissible
from wrlattice.sampler import (
    CHECKERBOARD_EVEN,
    EMPTY_INIT,
    Chain,
    ChainSchedule,
    InitialState,
    cluster_transform,
    heat_bath_update,
    initial_grid,
    make_rng,
    monochromatic,
    occupied_clusters,
    run_chain,
)

VARIANTS = [
    ModelSpec("diamond", 1.5, q=3),
    ModelSpec("square", 1.5, q=3),
    ModelSpec("molecular-hc", 1.5, q=3),
    ModelSpec("rotor", 5.0, alpha=0.1),
]


def test_initial_state_parse():
    assert InitialState.parse("monochromatic:2") == monochromatic(2)
    assert str(InitialState.parse("checkerboard-even")) == "checkerboard-even"
    with pytest.raises(ValueError):
        InitialState.parse("striped")
    with pytest.raises(ValueError):
        InitialState("monochromatic")


def test_initial_grids():
    t = Torus(4, 4)
    hc = ModelSpec("molecular-hc", 1, q=2)
    with pytest.raises(InadmissibleConfiguration):
        initial_grid(hc, t, monochromatic(1))
    g = initial_grid(hc, t, CHECKERBOARD_EVEN)
    assert (g[t.parity_mask(0)] == 1).all() and (g[t.parity_mask(1)] == 0).all()
    for m in VARIANTS:
        for init in (EMPTY_INIT, CHECKERBOARD_EVEN, InitialState("random")):
            assert config_admissible(m, initial_grid(m, t, init, make_rng(3)))


@pytest.mark.parametrize("m", VARIANTS, ids=lambda m: m.variant.value)
def test_determinism(m):
    t = Torus(6, 6)
    a = Chain(m, t, InitialState("random"), seed=9, cluster_every=2).advance(50).grid
    b = Chain(m, t, InitialState("random"), seed=9, cluster_every=2).advance(50).grid
    assert np.array_equal(a, b, equal_nan=True)
    c = Chain(m, t, InitialState("random"), seed=10, cluster_every=2).advance(50).grid
    assert not np.array_equal(a, c, equal_nan=True)


def test_chunking_invariant():
    # splitting a run into pieces consumes the same uniforms
    m, t = VARIANTS[0], Torus(4, 4)
    a = Chain(m, t, seed=1, cluster_every=1).advance(30).grid
    ch = Chain(m, t, seed=1, cluster_every=1)
    for _ in range(3):
        ch.advance(10)
    assert np.array_equal(a, ch.grid)


@pytest.mark.parametrize("m", VARIANTS, ids=lambda m: m.variant.value)
def test_single_updates_stay_admissible(m, rng):
    t = Torus(6, 4)
    cfg = Configuration(m, initial_grid(m, t, InitialState("random"), rng))
    for k in range(2000):
        i = t.site(int(rng.integers(t.n_sites)))
        cfg = heat_bath_update(m, cfg, i, rng)
        assert config_admissible(m, cfg.states)
        if k % 100 == 0:
            new = cluster_transform(m, cfg, rng)
            assert np.array_equal(new.occupied(), cfg.occupied())
            assert config_admissible(m, new.states)
            cfg = new


def test_free_site_conditional(rng):
    m = ModelSpec("diamond", 1, q=3)
    cfg = Configuration(m, np.zeros((4, 4), int))
    counts = Counter(int(heat_bath_update(m, cfg, (1, 1), rng).states[1, 1]) for _ in range(40000))
    for v in range(4):
        assert counts[v] / 40000 == pytest.approx(0.25, abs=0.01)


def test_forced_color_conditional(rng):
    m = ModelSpec("square", 2, q=3)
    g = np.zeros((4, 4), int)
    g[2, 2] = 3  # diagonal neighbor of (1, 1)
    cfg = Configuration(m, g)
    counts = Counter(int(heat_bath_update(m, cfg, (1, 1), rng).states[1, 1]) for _ in range(30000))
    assert set(counts) == {0, 3}
    assert counts[3] / 30000 == pytest.approx(2 / 3, abs=0.01)


def test_rotor_update_lands_in_window(rng):
    m = ModelSpec("rotor", 3, alpha=0.05)
    g = np.full((4, 4), np.nan)
    g[1, 0] = 0.98
    cfg = Configuration(m, g)
    vals = np.array([heat_bath_update(m, cfg, (0, 0), rng).states[0, 0] for _ in range(20000)])
    occ = vals[~np.isnan(vals)]
    d = np.minimum(np.abs(occ - 0.98) % 1, 1 - np.abs(occ - 0.98) % 1)
    assert (d < 0.05).all()
    # P(empty) = 1 / (1 + z * 0.1)
    assert np.isnan(vals).mean() == pytest.approx(1 / 1.3, abs=0.01)


def test_cluster_transform_recolors_whole_clusters(rng):
    m = ModelSpec("diamond", 1, q=5)
    g = np.zeros((6, 6), int)
    g[0:2, 0:3] = 2
    g[4, 4] = 1
    cfg = Configuration(m, g)
    labels, nc = occupied_clusters(cfg)
    assert nc == 2
    seen = set()
    for _ in range(200):
        new = cluster_transform(m, cfg, rng)
        block = new.states[0:2, 0:3]
        assert len(set(block.ravel())) == 1
        seen.add(int(block[0, 0]))
    assert seen == {1, 2, 3, 4, 5}
    empty = Configuration(m, np.zeros((4, 4), int))
    assert cluster_transform(m, empty, rng) == empty


def test_star_clusters_for_square():
    m = ModelSpec("square", 1, q=2)
    g = np.zeros((4, 4), int)
    g[0, 0] = g[1, 1] = 1
    _, nc = occupied_clusters(Configuration(m, g))
    assert nc == 1


@pytest.mark.parametrize("cluster_every", [0, 1])
def test_stationarity_small(cluster_every):
    m, t = ModelSpec("diamond", 1, q=2), Torus(2, 2)
    exact = site_marginal(m, t)
    ch = Chain(m, t, seed=4, cluster_every=cluster_every)
    tr = ch.trace([(0, 0)], 100_000)[:, 0]
    emp = np.bincount(tr, minlength=3) / len(tr)
    tv = 0.5 * sum(abs(emp[k] - float(exact[k])) for k in range(3))
    assert tv < 0.01


def test_color_symmetry_in_staggered_runs():
    m, t = ModelSpec("diamond", 0.5, q=4), Torus(8, 8)
    g = Chain(m, t, CHECKERBOARD_EVEN, seed=2, cluster_every=1).trace(list(t.sites()), 4000)
    occ = g[g > 0]
    freq = np.bincount(occ, minlength=5)[1:] / len(occ)
    assert np.allclose(freq, 0.25, atol=0.02)


def test_run_chain_records():
    m, t = ModelSpec("diamond", 2, q=2), Torus(4, 4)
    recs = list(run_chain(m, t, EMPTY_INIT, ChainSchedule(10, 100, 10, 1, seed=3)))
    assert len(recs) == 10
    for r in recs:
        assert r.density == pytest.approx((r.rho_even + r.rho_odd) / 2)
        assert sum(r.histogram.values()) == t.n_sites
        assert r.generator == "numpy.PCG64" and r.seed == 3
    assert [r.sweep for r in recs] == list(range(20, 111, 10))


def test_schedule_validation():
    with pytest.raises(ValueError):
        ChainSchedule(measure_every=0)
    with pytest.raises(ValueError):
        ChainSchedule(burn_in_sweeps=-1)


def test_set_model_only_changes_z():
    ch = Chain(ModelSpec("diamond", 1, q=2), Torus(4, 4))
    ch.set_model(ModelSpec("diamond", 3, q=2))
    with pytest.raises(ValueError):
        ch.set_model(ModelSpec("diamond", 3, q=3))
