import numpy as np
import pytest

from wrlattice.lattice import (
    Adjacency,
    Torus,
    local_pattern,
    neighbor_table,
    neighbors,
    plaquette_sites,
    reflected_corners,
)
from wrlattice.model import Color, Configuration, ModelSpec, EMPTY


@pytest.mark.parametrize("dims", [(2, 2), (4, 6), (6, 4), (8, 8)])
@pytest.mark.parametrize("kind", [Adjacency.NN, Adjacency.STAR])
def test_neighbors_symmetric(dims, kind):
    t = Torus(*dims)
    for i in t.sites():
        for j in neighbors(t, i, kind):
            assert i in neighbors(t, j, kind)
            assert j != i


def test_neighbor_counts():
    t = Torus(4, 4)
    assert len(neighbors(t, (0, 0))) == 4
    assert len(neighbors(t, (0, 0), Adjacency.STAR)) == 8
    # on a 2x2 torus left and right neighbors coincide
    assert len(neighbors(Torus(2, 2), (0, 0))) == 2
    table, cnt = neighbor_table(t)
    assert table.shape == (16, 4) and (cnt == 4).all()


@pytest.mark.parametrize("dims", [(3, 4), (4, 5), (0, 2), (1, 1)])
def test_torus_rejects_odd_or_tiny(dims):
    with pytest.raises(ValueError):
        Torus(*dims)


def test_index_roundtrip():
    t = Torus(6, 4)
    for s in range(t.n_sites):
        assert t.index(t.site(s)) == s
    assert t.wrap(-1, 4) == (5, 0)


def _checkerboard(t, parity=0):
    return (t.parity_mask(parity)).astype(np.int32)


def test_local_pattern_checkerboard():
    t = Torus(4, 4)
    cfg = Configuration(ModelSpec("diamond", 1, q=1), _checkerboard(t))
    want = {(0, 0): Color(1), (1, 0): EMPTY, (0, 1): EMPTY, (1, 1): Color(1)}
    for i in [(0, 0), (1, 0), (0, 1), (1, 1), (3, 2)]:
        assert local_pattern(t, cfg, i) == want


def test_local_pattern_constant():
    t = Torus(4, 6)
    cfg = Configuration(ModelSpec("diamond", 1, q=3), np.full(t.shape, 2))
    for i in t.sites():
        assert set(local_pattern(t, cfg, i).values()) == {Color(2)}


def test_reflection_flips_by_parity():
    t = Torus(4, 4)
    p = plaquette_sites(t, (1, 0))
    # corner (0,0) of the reflected read sits at the right-hand site
    assert p[(0, 0)] == (2, 0) and p[(1, 0)] == (1, 0)
    p = plaquette_sites(t, (1, 1))
    assert p[(0, 0)] == (2, 2) and p[(1, 1)] == (1, 1)


def test_reflected_corners_matches_local_pattern(rng):
    t = Torus(6, 4)
    arr = rng.integers(0, 9, size=t.shape)
    corners = reflected_corners(arr)
    for i in t.sites():
        for k, c in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
            x, y = plaquette_sites(t, i)[c]
            assert corners[k, i[0], i[1]] == arr[x, y]
