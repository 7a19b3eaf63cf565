import numpy as np
import pytest

from btrcia.grid import build_grid, hilbert_positions, prolongate, restrict_averages


def test_build_grid_small():
    g = build_grid(2)
    assert g.num_cells == 4
    assert g.cell_volume == 1.0
    assert g.h == 1.0


def test_build_grid_256_cell_volume():
    g = build_grid(256)
    assert g.cell_volume == 6.103515625e-5


@pytest.mark.parametrize("n", [3, 0, -2, 12])
def test_build_grid_rejects_non_power_of_two(n):
    with pytest.raises(ValueError, match="power of two"):
        build_grid(n)


def test_hilbert_order_n1():
    g = build_grid(1)
    assert list(g.hilbert_order) == [0]


def test_hilbert_base_motif():
    # fixed convention: start lower-left, then up, right, down
    pos = hilbert_positions(2)
    assert [tuple(p) for p in pos] == [(0, 0), (1, 0), (1, 1), (0, 1)]


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
def test_hilbert_is_bijection(n):
    g = build_grid(n)
    assert sorted(g.hilbert_order) == list(range(n * n))
    assert np.array_equal(g.hilbert_order[g.hilbert_rank], np.arange(n * n))


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
def test_hilbert_consecutive_cells_are_edge_adjacent(n):
    pos = hilbert_positions(n)
    steps = np.abs(np.diff(pos, axis=0)).sum(axis=1)
    assert np.all(steps == 1)


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
def test_hilbert_center_spacing_is_h(n):
    g = build_grid(n)
    s1, s2 = g.cell_centers()
    d1 = np.diff(s1[g.hilbert_order])
    d2 = np.diff(s2[g.hilbert_order])
    assert np.allclose(np.hypot(d1, d2), g.h)


@pytest.mark.parametrize("n", [4, 8, 16, 32])
def test_hilbert_nesting(n):
    # every 2x2 block aligned to even coordinates fills four consecutive
    # ranks, and the blocks appear in the order of the half-resolution curve
    fine = hilbert_positions(n)
    coarse = hilbert_positions(n // 2)
    for r in range(n * n // 4):
        block = fine[4 * r : 4 * r + 4] // 2
        assert (block == block[0]).all()
        assert tuple(block[0]) == tuple(coarse[r])


def test_cells_are_square():
    g = build_grid(8)
    assert g.h * g.n == 2.0
    assert g.cell_volume == g.h * g.h


def test_prolongate_constant():
    out = prolongate(np.ones(4), 2, 8)
    assert out.shape == (64,)
    assert np.all(out == 1.0)


def test_prolongate_single_block():
    coarse = np.zeros(4)
    coarse[2 * 1 + 1] = 1.0  # row 1, col 1
    out = prolongate(coarse, 2, 8).reshape(8, 8)
    assert out[4:, 4:].sum() == 16
    assert out.sum() == 16


def test_prolongate_preserves_integral():
    rng = np.random.default_rng(7)
    coarse = rng.uniform(0, 1, 16)
    fine = prolongate(coarse, 4, 16)
    g4, g16 = build_grid(4), build_grid(16)
    assert np.isclose(g4.cell_volume * coarse.sum(), g16.cell_volume * fine.sum(), rtol=1e-14)


def test_prolongate_rejects_incompatible_sizes():
    with pytest.raises(ValueError, match="multiple"):
        prolongate(np.ones(64), 8, 4)


def test_restrict_constant():
    out = restrict_averages(np.full(64, 0.3), 8, 4)
    assert np.allclose(out, 0.3)


def test_restrict_block_average():
    fine = np.array([0.0, 0.0, 1.0, 1.0]).reshape(2, 2).ravel()
    out = restrict_averages(fine, 2, 1)
    assert out[0] == 0.5


def test_restrict_prolongate_roundtrip():
    rng = np.random.default_rng(3)
    coarse = rng.uniform(0, 1, 64)
    fine = prolongate(coarse, 8, 32)
    back = restrict_averages(fine, 32, 8)
    assert np.array_equal(back, coarse)


def test_restrict_rejects_incompatible_sizes():
    with pytest.raises(ValueError):
        restrict_averages(np.ones(36), 6, 2)
