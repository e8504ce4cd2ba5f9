import numpy as np
import pytest

from srds import build_grid


def test_1d_uniform_partition():
    g = build_grid(1, [1.0], [4])
    assert g.spacing == (0.25,)
    assert np.allclose(g.centers[:, 0], [0.125, 0.375, 0.625, 0.875])


def test_2d_counts_and_spacings():
    g = build_grid(2, [1.0, 2.0], [2, 4])
    assert g.n_total == 8
    assert g.spacing == (0.5, 0.5)


def test_unsupported_dimension():
    with pytest.raises(ValueError, match="unsupported dimension"):
        build_grid(3, [1.0, 1.0, 1.0], [4, 4, 4])


def test_nonpositive_extent():
    with pytest.raises(ValueError, match="extent"):
        build_grid(1, [0.0], [4])


def test_count_below_two():
    with pytest.raises(ValueError, match="< 2"):
        build_grid(1, [1.0], [1])


def test_measure_equals_sum_of_cell_volumes():
    g = build_grid(2, [1.5, 2.0], [3, 5])
    assert g.volume == pytest.approx(g.cell_volume * g.n_total, rel=1e-14)


def test_centers_tile_the_domain():
    g = build_grid(1, [2.0], [8])
    edges = np.concatenate([g.centers[:, 0] - g.spacing[0] / 2,
                            [g.centers[-1, 0] + g.spacing[0] / 2]])
    assert edges[0] == 0.0
    assert edges[-1] == pytest.approx(2.0, rel=1e-14)
    assert np.allclose(np.diff(edges), g.spacing[0])
