import itertools

import pytest

from volgeom.topogrid import (
    GridBoundsError,
    GridShape,
    cell_order,
    connected,
    gamma,
    voxel_to_cell,
)


@pytest.mark.parametrize("t, order", [((1, 1, 1), 3), ((2, 3, 5), 2), ((2, 2, 2), 0), ((2, 1, 2), 1)])
def test_cell_order(t, order):
    assert cell_order(t) == order


def test_cell_order_out_of_grid():
    with pytest.raises(GridBoundsError):
        cell_order((6, 1, 1), GridShape(3, 3, 3))
    with pytest.raises(GridBoundsError):
        cell_order((0, 1, 1))


@pytest.mark.parametrize("r, t", [((1, 1, 1), (1, 1, 1)), ((2, 3, 1), (3, 5, 1)), ((3, 3, 2), (5, 5, 3))])
def test_voxel_to_cell(r, t):
    assert voxel_to_cell(r) == t


def test_voxel_to_cell_bounds():
    with pytest.raises(GridBoundsError):
        voxel_to_cell((4, 1, 1), GridShape(3, 3, 3))


def test_grid_shape():
    s = GridShape(3, 3, 2)
    assert s.topological == (5, 5, 3)
    with pytest.raises(ValueError):
        GridShape(0, 1, 1)


def test_gamma_face_has_two_voxels():
    assert gamma((2, 1, 1), GridShape(2, 1, 1)) == [(1, 1, 1), (3, 1, 1)]


def test_gamma_voxel_is_empty():
    assert gamma((1, 1, 1), GridShape(2, 2, 2)) == []


def test_gamma_corner_in_2x2x2():
    shape = GridShape(2, 2, 2)
    # enumerate +-1 along every axis by hand
    expected = []
    for axis in range(3):
        for step in (-1, 1):
            u = [2, 2, 2]
            u[axis] += step
            expected.append(tuple(u))
    got = gamma((2, 2, 2), shape)
    assert got == expected
    assert all(cell_order(u) == 1 for u in got)


def test_gamma_sizes_exhaustive():
    for dims in itertools.product(range(1, 5), repeat=3):
        shape = GridShape(*dims)
        for t in shape.cells():
            j = cell_order(t)
            g = gamma(t, shape)
            assert len(g) == (6 - 2 * j if j <= 2 else 0)
            assert all(shape.contains_cell(u) and cell_order(u) == j + 1 for u in g)


def _connected_brute(u, v, shape):
    return u != v and any(u in gamma(t, shape) and v in gamma(t, shape) for t in shape.cells())


def test_connected_faces_via_edge():
    shape = GridShape(2, 2, 1)
    assert connected((2, 1, 1), (2, 3, 1), shape)
    assert _connected_brute((2, 1, 1), (2, 3, 1), shape)


def test_connected_voxels_across_face():
    assert connected((1, 1, 1), (3, 1, 1), GridShape(2, 1, 1))


def test_zero_cells_never_connected():
    shape = GridShape(3, 3, 3)
    zeros = [t for t in shape.cells() if cell_order(t) == 0]
    assert not any(connected(u, v, shape) for u in zeros for v in zeros)


def test_connected_matches_brute_force():
    shape = GridShape(2, 3, 2)
    cells = list(shape.cells())
    for u in cells:
        for v in cells:
            c = connected(u, v, shape)
            assert c == _connected_brute(u, v, shape)
            assert c == connected(v, u, shape)
            if c:
                assert cell_order(u) == cell_order(v)
        assert not connected(u, u, shape)


def test_voxel_to_cell_bijective_onto_3cells():
    shape = GridShape(3, 2, 4)
    images = {voxel_to_cell(r) for r in itertools.product(*(range(1, n + 1) for n in shape.voxels))}
    threes = {t for t in shape.cells() if cell_order(t) == 3}
    assert images == threes
