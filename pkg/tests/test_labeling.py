import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import FIG5B
from reference import once_literal, reference_labeling, reference_map
from volgeom.fixtures import random_labels
from volgeom.labeling import (
    as_segmentation,
    disconnected_segments,
    extract_full,
    label_0cells,
    label_3cells,
    label_components,
    once,
    signature,
)
from volgeom.topogrid import GridShape, cell_order, gamma
from volgeom.verify import check_isomorphic


@pytest.mark.parametrize(
    "x, y",
    [
        ((1, 2, 1, 3), (2, 3, 0, 0)),
        ((5, 5), (0, 0)),
        ((0, 0, 7, 0, 0, 0), (7, 0, 0, 0, 0, 0)),
    ],
)
def test_once(x, y):
    assert once(x) == y


def test_once_rejects_bad_length():
    with pytest.raises(ValueError):
        once((1, 2, 3))


@given(st.lists(st.integers(0, 5), min_size=6, max_size=6))
def test_once_matches_literal(x):
    lit = once_literal(x)
    assert once(x) == lit + (0,) * (6 - len(lit))


def test_label_3cells_fig5(fig5):
    tau, n = label_3cells(fig5)
    assert n == 6
    threes = tau.order_mask(3)
    np.testing.assert_array_equal(tau.labels[threes], FIG5B[threes])
    assert not tau.labels[~threes].any()


def test_label_3cells_small():
    tau, n = label_3cells(np.ones((2, 2, 2), dtype=np.uint32))
    assert n == 1 and int((tau.labels == 1).sum()) == 8
    tau, n = label_3cells(np.full((1, 1, 1), 9, dtype=np.uint32))
    assert n == 9 and tau[(1, 1, 1)] == 9


def test_segmentation_rejects_zero():
    with pytest.raises(ValueError):
        as_segmentation(np.zeros((2, 2, 2), dtype=np.uint32))
    with pytest.raises(ValueError):
        as_segmentation(np.ones((2, 2), dtype=np.uint32))


def test_signature_examples(fig5):
    tau, _ = label_3cells(np.array([[[1]], [[2]]], dtype=np.uint32))
    assert signature((2, 1, 1), tau) == (1, 2)
    tau, _ = label_3cells(np.full((2, 1, 1), 4, dtype=np.uint32))
    assert signature((2, 1, 1), tau) == (0, 0)

    full = extract_full(fig5)
    # the four face neighbors of this edge pair up
    neigh = [full.tau[u] for u in gamma((4, 4, 1), full.tau.shape)]
    a, b, c, d = sorted(neigh)
    assert a == b != c == d
    assert signature((4, 4, 1), full.tau) == (0, 0, 0, 0)
    assert full.tau[(4, 4, 1)] == 0


def test_fig5_faces(fig5):
    tau, _ = label_3cells(fig5)
    n, alpha = label_components(tau, 2)
    assert n == 7
    assert {tuple(r) for r in alpha.rows.tolist()} == {
        (1, 2), (1, 3), (1, 4), (2, 5), (3, 6), (4, 5), (4, 6)
    }
    n1, alpha1 = label_components(tau, 1)
    assert n1 == 2
    n0, alpha0 = label_0cells(tau)
    assert n0 == 0 and len(alpha0) == 0


def test_single_face_component():
    tau, _ = label_3cells(np.array([[[1]], [[2]]], dtype=np.uint32))
    n, alpha = label_components(tau, 2)
    assert n == 1
    assert alpha.rows.tolist() == [[1, 2]]


def test_label_components_rejects_order():
    tau, _ = label_3cells(np.ones((2, 2, 2), dtype=np.uint32))
    with pytest.raises(ValueError):
        label_components(tau, 3)


def test_active_center_point():
    # four segments; brute force shows four curves meeting at the center corner
    sigma = np.array([[[1, 1], [2, 2]], [[3, 4], [3, 4]]], dtype=np.uint32)
    labels, bounded = reference_labeling(sigma)
    assert labels[(2, 2, 2)] != 0
    result = extract_full(sigma)
    assert result.tau[(2, 2, 2)] == 1
    assert result.counts[0] == 1
    assert len(result.neighborhoods[0].bounded(1)) == 4


def test_uniform_volume_has_no_boundaries():
    result = extract_full(np.full((3, 2, 4), 7, dtype=np.uint32))
    assert result.counts == {0: 0, 1: 0, 2: 0}
    result = extract_full(np.full((1, 1, 1), 3, dtype=np.uint32))
    assert result.counts == {0: 0, 1: 0, 2: 0}
    assert result.tau.labels.tolist() == [[[3]]]


def test_fig5_matches_reference_table(fig5):
    result = extract_full(fig5)
    assert check_isomorphic(result.tau, FIG5B)


def _audit(sigma):
    result = extract_full(sigma)
    tau = result.tau
    shape = tau.shape
    for t in shape.cells():
        c = cell_order(t)
        if c == 3:
            continue
        theta = once_literal([tau[u] for u in gamma(t, shape)])
        label = tau[t]
        assert (label != 0) == bool(theta), t
        if label:
            assert tuple(result.neighborhoods[c].bounded(label)) == theta, t
    return result


def test_definition_audit_random():
    rng = np.random.default_rng(7)
    for seed in range(40):
        shape = tuple(rng.integers(1, 7, 3))
        sigma = random_labels(shape, int(rng.integers(1, 6)), seed=seed)
        result = _audit(sigma)
        assert check_isomorphic(result.tau, reference_map(sigma)), (shape, seed)


def test_table_rows_strictly_ascending():
    sigma = random_labels((6, 6, 6), 5, seed=3)
    result = extract_full(sigma)
    for c, table in result.neighborhoods.items():
        for q in range(1, len(table) + 1):
            row = table.bounded(q)
            assert row == sorted(set(row)) and row


volumes = arrays(
    np.uint32,
    st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4)),
    elements=st.integers(1, 4),
)


@settings(max_examples=60, deadline=None)
@given(volumes, st.permutations([11, 12, 13, 14]))
def test_relabeling_segments_gives_isomorphic_map(sigma, perm):
    mapped = np.array(perm, dtype=np.uint32)[sigma - 1]
    a = extract_full(sigma)
    b = extract_full(mapped)
    assert a.counts == b.counts
    assert check_isomorphic(a.tau, b.tau)


@settings(max_examples=60, deadline=None)
@given(volumes)
def test_components_match_reference(sigma):
    assert check_isomorphic(extract_full(sigma).tau, reference_map(sigma))


def test_disconnected_segments():
    sigma = np.array([[[1]], [[2]], [[1]]], dtype=np.uint32)
    assert disconnected_segments(sigma) == [1]
    assert disconnected_segments(np.ones((2, 2, 2), dtype=np.uint32)) == []


def test_extract_full_runtime_roughly_linear():
    import time

    from volgeom.fixtures import random_segmentation

    def best(sigma):
        times = []
        for _ in range(3):
            start = time.perf_counter()
            extract_full(sigma)
            times.append(time.perf_counter() - start)
        return min(times)

    small = random_segmentation((40, 40, 40), 40, seed=1)
    large = random_segmentation((40, 40, 80), 80, seed=1)
    assert best(large) <= 2.5 * best(small)
