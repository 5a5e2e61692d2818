"""Vietoris-Rips filtration and matrix-reduction barcodes."""

import math

import numpy as np
import pytest
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist

import _oracles
from tda_portfolio.persistence import (
    PersistenceDiagram,
    SimplexBudgetError,
    build_filtration,
    enclosing_radius,
    h0_mst,
    pairwise_distances,
    read_diagram_csv,
    reduce,
    vr_diagram,
    write_diagram_csv,
)


def random_cloud(rng, n, ambient):
    return rng.uniform(-1.0, 1.0, size=(n, ambient))


def test_reduction_matches_dense_oracle():
    rng = np.random.default_rng(42)
    for trial in range(25):
        n = int(rng.integers(3, 13))
        ambient = int(rng.integers(1, 4))
        hom_dim = 2 if trial % 5 == 0 and n <= 10 else 1
        pts = random_cloud(rng, n, ambient)
        dist = pairwise_distances(pts)
        radius = enclosing_radius(dist) if trial % 2 else 0.7 * enclosing_radius(dist)
        ours = vr_diagram(pts, max_homology_dim=hom_dim, max_radius=radius)
        expected = _oracles.dense_reduction_bars(dist, hom_dim, radius)
        assert ours.bars == tuple(expected)


def test_unit_square_barcode():
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    d = vr_diagram(sq, max_homology_dim=1)
    h1 = d.of_dim(1)
    assert len(h1) == 1
    assert h1[0][0] == pytest.approx(1.0, abs=1e-9)
    assert h1[0][1] == pytest.approx(math.sqrt(2.0), abs=1e-9)
    assert d.of_dim(0) == ((0.0, 1.0),) * 3 + ((0.0, math.inf),)


def test_circle_twenty_points_analytic_loop():
    theta = 2 * np.pi * np.arange(20) / 20
    pts = np.c_[np.cos(theta), np.sin(theta)]
    h1 = vr_diagram(pts, max_homology_dim=1).of_dim(1)
    assert len(h1) == 1
    assert h1[0][0] == pytest.approx(2 * math.sin(math.pi / 20), abs=1e-9)
    assert h1[0][1] == pytest.approx(2 * math.sin(7 * math.pi / 20), abs=1e-9)


def test_connected_components_match_spanning_tree():
    rng = np.random.default_rng(9)
    for _ in range(20):
        pts = random_cloud(rng, int(rng.integers(2, 30)), 3)
        dist = pairwise_distances(pts)
        mst_weights = np.sort(minimum_spanning_tree(dist).toarray().ravel())
        mst_weights = mst_weights[mst_weights > 0]
        diagram = h0_mst(dist)
        deaths = np.sort(diagram.finite(0)[:, 1])
        assert np.array_equal(deaths, mst_weights)
        assert diagram.infinite(0) == (0.0,)
        assert all(b == 0.0 for b, _, _ in diagram.bars)


def test_full_reduction_agrees_with_mst_shortcut():
    rng = np.random.default_rng(3)
    for _ in range(10):
        pts = random_cloud(rng, 9, 2)
        dist = pairwise_distances(pts)
        full = vr_diagram(pts, max_homology_dim=1)
        assert full.of_dim(0) == h0_mst(dist).of_dim(0)


def test_pairwise_distances_against_scipy():
    pts = np.random.default_rng(1).normal(size=(40, 4))
    ours = pairwise_distances(pts)
    ref = cdist(pts, pts)
    assert np.allclose(ours, ref, rtol=1e-12, atol=1e-12)
    assert np.array_equal(ours, ours.T)
    assert np.all(np.diag(ours) == 0.0)


def test_enclosing_radius_misses_no_finite_bars():
    # capping the filtration at the enclosing radius is lossless: past it
    # the complex is a cone and every remaining class is already resolved
    rng = np.random.default_rng(17)
    for _ in range(10):
        pts = random_cloud(rng, 10, 2)
        dist = pairwise_distances(pts)
        capped = vr_diagram(pts, max_homology_dim=1)
        wide = vr_diagram(pts, max_homology_dim=1, max_radius=float(dist.max()))
        assert capped.bars == wide.bars


def test_simplex_budget_enforced():
    pts = np.random.default_rng(0).normal(size=(40, 2))
    with pytest.raises(SimplexBudgetError, match="stride"):
        vr_diagram(pts, max_homology_dim=1, budget=200)


def test_degenerate_clouds():
    assert vr_diagram(np.array([[0.0, 0.0]])).bars == ((0.0, math.inf, 0),)
    # coincident points merge at radius zero; zero-length bars are dropped
    assert vr_diagram(np.zeros((4, 2))).bars == ((0.0, math.inf, 0),)
    with pytest.raises(ValueError, match="1 or 2"):
        vr_diagram(np.zeros((3, 2)), max_homology_dim=3)


def test_diagram_canonical_order_and_views():
    d = PersistenceDiagram(((0.5, 1.0, 1), (0.0, math.inf, 0), (0.0, 0.3, 0)))
    assert d.bars == ((0.0, 0.3, 0), (0.0, math.inf, 0), (0.5, 1.0, 1))
    assert d.of_dim(1) == ((0.5, 1.0),)
    assert d.finite(0).tolist() == [[0.0, 0.3]]
    assert d.infinite(0) == (0.0,)
    assert d.max_dim() == 1


def test_diagram_csv_round_trip(tmp_path):
    pts = np.random.default_rng(5).normal(size=(12, 2))
    d = vr_diagram(pts, max_homology_dim=1)
    path = tmp_path / "diagram.csv"
    write_diagram_csv(d, path)
    assert read_diagram_csv(path).bars == d.bars


def test_reduce_accepts_prebuilt_filtration():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    dist = pairwise_distances(pts)
    filtration = build_filtration(dist, max_dim=2, max_radius=enclosing_radius(dist))
    assert reduce(filtration).bars == vr_diagram(pts, max_homology_dim=1).bars
