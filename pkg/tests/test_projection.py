import numpy as np
import pytest

from treesliced import (
    SeedSpec,
    SplittingConfig,
    TreeSamplerConfig,
    TreeSystem,
    apply_transform,
    make_measure,
    point_line_distances,
    project,
    random_euclidean_transform,
    sample_concurrent,
    splitting_weights,
    transform_tree,
)
from treesliced.errors import DimensionError

SOFTMAX = SplittingConfig(delta=1.0)


def axis_tree(*dirs):
    dirs = np.asarray(dirs, dtype=float)
    return TreeSystem(np.zeros_like(dirs), dirs)


def test_point_line_distance_examples():
    assert point_line_distances(np.array([1.0, 1.0]), axis_tree([1.0, 0.0]))[0] == pytest.approx(1.0)
    assert point_line_distances(np.array([2.5, 0.0]), axis_tree([1.0, 0.0]))[0] == 0.0
    assert point_line_distances(np.array([3.0, 4.0]), axis_tree([0.0, 1.0]))[0] == pytest.approx(3.0)


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        point_line_distances(np.array([1.0, 2.0, 3.0]), axis_tree([1.0, 0.0]))


def test_softmax_of_zeros_is_uniform():
    # delta = 0 wipes out the distances regardless of the point
    t = axis_tree([1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)])
    w = splitting_weights(np.array([0.3, -0.2]), t, SplittingConfig(delta=0.0))
    np.testing.assert_allclose(w, np.full(3, 1.0 / 3.0), atol=1e-12)


def test_single_line_weight_is_one():
    w = splitting_weights(np.array([2.0, 5.0]), axis_tree([1.0, 0.0]), SOFTMAX)
    np.testing.assert_allclose(w, [1.0])


def test_handworked_softmax_weights():
    # distances (0, ln 2) with delta = 1 give exp values (1, 2)
    t = axis_tree([1.0, 0.0], [0.0, 1.0])
    y = np.array([np.log(2.0), 0.0])
    w = splitting_weights(y, t, SplittingConfig(delta=1.0))
    np.testing.assert_allclose(w, [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)


def test_weights_form_simplex():
    rng = np.random.default_rng(0)
    t = sample_concurrent(TreeSamplerConfig(k=5), 4, 1, SeedSpec(1))[0]
    for _ in range(20):
        w = splitting_weights(rng.normal(size=4), t, SplittingConfig(delta=-7.0))
        assert np.all(w >= 0)
        assert abs(w.sum() - 1.0) <= 1e-12


def test_project_single_line_atom():
    m = make_measure([[2.0, 0.0]])
    p = project(m, axis_tree([1.0, 0.0]), SOFTMAX)
    np.testing.assert_allclose(p.coords, [[2.0]])
    np.testing.assert_allclose(p.masses, [[1.0]])


def test_project_mass_conservation():
    rng = np.random.default_rng(2)
    m = make_measure(rng.normal(size=(17, 3)), rng.uniform(0.1, 1.0, 17))
    t = sample_concurrent(TreeSamplerConfig(k=4), 3, 1, SeedSpec(3))[0]
    p = project(m, t, SplittingConfig(delta=4.0))
    assert abs(p.total_mass - 1.0) <= 1e-10


def test_uniform_split_halves():
    m = make_measure([[1.0, 2.0], [-1.0, 0.5]])
    t = axis_tree([1.0, 0.0], [0.0, 1.0])
    p = project(m, t, SplittingConfig(delta=0.0))
    np.testing.assert_allclose(p.masses, np.full((2, 2), 0.25), atol=1e-13)
    q = project(m, t, SplittingConfig(mode="uniform", delta=123.0))
    np.testing.assert_allclose(q.masses, np.full((2, 2), 0.25), atol=1e-13)


def test_splitting_weights_rigid_invariance():
    rng = np.random.default_rng(4)
    cfg = SplittingConfig(delta=3.5)
    for s in range(10):
        d = int(rng.integers(2, 6))
        t = sample_concurrent(TreeSamplerConfig(k=3), d, 1, SeedSpec(5, s))[0]
        g = random_euclidean_transform(d, SeedSpec(6, s))
        y = rng.normal(size=d)
        w0 = splitting_weights(y, t, cfg)
        w1 = splitting_weights(g.apply_points(y), transform_tree(g, t), cfg)
        np.testing.assert_allclose(w1, w0, atol=1e-10)


def test_projection_equivariance():
    rng = np.random.default_rng(7)
    cfg = SplittingConfig(delta=-2.0)
    m = make_measure(rng.normal(size=(11, 5)), rng.uniform(0.2, 1.0, 11))
    t = sample_concurrent(TreeSamplerConfig(k=3), 5, 1, SeedSpec(8))[0]
    g = random_euclidean_transform(5, SeedSpec(9))
    p0 = project(m, t, cfg)
    p1 = project(apply_transform(g, m), transform_tree(g, t), cfg)
    np.testing.assert_allclose(p1.coords, p0.coords, atol=1e-9)
    np.testing.assert_allclose(p1.masses, p0.masses, atol=1e-12)


def test_scaling_homogeneity():
    rng = np.random.default_rng(10)
    c = 3.7
    m = make_measure(rng.normal(size=(8, 3)))
    t = sample_concurrent(TreeSamplerConfig(k=2), 3, 1, SeedSpec(11))[0]
    scaled_tree = TreeSystem(c * t.roots, t.directions)
    p0 = project(m, t, SplittingConfig(delta=5.0))
    p1 = project(
        make_measure(c * m.supports), scaled_tree, SplittingConfig(delta=5.0 / c)
    )
    np.testing.assert_allclose(p1.masses, p0.masses, atol=1e-12)
    np.testing.assert_allclose(p1.coords, c * p0.coords, rtol=1e-12, atol=1e-12)


def test_projected_measure_json_dump():
    m = make_measure([[0.5, 1.5]])
    p = project(m, axis_tree([1.0, 0.0], [0.0, 1.0]), SOFTMAX)
    import json

    payload = json.loads(p.to_json())
    assert len(payload["coords"]) == 2
