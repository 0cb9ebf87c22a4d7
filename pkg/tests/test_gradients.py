"""Analytic gradient against the finite-difference oracle and hand cases."""

import numpy as np
import pytest

from treesliced import (
    EstimatorConfig,
    SeedSpec,
    SplittingConfig,
    TreeSamplerConfig,
    dbtsw,
    dbtsw_value_and_grad,
    finite_difference_check,
    make_measure,
    sample_chain,
)
from treesliced.errors import TreeStructureError
from treesliced.estimators import sample_systems
from treesliced.gradients import _value_only
from treesliced.projection import project

DELTA10 = SplittingConfig(delta=10.0)


def make_instance(seed, n=12, m=10, d=4, L=8, k=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    weights = np.full(n, 1.0 / n)
    nu = make_measure(rng.normal(size=(m, d)))
    cfg = EstimatorConfig(
        "dbtsw",
        L=L,
        sampler=TreeSamplerConfig(k=k),
        splitting=DELTA10,
        seed=SeedSpec(seed),
    )
    trees = sample_systems(cfg, d)
    return X, weights, nu, trees, cfg


def test_zero_at_global_minimum():
    X, weights, _, trees, cfg = make_instance(0)
    nu = make_measure(X, weights)
    report = dbtsw_value_and_grad(X, weights, nu, trees, cfg.splitting)
    assert report.value == 0.0
    np.testing.assert_array_equal(report.gradient, np.zeros_like(X))
    assert report.nondifferentiable_hits > 0


def test_finite_difference_agreement():
    worst = 0.0
    for seed in range(5):
        X, weights, nu, trees, cfg = make_instance(seed + 1)
        err = finite_difference_check(X, weights, nu, trees, cfg.splitting, h=1e-5)
        worst = max(worst, err)
    assert worst <= 1e-4


def test_single_atom_k1_closed_form():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=3), rng.normal(size=3)
    cfg = EstimatorConfig(
        "dbtsw", L=16, sampler=TreeSamplerConfig(k=1), splitting=DELTA10, seed=SeedSpec(3)
    )
    trees = sample_systems(cfg, 3)
    nu = make_measure(y[None])
    report = dbtsw_value_and_grad(x[None], np.array([1.0]), nu, trees, cfg.splitting)
    thetas = np.array([t.directions[0] for t in trees])
    proj = thetas @ (x - y)
    expected = np.mean(np.sign(proj)[:, None] * thetas, axis=0)
    np.testing.assert_allclose(report.gradient[0], expected, atol=1e-12)
    assert report.value == pytest.approx(np.mean(np.abs(proj)), rel=1e-12)


def test_value_matches_estimator():
    X, weights, nu, trees, cfg = make_instance(4)
    report = dbtsw_value_and_grad(X, weights, nu, trees, cfg.splitting)
    same = dbtsw(make_measure(X, weights), nu, cfg)
    assert abs(report.value - same.value) <= 1e-12


def test_translation_directional_derivative():
    X, weights, nu, trees, cfg = make_instance(5)
    rng = np.random.default_rng(6)
    a = rng.normal(size=X.shape[1])
    a /= np.linalg.norm(a)
    report = dbtsw_value_and_grad(X, weights, nu, trees, cfg.splitting)
    analytic = float(np.sum(report.gradient @ a))
    h = 1e-6
    targets = [(p.coords, p.masses) for p in (project(nu, t, cfg.splitting) for t in trees)]
    up = _value_only(X + h * a, weights, targets, trees, cfg.splitting)
    down = _value_only(X - h * a, weights, targets, trees, cfg.splitting)
    assert analytic == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-8)


def test_coarse_step_reports_larger_error_without_failing():
    X, weights, nu, trees, cfg = make_instance(7)
    fine = finite_difference_check(X, weights, nu, trees, cfg.splitting, h=1e-5)
    coarse = finite_difference_check(
        X, weights, nu, trees, cfg.splitting, h=1e-2, exclude_near_kinks=False
    )
    assert np.isfinite(coarse)
    assert coarse >= fine


def test_chain_trees_rejected():
    X, weights, nu, _, cfg = make_instance(8)
    chain = sample_chain(TreeSamplerConfig(k=2, structure="chain"), 4, 1, SeedSpec(9))
    with pytest.raises(TreeStructureError):
        dbtsw_value_and_grad(X, weights, nu, chain, cfg.splitting)


def test_uniform_split_gradient_checks():
    X, weights, nu, trees, _ = make_instance(10)
    cfg = SplittingConfig(mode="uniform", delta=0.0)
    err = finite_difference_check(X, weights, nu, trees, cfg, h=1e-5)
    assert err <= 1e-4


def test_gradient_finite_everywhere():
    X, weights, nu, trees, cfg = make_instance(11)
    # place one support exactly on the first tree's first line root
    X = X.copy()
    X[0] = trees[0].roots[0]
    report = dbtsw_value_and_grad(X, weights, nu, trees, cfg.splitting)
    assert np.all(np.isfinite(report.gradient))
    assert report.nondifferentiable_hits >= 1
