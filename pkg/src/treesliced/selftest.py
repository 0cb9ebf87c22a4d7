"""Built-in verification suites behind the ``selftest`` CLI subcommand.

Each suite runs a scaled-down version of the library's core correctness
properties at the documented tolerances: rigid-motion invariance, oracle
equivalence of the tree closed form against the exact transportation LP,
gradient agreement with finite differences, and the metric axioms under
shared randomness.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import SeedSpec, make_measure
from .estimators import EstimatorConfig, dbtsw, invariance_audit, sample_systems
from .exactot import exact_w1_lp
from .gradients import finite_difference_check
from .projection import SplittingConfig, project
from .treemetric import (
    pairwise_tree_distance,
    tree_wasserstein_concurrent,
    tree_wasserstein_general,
)
from .trees import CHAIN, CONCURRENT, TreeSamplerConfig


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str


def _random_pair(rng, n, m, d):
    mu = make_measure(rng.normal(size=(n, d)), rng.uniform(0.2, 1.0, n))
    nu = make_measure(rng.normal(size=(m, d)), rng.uniform(0.2, 1.0, m))
    return mu, nu


def _projected_atoms(pm):
    pts = [(l, pm.coords[l, i]) for l in range(pm.k) for i in range(pm.coords.shape[1])]
    masses = pm.masses.ravel()
    return pts, masses


def suite_invariance(seed: SeedSpec, trials: int = 30) -> list[CheckResult]:
    results = []
    for d in (2, 8, 32):
        rng = seed.child("inv", d).generator()
        mu, nu = _random_pair(rng, 24, 20, d)
        cfg = EstimatorConfig(
            "dbtsw",
            L=1,
            sampler=TreeSamplerConfig(k=min(4, d)),
            splitting=SplittingConfig(delta=10.0),
            seed=seed.child("inv-cfg", d),
        )
        dev = invariance_audit(mu, nu, cfg, trials=trials, seed=seed.child("inv-audit", d))
        results.append(
            CheckResult(
                "invariance",
                f"rigid-motion deviation, d={d}",
                dev <= 1e-8,
                f"max relative deviation {dev:.3e} (tolerance 1e-8)",
            )
        )
    return results


def suite_oracle(seed: SeedSpec, instances: int = 25) -> list[CheckResult]:
    results = []
    worst = {"concurrent": 0.0, "chain": 0.0, "fastpath": 0.0}
    for structure in (CONCURRENT, CHAIN):
        for trial in range(instances):
            rng = seed.child("oracle", structure, trial).generator()
            d = int(rng.integers(2, 5))
            k = int(rng.integers(1, 4))
            n = int(rng.integers(2, 8))
            m = int(rng.integers(2, 8))
            mu, nu = _random_pair(rng, n, m, d)
            cfg = EstimatorConfig(
                "dbtsw" if structure == CONCURRENT else "tswsl-chain",
                L=1,
                sampler=TreeSamplerConfig(k=k, structure=structure),
                splitting=SplittingConfig(delta=rng.uniform(-5, 5)),
                seed=seed.child("oracle-tree", structure, trial),
            )
            system = sample_systems(cfg, d)[0]
            p = project(mu, system, cfg.splitting)
            q = project(nu, system, cfg.splitting)
            value = tree_wasserstein_general(p, q, system)
            if structure == CONCURRENT:
                worst["fastpath"] = max(
                    worst["fastpath"], abs(value - tree_wasserstein_concurrent(p, q, system))
                )
            apts, am = _projected_atoms(p)
            bpts, bm = _projected_atoms(q)
            cost = np.array(
                [[pairwise_tree_distance(x, y, system) for y in bpts] for x in apts]
            )
            worst[structure] = max(worst[structure], abs(value - exact_w1_lp(am, bm, cost)))
    results.append(
        CheckResult(
            "oracle",
            "closed form vs transportation LP (concurrent)",
            worst["concurrent"] <= 1e-9,
            f"max abs deviation {worst['concurrent']:.3e} (tolerance 1e-9)",
        )
    )
    results.append(
        CheckResult(
            "oracle",
            "closed form vs transportation LP (chain)",
            worst["chain"] <= 1e-9,
            f"max abs deviation {worst['chain']:.3e} (tolerance 1e-9)",
        )
    )
    results.append(
        CheckResult(
            "oracle",
            "concurrent fast path vs general path",
            worst["fastpath"] <= 1e-10,
            f"max abs deviation {worst['fastpath']:.3e} (tolerance 1e-10)",
        )
    )
    return results


def suite_gradient(seed: SeedSpec, instances: int = 8) -> list[CheckResult]:
    worst = 0.0
    for trial in range(instances):
        rng = seed.child("grad", trial).generator()
        X = rng.normal(size=(12, 4))
        nu = make_measure(rng.normal(size=(10, 4)))
        cfg = EstimatorConfig(
            "dbtsw",
            L=8,
            sampler=TreeSamplerConfig(k=3),
            splitting=SplittingConfig(delta=10.0),
            seed=seed.child("grad-trees", trial),
        )
        trees = sample_systems(cfg, 4)
        err = finite_difference_check(X, np.full(12, 1 / 12), nu, trees, cfg.splitting, h=1e-5)
        worst = max(worst, err)
    return [
        CheckResult(
            "gradient",
            "analytic vs central differences",
            worst <= 1e-4,
            f"max relative error {worst:.3e} (tolerance 1e-4)",
        )
    ]


def suite_metric(seed: SeedSpec, triples: int = 20) -> list[CheckResult]:
    results = []
    rng = seed.child("metric").generator()
    sym_ok = True
    ident_worst = 0.0
    tri_worst = 0.0
    for trial in range(triples):
        d = int(rng.integers(2, 6))
        mu1, mu2 = _random_pair(rng, 12, 10, d)
        mu3 = make_measure(rng.normal(size=(11, d)))
        cfg = EstimatorConfig(
            "dbtsw",
            L=8,
            sampler=TreeSamplerConfig(k=2),
            splitting=SplittingConfig(delta=5.0),
            seed=seed.child("metric-trees", trial),
        )
        d12 = dbtsw(mu1, mu2, cfg).value
        d21 = dbtsw(mu2, mu1, cfg).value
        sym_ok = sym_ok and (d12 == d21)
        ident_worst = max(ident_worst, dbtsw(mu1, mu1, cfg).value)
        d13 = dbtsw(mu1, mu3, cfg).value
        d23 = dbtsw(mu2, mu3, cfg).value
        tri_worst = max(tri_worst, d13 - (d12 + d23))
    results.append(
        CheckResult("metric", "symmetry under shared trees", sym_ok, "exact equality required")
    )
    results.append(
        CheckResult(
            "metric",
            "identity of indiscernibles",
            ident_worst <= 1e-12,
            f"max self-distance {ident_worst:.3e} (tolerance 1e-12)",
        )
    )
    results.append(
        CheckResult(
            "metric",
            "triangle inequality",
            tri_worst <= 1e-9,
            f"max violation {tri_worst:.3e} (tolerance 1e-9)",
        )
    )
    return results


SUITES = {
    "invariance": suite_invariance,
    "oracle": suite_oracle,
    "gradient": suite_gradient,
    "metric": suite_metric,
}


def run_suites(names: list[str] | None = None, seed: SeedSpec | None = None) -> list[CheckResult]:
    seed = seed if seed is not None else SeedSpec(2024)
    results = []
    for name in names or sorted(SUITES):
        results.extend(SUITES[name](seed))
    return results
