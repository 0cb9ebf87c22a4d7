"""Exact optimal-transport oracles for evaluation and testing.

Two exact solvers: a linear-assignment path for equal-size uniform clouds
(the flow-evaluation metric) and a small-instance transportation LP for
arbitrary weights and cost matrices (the brute-force oracle that validates
the tree closed form).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .errors import MassError, ScaleError, SizeError

LP_SIZE_CAP = 10_000


def exact_wp_assignment(X: np.ndarray, Y: np.ndarray, p: float = 2.0) -> float:
    """Exact W_p between uniform equal-size clouds via linear assignment.

    Costs are ||x_i - y_j||_p^p; the optimal coupling of two uniform
    equal-size measures is a permutation, so the assignment optimum equals
    the transport optimum. Returns (min total / n)^(1/p).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise SizeError(f"clouds must have equal shapes, got {X.shape} vs {Y.shape}")
    if p < 1:
        raise SizeError(f"order p must be >= 1, got {p}")
    diff = X[:, None, :] - Y[None, :, :]
    if p == 2:
        cost = np.einsum("ijd,ijd->ij", diff, diff)
    else:
        cost = np.sum(np.abs(diff) ** p, axis=2)
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    return (total / X.shape[0]) ** (1.0 / p)


def exact_w1_lp(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> float:
    """Exact transportation-LP optimum: min <C, plan> with given marginals.

    Intended as a small-instance oracle (n * m <= 10_000); raises
    :class:`ScaleError` beyond that cap and :class:`MassError` when the
    marginals disagree.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    C = np.asarray(C, dtype=np.float64)
    n, m = C.shape
    if a.shape != (n,) or b.shape != (m,):
        raise SizeError(f"marginals ({a.shape}, {b.shape}) do not match cost {C.shape}")
    if n * m > LP_SIZE_CAP:
        raise ScaleError(f"instance {n}x{m} exceeds the oracle cap of {LP_SIZE_CAP}")
    if np.any(C < 0) or not np.all(np.isfinite(C)):
        raise SizeError("cost matrix must be finite and non-negative")
    if abs(float(a.sum()) - float(b.sum())) > 1e-8:
        raise MassError(f"marginal masses differ: {a.sum()!r} vs {b.sum()!r}")
    # row-sum constraints for the source, column sums for the target; one
    # constraint is redundant and dropped for numerical robustness
    n_var = n * m
    rows = []
    rhs = []
    for i in range(n):
        row = np.zeros(n_var)
        row[i * m : (i + 1) * m] = 1.0
        rows.append(row)
        rhs.append(a[i])
    for j in range(m - 1):
        col = np.zeros(n_var)
        col[j::m] = 1.0
        rows.append(col)
        rhs.append(b[j])
    res = linprog(
        C.ravel(),
        A_eq=np.asarray(rows),
        b_eq=np.asarray(rhs),
        bounds=(0, None),
        method="highs",
        # default feasibility slack (1e-7) lets plans undercut the true
        # optimum by ~1e-8; this is an oracle, so run it tight
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if not res.success:
        raise ScaleError(f"transportation LP failed: {res.message}")
    return float(res.fun)
