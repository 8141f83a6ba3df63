"""Goodness-of-fit and recovery metrics."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .optim import objective
from .subspace import DIAG, PMI, project_complement
from .symtensor import diagonal_entries, frobenius, orthogonal_action

__all__ = [
    "Scorecard",
    "distance_to_subspace",
    "gap_and_offdiag",
    "sp_matched_error",
    "signed_permutations",
    "scorecard",
]


def distance_to_subspace(Q, K, V):
    """Relative residual ``||P_{V-perp}(Q^T . K)||_F / ||K||_F``, a number in [0, 1].

    Raises
    ------
    ValueError
        If ``K`` is the zero tensor.
    """
    norm = frobenius(K)
    if norm == 0:
        raise ValueError("distance is undefined for the zero tensor")
    return min(1.0, math.sqrt(max(objective(Q, K, V), 0.0)) / norm)


def gap_and_offdiag(K):
    """``(min_{i<j} |K_iiii - K_jjjj|, ||P_{V_diag-perp} K||_F)`` for an order-4 tensor.

    For a single coordinate the gap is ``inf``.
    """
    if K.order != 4:
        raise ValueError(f"gap_and_offdiag needs an order-4 tensor, got order {K.order}")
    diag = diagonal_entries(K)
    gap = min((abs(a - b) for a, b in itertools.combinations(diag, 2)), default=math.inf)
    return float(gap), frobenius(project_complement(K, DIAG))


def sp_matched_error(Q_hat, Q_true):
    """Distance between two orthogonal matrices up to a signed permutation.

    Returns ``(error, R)`` with ``R`` the signed permutation minimizing
    ``||Q_hat - Q_true R||_F``.  Because both matrices are orthogonal this
    equals maximizing ``sum_i R_{i s(i)} M_{i s(i)}`` over ``M = Q_true^T Q_hat``,
    a linear assignment on ``|M|`` with signs taken from ``M`` (zero counts
    as positive).
    """
    Q_hat = np.asarray(Q_hat, dtype=np.float64)
    Q_true = np.asarray(Q_true, dtype=np.float64)
    if Q_hat.shape != Q_true.shape or Q_hat.ndim != 2 or Q_hat.shape[0] != Q_hat.shape[1]:
        raise ValueError(f"shape mismatch: {Q_hat.shape} vs {Q_true.shape}")
    M = Q_true.T @ Q_hat
    rows, cols = linear_sum_assignment(-np.abs(M))
    R = np.zeros_like(M)
    R[rows, cols] = np.where(M[rows, cols] < 0, -1.0, 1.0)
    return float(np.linalg.norm(Q_hat - Q_true @ R)), R


def signed_permutations(n):
    """Iterate over all ``2^n n!`` signed permutation matrices (small ``n`` only)."""
    eye = np.eye(n)
    for perm in itertools.permutations(range(n)):
        P = eye[:, perm]
        for signs in itertools.product((1.0, -1.0), repeat=n):
            yield P * np.array(signs)


@dataclass
class Scorecard:
    """Fit diagnostics of a rotation ``Q`` for a cumulant tensor ``K``.

    ``gap4_min`` and ``offdiag_norm`` describe the rotated tensor
    ``Q^T . K`` and are only filled in for order 4.
    """

    distance_to_independent: float
    distance_to_pmi: float
    gap4_min: float | None = None
    offdiag_norm: float | None = None
    sp_error: float | None = None

    def to_dict(self):
        out = asdict(self)
        if out["gap4_min"] is not None and math.isinf(out["gap4_min"]):
            out["gap4_min"] = None
        return out


def scorecard(Q, K, Q_true=None):
    dist_ind = distance_to_subspace(Q, K, DIAG)
    dist_pmi = distance_to_subspace(Q, K, PMI)
    gap = off = None
    if K.order == 4:
        gap, off = gap_and_offdiag(orthogonal_action(np.asarray(Q).T, K, atol=1e-6))
    err = None if Q_true is None else sp_matched_error(Q, Q_true)[0]
    return Scorecard(dist_ind, dist_pmi, gap, off, err)
