"""Identifiability certificates for tensors with a PMI or diagonal zero pattern.

A tensor ``T`` in ``V_pmi`` has a unique orthogonal eigenbasis (up to signed
permutation) exactly when a per-pair polynomial condition holds on every
two-index slice.  The conditions are known for orders 2 through 6; for
diagonal tensors they are known for every order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .subspace import DIAG, PMI, contains
from .symtensor import diagonal_entries

__all__ = [
    "GenericityReport",
    "UnsupportedOrderError",
    "PatternMembershipError",
    "binary_slice",
    "is_generic_pmi",
    "is_generic_diag",
]

MAX_PMI_ORDER = 6


class UnsupportedOrderError(ValueError):
    pass


class PatternMembershipError(ValueError):
    pass


@dataclass
class GenericityReport:
    """Outcome of a genericity test.

    ``witness`` is ``None`` for generic tensors; otherwise it names the
    failing pair (1-based), the condition and its normalized value.
    ``margin`` is the smallest normalized condition value over all pairs.
    """

    generic: bool
    order: int
    margin: float
    witness: dict | None = None
    checks: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"generic": self.generic, "order": self.order,
                "witness": self.witness, "margin": self.margin}


def binary_slice(T, i, j):
    """Return ``(t_0, ..., t_d)`` where ``t_k`` has ``k`` copies of ``j`` and ``d-k`` of ``i``."""
    n, d = T.dim, T.order
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for dim {n}")
    if i == j:
        raise ValueError("binary slice needs two distinct indices")
    return np.array([T[(i,) * (d - k) + (j,) * k] for k in range(d + 1)])


def _pair_conditions(t, d):
    """Named condition values on a scale-normalized slice; all must be nonzero."""
    if d in (2, 4):
        return [("t0 - td", t[0] - t[d])]
    if d == 5:
        q = (t[0] ** 2 - 2 * t[0] * t[2] - 8 * t[2] ** 2 - 8 * t[3] ** 2
             - 2 * t[3] * t[5] + t[5] ** 2)
        return [("t0^2-2t0t2-8t2^2-8t3^2-2t3t5+t5^2", q)]
    if d == 6:
        return [("t0-5t2-5t4+t6", t[0] - 5 * t[2] - 5 * t[4] + t[6]),
                ("t0+5t2-5t4-t6", t[0] + 5 * t[2] - 5 * t[4] - t[6])]
    raise UnsupportedOrderError(d)


def _zero_count_report(T, tol):
    """Odd-order test: at most one diagonal entry may vanish."""
    diag = diagonal_entries(T)
    scale = float(np.max(np.abs(T.values))) or 1.0
    rel = np.abs(diag) / scale
    zeros = np.flatnonzero(rel <= tol)
    checks = [{"pair": [a + 1, b + 1], "condition": "max(|t0|, |td|)",
               "value": float(max(rel[a], rel[b]))}
              for a, b in itertools.combinations(range(T.dim), 2)]
    margin = min((c["value"] for c in checks), default=np.inf)
    if len(zeros) >= 2:
        a, b = int(zeros[0]), int(zeros[1])
        witness = {"pair": [a + 1, b + 1], "condition": "t0 = td = 0",
                   "value": float(max(rel[a], rel[b]))}
        return GenericityReport(False, T.order, float(margin), witness, checks)
    return GenericityReport(True, T.order, float(margin), None, checks)


def _diag_difference(t, d):
    return [("t0 - td", t[0] - t[d])]


def _pairwise_report(T, tol, conditions=_pair_conditions):
    d = T.order
    checks = []
    witness = None
    for a, b in itertools.combinations(range(T.dim), 2):
        t = binary_slice(T, a, b)
        scale = np.max(np.abs(t))
        t = t / scale if scale > 0 else t
        for name, value in conditions(t, d):
            rec = {"pair": [a + 1, b + 1], "condition": name, "value": float(value)}
            checks.append(rec)
            if abs(value) <= tol and witness is None:
                witness = rec
    margin = min((abs(c["value"]) for c in checks), default=np.inf)
    return GenericityReport(witness is None, d, float(margin), witness, checks)


def is_generic_pmi(T, tol=1e-8, membership_tol=1e-8):
    """Decide whether ``T`` in ``V_pmi`` has a unique orthogonal eigenbasis.

    Order 2 and 4: diagonal entries pairwise distinct.  Order 3: at most one
    zero diagonal entry.  Order 5: the per-pair quadratic
    ``t0^2 - 2 t0 t2 - 8 t2^2 - 8 t3^2 - 2 t3 t5 + t5^2`` is nonzero.
    Order 6: both ``t0 - 5 t2 - 5 t4 + t6`` and ``t0 + 5 t2 - 5 t4 - t6``
    are nonzero.  Pair conditions are evaluated on slices divided by their
    largest absolute entry; zero tests on diagonal entries use the largest
    absolute entry of ``T``.

    Raises
    ------
    UnsupportedOrderError
        For ``d >= 7``, where the conditions are not known in closed form.
    PatternMembershipError
        If ``T`` is not in ``V_pmi`` within ``membership_tol``.
    """
    d = T.order
    if d > MAX_PMI_ORDER:
        raise UnsupportedOrderError(
            f"genericity conditions in V_pmi are only known for d <= {MAX_PMI_ORDER}; "
            f"d = {d} is an open problem (expected: binomial(n, 2) irreducible "
            f"polynomials of degree d - 3 = {d - 3})")
    if not contains(T, PMI, membership_tol):
        raise PatternMembershipError("tensor is not in V_pmi within tolerance")
    if d == 3:
        return _zero_count_report(T, tol)
    return _pairwise_report(T, tol)


def is_generic_diag(T, tol=1e-8, membership_tol=1e-8):
    """Genericity for diagonal tensors of any supported order.

    Even order: diagonal entries pairwise distinct.  Odd order: at most one
    zero diagonal entry.
    """
    if not contains(T, DIAG, membership_tol):
        raise PatternMembershipError("tensor is not in V_diag within tolerance")
    if T.order % 2:
        return _zero_count_report(T, tol)
    return _pairwise_report(T, tol, _diag_difference)
