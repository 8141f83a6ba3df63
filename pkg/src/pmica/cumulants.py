"""Whitening, PCA reduction and sample moment / cumulant tensors.

Data matrices are ``(N, n)`` arrays with one sample per row.  Cumulants are
plug-in estimates: the cumulants of the empirical distribution, obtained from
sample moments through the partition formula

    kappa_{i1..id} = sum_pi (-1)^(|pi|-1) (|pi|-1)! prod_{B in pi} mu_{i_B}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .symtensor import MAX_ORDER, SymTensor, _encode, _layout

__all__ = [
    "RankDeficiencyError",
    "WhiteningResult",
    "whiten",
    "pca_reduce",
    "raw_moments",
    "moment_tensor",
    "cumulant_tensor",
    "cumulants_from_moments",
    "set_partitions",
]

# Caps the (block rows x monomials) work array at about 32 MB.
_BLOCK_BUDGET = 1 << 22


class RankDeficiencyError(ValueError):
    """Sample covariance is singular or numerically close to it."""


def _as_data(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"data must be a non-empty (N, n) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite values")
    return X


@dataclass(frozen=True)
class WhiteningResult:
    """Affine whitening ``x -> transform @ (x - mean)``.

    Attributes
    ----------
    whitened : ndarray (N, n)
    mean : ndarray (n,)
    transform : ndarray (n, n)
        Symmetric inverse square root of the sample covariance.
    covariance_sqrt : ndarray (n, n)
        Symmetric square root of the sample covariance; a fitted rotation
        ``Q`` gives the mixing estimate ``covariance_sqrt @ Q``.
    """

    whitened: np.ndarray
    mean: np.ndarray
    transform: np.ndarray
    covariance_sqrt: np.ndarray

    def apply(self, X):
        return (_as_data(X) - self.mean) @ self.transform

    def mixing(self, Q):
        return self.covariance_sqrt @ np.asarray(Q)


def whiten(X, rel_tol=1e-12):
    """Center and decorrelate ``X`` with the symmetric inverse square root.

    The covariance uses the ``1/N`` normalization, so the whitened sample has
    identity covariance under the same convention.

    Raises
    ------
    RankDeficiencyError
        If the smallest covariance eigenvalue is below ``rel_tol`` times the
        largest.  Reduce the dimension with :func:`pca_reduce` first.
    """
    X = _as_data(X)
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    w, V = np.linalg.eigh(cov)
    if w[-1] <= 0 or w[0] < rel_tol * w[-1]:
        raise RankDeficiencyError(
            f"sample covariance is rank deficient (eigenvalues {w[0]:.3e} .. {w[-1]:.3e}); "
            "reduce the dimension with pca_reduce (CLI: --pca k)")
    transform = (V / np.sqrt(w)) @ V.T
    sqrt = (V * np.sqrt(w)) @ V.T
    transform = (transform + transform.T) / 2
    sqrt = (sqrt + sqrt.T) / 2
    return WhiteningResult(Xc @ transform, mean, transform, sqrt)


def pca_reduce(X, k):
    """Project centered data onto its top ``k`` principal axes.

    Returns the ``(N, k)`` scores and the explained variance ratio.
    """
    X = _as_data(X)
    n = X.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    Xc = X - X.mean(axis=0)
    w, V = np.linalg.eigh(Xc.T @ Xc / X.shape[0])
    w = np.clip(w, 0.0, None)
    order = np.argsort(-w, kind="stable")
    total = w.sum()
    ratio = float(w[order[:k]].sum() / total) if total > 0 else 1.0
    return Xc @ V[:, order[:k]], ratio


@lru_cache(maxsize=None)
def _monomial_tree(n, d):
    """For each degree k, (parent position at degree k-1, appended column)."""
    levels = []
    prev = [()]
    for _ in range(d):
        parents, cols, cur = [], [], []
        for p, t in enumerate(prev):
            for j in range(t[-1] if t else 0, n):
                parents.append(p)
                cols.append(j)
                cur.append(t + (j,))
        levels.append((np.array(parents), np.array(cols)))
        prev = cur
    return tuple(levels)


def raw_moments(X, d):
    """Sample moments of every order ``1..d`` in canonical storage.

    Returns a list whose ``k-1``-th element holds the canonical entries of
    ``(1/N) sum_r x_r^{(x) k}``.  One pass over the rows, in fixed-size
    blocks summed in a fixed order.
    """
    X = _as_data(X)
    N, n = X.shape
    if not 1 <= d <= MAX_ORDER:
        raise ValueError(f"order must be in [1, {MAX_ORDER}]")
    tree = _monomial_tree(n, d)
    widest = max(len(p) for p, _ in tree)
    block = max(256, _BLOCK_BUDGET // widest)
    sums = [np.zeros(len(p)) for p, _ in tree]
    for start in range(0, N, block):
        xb = X[start:start + block]
        prod = np.ones((xb.shape[0], 1))
        for k, (parents, cols) in enumerate(tree):
            prod = prod[:, parents] * xb[:, cols]
            sums[k] += prod.sum(axis=0)
    return [s / N for s in sums]


def moment_tensor(X, d):
    """Sample moment tensor ``(1/N) sum_r x_r^{(x) d}``."""
    X = _as_data(X)
    if not 2 <= d <= MAX_ORDER:
        raise ValueError(f"order must be in [2, {MAX_ORDER}]")
    return SymTensor(raw_moments(X, d)[-1], d, X.shape[1])


def set_partitions(d):
    """All set partitions of ``range(d)`` as tuples of blocks (cached)."""
    return _set_partitions(d)


@lru_cache(maxsize=None)
def _set_partitions(d):
    parts = [[]]
    for e in range(d):
        nxt = []
        for p in parts:
            for b in range(len(p)):
                nxt.append(p[:b] + [p[b] + (e,)] + p[b + 1:])
            nxt.append(p + [(e,)])
        parts = nxt
    return tuple(tuple(p) for p in parts)


def cumulants_from_moments(moments, n):
    """Order-``d`` cumulant tensor from raw moments of orders ``1..d``.

    ``moments`` is the list returned by :func:`raw_moments`.  Every set
    partition of the ``d`` index positions contributes; a block of
    positions picks out a sorted sub-tuple whose moment is looked up in the
    table of the matching order.
    """
    d = len(moments)
    if not 2 <= d <= MAX_ORDER:
        raise ValueError(f"order must be in [2, {MAX_ORDER}]")
    idx = _layout(n, d).indices
    codes = [None] + [_layout(n, k).codes if k >= 2 else np.arange(n) for k in range(1, d + 1)]
    lookup = {}

    def block_values(block):
        if block not in lookup:
            sub = idx[:, list(block)]
            k = len(block)
            pos = np.searchsorted(codes[k], _encode(sub, n)) if k >= 2 else sub[:, 0]
            lookup[block] = np.asarray(moments[k - 1])[pos]
        return lookup[block]

    out = np.zeros(len(idx))
    for part in set_partitions(d):
        m = len(part)
        term = block_values(part[0]).copy()
        for block in part[1:]:
            term *= block_values(block)
        out += (-1) ** (m - 1) * math.factorial(m - 1) * term
    return SymTensor(out, d, n)


def _closed_form(mom, n, d):
    """Cumulants of centered data for d <= 4."""
    if d in (2, 3):
        return SymTensor(mom[d - 1], d, n)
    cov = np.zeros((n, n))
    i2 = _layout(n, 2).indices
    cov[i2[:, 0], i2[:, 1]] = mom[1]
    cov[i2[:, 1], i2[:, 0]] = mom[1]
    i, j, k, l = _layout(n, 4).indices.T
    pairs = cov[i, j] * cov[k, l] + cov[i, k] * cov[j, l] + cov[i, l] * cov[j, k]
    return SymTensor(mom[3] - pairs, 4, n)


def cumulant_tensor(X, d, method="auto"):
    """Plug-in sample cumulant tensor of order ``d``.

    The data are centered first (cumulants of order >= 2 do not depend on
    the mean).  ``method="closed"`` uses the explicit formulas for
    ``d <= 4``, ``method="partition"`` the general partition sum;
    ``"auto"`` picks the closed form when available.
    """
    X = _as_data(X)
    if not 2 <= d <= MAX_ORDER:
        raise ValueError(f"order must be in [2, {MAX_ORDER}]")
    n = X.shape[1]
    mom = raw_moments(X - X.mean(axis=0), d)
    if method == "auto":
        method = "closed" if d <= 4 else "partition"
    if method == "closed":
        if d > 4:
            raise ValueError("closed form only available for d <= 4")
        return _closed_form(mom, n, d)
    if method == "partition":
        return cumulants_from_moments(mom, n)
    raise ValueError(f"unknown method {method!r}")
