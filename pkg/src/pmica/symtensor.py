"""Real symmetric tensors in canonical (sorted multi-index) storage.

A symmetric tensor of order ``d`` on ``R^n`` is stored as one value per
non-decreasing index tuple, in lexicographic order (the order produced by
``itertools.combinations_with_replacement``).  Indices are 0-based in the
Python API and 1-based in the text format.

The Frobenius geometry is that of the full ``n**d`` array: every canonical
entry is weighted by the number of distinct permutations of its index tuple.
"""

from __future__ import annotations

import io
import itertools
import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "MAX_ORDER",
    "SymmetryError",
    "SymTensor",
    "canonical_indices",
    "diagonal_entries",
    "frobenius",
    "linear_action",
    "orthogonal_action",
    "rank_one_sum",
    "read_symtensor",
    "write_symtensor",
]

MAX_ORDER = 9
ORTHO_TOL = 1e-8


class SymmetryError(ValueError):
    """Raised when a dense array is not symmetric within tolerance."""


@dataclass(frozen=True)
class _Layout:
    indices: np.ndarray  # (m, d) sorted tuples, lexicographic
    codes: np.ndarray  # base-n code of each row, increasing
    multiplicity: np.ndarray  # (m,) number of distinct permutations
    diagonal: np.ndarray  # (n,) positions of (i, ..., i)


def _check_shape(order, dim):
    if not 2 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in [2, {MAX_ORDER}], got {order}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")


def _encode(idx, n):
    """Base-n code of index rows (last axis)."""
    weights = n ** np.arange(idx.shape[-1] - 1, -1, -1, dtype=np.int64)
    return idx.astype(np.int64) @ weights


@lru_cache(maxsize=None)
def _layout(n, d):
    idx = np.array(list(itertools.combinations_with_replacement(range(n), d)),
                   dtype=np.int64).reshape(-1, d)
    mult = np.empty(len(idx), dtype=np.float64)
    fact_d = math.factorial(d)
    for r, row in enumerate(idx):
        _, counts = np.unique(row, return_counts=True)
        mult[r] = fact_d // math.prod(math.factorial(c) for c in counts)
    codes = _encode(idx, n)
    diag = np.searchsorted(codes, _encode(np.repeat(np.arange(n)[:, None], d, axis=1), n))
    for arr in (idx, codes, mult, diag):
        arr.flags.writeable = False
    return _Layout(idx, codes, mult, diag)


@lru_cache(maxsize=None)
def _orbit_map(n, d):
    """Canonical position of every entry of the flattened dense array."""
    full = np.indices((n,) * d).reshape(d, -1).T
    full.sort(axis=1)
    pos = np.searchsorted(_layout(n, d).codes, _encode(full, n))
    pos.flags.writeable = False
    return pos


def canonical_indices(dim, order):
    """Return the ``(m, order)`` array of sorted index tuples, lexicographic."""
    _check_shape(order, dim)
    return _layout(dim, order).indices


class SymTensor:
    """Immutable symmetric tensor with canonical storage.

    Parameters
    ----------
    values : array_like, shape (binomial(dim + order - 1, order),)
        Canonical entries in lexicographic index order.
    order, dim : int
        Tensor order ``d`` and ambient dimension ``n``.
    """

    __slots__ = ("order", "dim", "values")

    def __init__(self, values, order, dim):
        _check_shape(order, dim)
        vals = np.array(values, dtype=np.float64).ravel()
        expected = math.comb(dim + order - 1, order)
        if vals.size != expected:
            raise ValueError(
                f"expected {expected} canonical entries for order={order}, "
                f"dim={dim}; got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("tensor entries must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "order", int(order))
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("SymTensor is immutable")

    # construction -------------------------------------------------------

    @classmethod
    def zeros(cls, order, dim):
        return cls(np.zeros(math.comb(dim + order - 1, order)), order, dim)

    @classmethod
    def from_entries(cls, entries, order, dim):
        """Build from a mapping ``{index tuple: value}``; missing entries are 0.

        Index tuples may be given in any order; permutations of the same
        tuple must not both appear.
        """
        _check_shape(order, dim)
        lay = _layout(dim, order)
        vals = np.zeros(len(lay.indices))
        seen = set()
        for idx, v in entries.items():
            key = tuple(sorted(int(i) for i in idx))
            if len(key) != order or not all(0 <= i < dim for i in key):
                raise IndexError(f"bad index {idx} for order={order}, dim={dim}")
            if key in seen:
                raise ValueError(f"duplicate entry for index orbit {key}")
            seen.add(key)
            vals[np.searchsorted(lay.codes, _encode(np.array(key), dim))] = v
        return cls(vals, order, dim)

    @classmethod
    def from_dense(cls, dense, tol=1e-8):
        """Canonicalize a dense symmetric array.

        Each canonical entry is the mean of the dense values over its
        permutation orbit.  ``tol`` bounds the largest deviation from that
        mean, relative to the Frobenius norm of ``dense``; ``tol=0`` demands
        exact symmetry.
        """
        dense = np.asarray(dense, dtype=np.float64)
        d = dense.ndim
        if d < 2 or len(set(dense.shape)) != 1:
            raise ValueError(f"dense array must be cubical, got shape {dense.shape}")
        if tol < 0:
            raise ValueError("tol must be non-negative")
        n = dense.shape[0]
        _check_shape(d, n)
        pos = _orbit_map(n, d)
        flat = dense.ravel()
        m = len(_layout(n, d).indices)
        counts = np.bincount(pos, minlength=m)
        mean = np.bincount(pos, weights=flat, minlength=m) / counts
        dev = np.max(np.abs(flat - mean[pos]))
        if dev > tol * np.linalg.norm(flat):
            raise SymmetryError(
                f"array is not symmetric: orbit deviation {dev:.3e} exceeds "
                f"{tol:g} * ||dense||_F")
        return cls(mean, d, n)

    # views --------------------------------------------------------------

    @property
    def indices(self):
        return _layout(self.dim, self.order).indices

    @property
    def multiplicities(self):
        return _layout(self.dim, self.order).multiplicity

    def dense(self):
        return self.values[_orbit_map(self.dim, self.order)].reshape((self.dim,) * self.order)

    def entries(self):
        return {tuple(int(i) for i in idx): float(v) for idx, v in zip(self.indices, self.values)}

    def position(self, idx):
        key = np.sort(np.asarray(idx, dtype=np.int64))
        if key.shape != (self.order,) or key[0] < 0 or key[-1] >= self.dim:
            raise IndexError(f"bad index {idx} for order={self.order}, dim={self.dim}")
        return int(np.searchsorted(_layout(self.dim, self.order).codes, _encode(key, self.dim)))

    def __getitem__(self, idx):
        return float(self.values[self.position(idx)])

    def replace(self, values):
        return SymTensor(values, self.order, self.dim)

    # arithmetic ---------------------------------------------------------

    def _same_shape(self, other):
        if not isinstance(other, SymTensor):
            return NotImplemented
        if (self.order, self.dim) != (other.order, other.dim):
            raise ValueError(
                f"shape mismatch: (d={self.order}, n={self.dim}) vs "
                f"(d={other.order}, n={other.dim})")
        return True

    def __add__(self, other):
        if self._same_shape(other) is NotImplemented:
            return NotImplemented
        return self.replace(self.values + other.values)

    def __sub__(self, other):
        if self._same_shape(other) is NotImplemented:
            return NotImplemented
        return self.replace(self.values - other.values)

    def __mul__(self, scalar):
        return self.replace(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.replace(-self.values)

    def __repr__(self):
        return f"SymTensor(order={self.order}, dim={self.dim}, norm={frobenius(self):.6g})"


def frobenius(T, S=None):
    """Frobenius norm of ``T``, or the inner product ``<T, S>`` if ``S`` is given.

    Both are taken over the full ``n**d`` array, so each canonical entry
    counts with its multinomial multiplicity.
    """
    w = T.multiplicities
    if S is None:
        return float(np.sqrt(np.dot(w, T.values * T.values)))
    if (T.order, T.dim) != (S.order, S.dim):
        raise ValueError("shape mismatch in Frobenius inner product")
    return float(np.dot(w, T.values * S.values))


def _mode_products(dense, M, times):
    """Multiply ``times`` leading modes by ``M`` and rotate them to the back.

    Applying this ``d`` times to an order-``d`` array transforms every mode
    and restores the original axis order.
    """
    n = dense.shape[0]
    shape = dense.shape
    out = dense
    for _ in range(times):
        out = (M @ out.reshape(n, -1)).reshape(shape)
        out = np.moveaxis(out, 0, -1)
    return out


def linear_action(A, T):
    """Return ``A . T`` for any square matrix ``A`` (every mode multiplied by ``A``)."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (T.dim, T.dim):
        raise ValueError(f"matrix shape {A.shape} does not match tensor dim {T.dim}")
    dense = _mode_products(T.dense(), A, T.order)
    # symmetric in exact arithmetic; read the sorted-index entries directly
    return SymTensor(dense.ravel()[_layout(T.dim, T.order).codes], T.order, T.dim)


def orthogonal_action(Q, T, atol=ORTHO_TOL):
    """Return ``Q . T`` with ``[Q . T]_{i..} = sum_j Q_{i1 j1} ... Q_{id jd} T_{j1..jd}``.

    Raises ``ValueError`` if ``Q`` is not orthogonal within ``atol``
    (Frobenius norm of ``Q^T Q - I``).
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape != (T.dim, T.dim):
        raise ValueError(f"matrix shape {Q.shape} does not match tensor dim {T.dim}")
    err = np.linalg.norm(Q.T @ Q - np.eye(T.dim))
    if err > atol:
        raise ValueError(f"matrix is not orthogonal (||Q^T Q - I||_F = {err:.3e})")
    return linear_action(Q, T)


def rank_one_sum(terms, order):
    """Return ``sum_k lam_k v_k^{(x) order}`` for ``terms = [(lam_k, v_k), ...]``."""
    terms = list(terms)
    if not terms:
        raise ValueError("need at least one term")
    vecs = [np.asarray(v, dtype=np.float64).ravel() for _, v in terms]
    n = vecs[0].size
    if any(v.size != n for v in vecs):
        raise ValueError("all vectors must have the same length")
    _check_shape(order, n)
    idx = _layout(n, order).indices
    vals = np.zeros(len(idx))
    for (lam, _), v in zip(terms, vecs):
        vals += float(lam) * np.prod(v[idx], axis=1)
    return SymTensor(vals, order, n)


def diagonal_entries(T):
    """Return ``(T_{0..0}, ..., T_{n-1..n-1})``."""
    return T.values[_layout(T.dim, T.order).diagonal].copy()


# text format ---------------------------------------------------------------

def write_symtensor(T, target):
    """Write ``T`` as ``symtensor d n`` followed by ``i1 ... id value`` lines (1-based)."""
    lines = [f"symtensor {T.order} {T.dim}"]
    for idx, v in zip(T.indices, T.values):
        lines.append(" ".join(str(int(i) + 1) for i in idx) + f" {v:.16e}")
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w") as fh:
            fh.write(text)
    else:
        target.write(text)


def read_symtensor(source):
    """Parse the text format written by :func:`write_symtensor`."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        text = source.read()
    else:
        raise TypeError("source must be a path or a readable file")
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or rows[0][0] != "symtensor" or len(rows[0]) != 3:
        raise ValueError("missing 'symtensor d n' header")
    d, n = int(rows[0][1]), int(rows[0][2])
    _check_shape(d, n)
    lay = _layout(n, d)
    vals = np.full(len(lay.indices), np.nan)
    for ln in rows[1:]:
        if len(ln) != d + 1:
            raise ValueError(f"expected {d} indices and a value, got {' '.join(ln)!r}")
        idx = np.array([int(t) - 1 for t in ln[:d]])
        if np.any(np.diff(idx) < 0) or idx[0] < 0 or idx[-1] >= n:
            raise ValueError(f"index {ln[:d]} is not a non-decreasing 1-based tuple")
        p = int(np.searchsorted(lay.codes, _encode(idx, n)))
        if not np.isnan(vals[p]):
            raise ValueError(f"duplicate entry {ln[:d]}")
        vals[p] = float(ln[d])
    if np.isnan(vals).any():
        raise ValueError(f"expected {len(vals)} entries, got {np.count_nonzero(~np.isnan(vals))}")
    return SymTensor(vals, d, n)
