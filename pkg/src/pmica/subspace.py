"""Zero-pattern subspaces of symmetric tensors.

Every subspace here is cut out by the vanishing of a set of canonical
entries.  Because those coordinates are orthogonal in the full-array
Frobenius inner product, projecting onto the subspace (or its complement) is
entry masking.

Patterns are predicates on the *multiplicity signature* of an index tuple:
the occurrence counts of its distinct values, sorted in decreasing order.
For example ``(0, 1, 1, 1)`` has signature ``(3, 1)``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .symtensor import MAX_ORDER, _layout, _orbit_map, frobenius

__all__ = [
    "ZeroPattern",
    "DIAG",
    "PMI",
    "MI",
    "REFL",
    "signature",
    "constrained_indices",
    "constraint_mask",
    "dense_mask",
    "project",
    "project_complement",
    "subspace_dim",
    "contains",
    "pmi_without_pair",
]

KINDS = ("diag", "pmi", "mi", "refl", "kindep", "custom")


def signature(idx):
    """Decreasing tuple of occurrence counts of the values in ``idx``."""
    return tuple(sorted(Counter(int(i) for i in idx).values(), reverse=True))


@dataclass(frozen=True)
class ZeroPattern:
    """A subspace ``V`` given by which canonical entries must vanish.

    Use the module constants ``DIAG``, ``PMI``, ``MI``, ``REFL`` or the
    constructors :meth:`kindep`, :meth:`custom` and :meth:`parse`.
    """

    kind: str
    k: int | None = None
    signatures: frozenset = frozenset()
    indices: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.kind == "kindep" and (self.k is None or self.k < 2):
            raise ValueError("kindep needs k >= 2")

    @classmethod
    def kindep(cls, k):
        return cls("kindep", k=int(k))

    @classmethod
    def custom(cls, signatures=(), indices=()):
        """Pattern constraining the given signatures and explicit index tuples.

        Explicit tuples are 0-based and canonicalized by sorting; they are how
        asymmetric patterns (one ordered pair dropped) are expressed.
        """
        sigs = frozenset(tuple(sorted(s, reverse=True)) for s in signatures)
        idx = frozenset(tuple(sorted(int(i) for i in t)) for t in indices)
        return cls("custom", signatures=sigs, indices=idx)

    @classmethod
    def parse(cls, name):
        """Parse ``diag``, ``pmi``, ``mi``, ``refl``, ``kindep:<k>`` or ``custom:@file``.

        A custom file lists one canonical index per line, 1-based,
        whitespace- or comma-separated.
        """
        name = name.strip()
        if name in ("diag", "pmi", "mi", "refl"):
            return cls(name)
        if name.startswith("kindep:"):
            return cls.kindep(int(name.split(":", 1)[1]))
        if name.startswith("custom:"):
            path = name.split(":", 1)[1].lstrip("@")
            with open(path) as fh:
                rows = [ln.replace(",", " ").split() for ln in fh
                        if ln.strip() and not ln.lstrip().startswith("#")]
            return cls.custom(indices=[[int(t) - 1 for t in r] for r in rows])
        raise ValueError(f"unknown pattern {name!r}; expected diag, pmi, mi, refl, "
                         "kindep:<k> or custom:@file")

    def constrains(self, idx):
        """True if the entry at index tuple ``idx`` must vanish in ``V``."""
        sig = signature(idx)
        d = sum(sig)
        if self.kind == "diag":
            return len(sig) >= 2
        if self.kind == "pmi":
            return len(sig) == 2 and sig == (d - 1, 1)
        if self.kind == "mi":
            return len(sig) >= 2 and 1 in sig
        if self.kind == "refl":
            return any(c % 2 for c in sig)
        if self.kind == "kindep":
            return 2 <= len(sig) <= self.k
        return sig in self.signatures or tuple(sorted(int(i) for i in idx)) in self.indices

    def __str__(self):
        if self.kind == "kindep":
            return f"kindep:{self.k}"
        if self.kind == "custom":
            return "custom"
        return self.kind


DIAG = ZeroPattern("diag")
PMI = ZeroPattern("pmi")
MI = ZeroPattern("mi")
REFL = ZeroPattern("refl")


def _check(n, d):
    if n < 1 or not 2 <= d <= MAX_ORDER:
        raise ValueError(f"need n >= 1 and 2 <= d <= {MAX_ORDER}; got n={n}, d={d}")


@lru_cache(maxsize=None)
def constraint_mask(V, n, d):
    """Boolean mask over canonical entries: True where ``V`` forces a zero."""
    _check(n, d)
    mask = np.array([V.constrains(row) for row in _layout(n, d).indices], dtype=bool)
    mask.flags.writeable = False
    return mask


@lru_cache(maxsize=None)
def dense_mask(V, n, d):
    """Constraint mask expanded to the full ``n**d`` array (float 0/1)."""
    m = constraint_mask(V, n, d)[_orbit_map(n, d)].astype(np.float64).reshape((n,) * d)
    m.flags.writeable = False
    return m


def constrained_indices(V, n, d):
    """Set of canonical index tuples (0-based) required to vanish in ``V``."""
    mask = constraint_mask(V, n, d)
    idx = _layout(n, d).indices
    return {tuple(int(i) for i in row) for row in idx[mask]}


def _shape(T, V):
    return constraint_mask(V, T.dim, T.order)


def project_complement(T, V):
    """Orthogonal projection of ``T`` onto the complement of ``V``."""
    return T.replace(np.where(_shape(T, V), T.values, 0.0))


def project(T, V):
    """Orthogonal projection of ``T`` onto ``V``."""
    return T.replace(np.where(_shape(T, V), 0.0, T.values))


def subspace_dim(V, n, d):
    return math.comb(n + d - 1, d) - int(np.count_nonzero(constraint_mask(V, n, d)))


def contains(T, V, tol=1e-10):
    """Relative membership test ``||P_{V-perp} T||_F <= tol * ||T||_F``."""
    norm = frobenius(T)
    if norm == 0.0:
        return True
    return frobenius(project_complement(T, V)) <= tol * norm


def pmi_without_pair(n, d, i, j):
    """PMI pattern with the single constraint ``T_{i j ... j} = 0`` removed.

    ``i`` appears once and ``j`` appears ``d - 1`` times; the mirrored entry
    ``T_{j i ... i}`` stays constrained.
    """
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValueError("need distinct indices in range")
    keep = constrained_indices(PMI, n, d)
    keep.discard(tuple(sorted([i] + [j] * (d - 1))))
    return ZeroPattern.custom(indices=keep)

