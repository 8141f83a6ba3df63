"""Seeded source samplers and the mixing step.

Every sampler takes ``rng`` as either a ``numpy.random.Generator`` or
anything accepted by ``numpy.random.default_rng`` (an int seed, a sequence
of ints, ``None``), and returns an ``(N, n)`` array with one sample per row.
The same seed and parameters always give bit-identical output.

Standardization divides each coordinate by a standard deviation measured on
a separate pilot sample of ``PILOT_SIZE`` rows drawn from a fixed stream, so
the scale constants do not depend on the caller's seed.  They are exposed
through :func:`pilot_scales` so that runs can record them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PILOT_SIZE",
    "PILOT_SEED",
    "SourceSpec",
    "default_dirichlet_alpha",
    "pilot_scales",
    "sample_square_weighted",
    "sample_l1_weighted",
    "sample_alpha_mix",
    "sample_dirichlet_l1",
    "sample_correlated_energy",
    "sample_tree_broadcast",
    "read_tree",
    "mix",
]

PILOT_SIZE = 100_000
PILOT_SEED = 20_240_601
MAX_CONDITION = 1e12


def _gen(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _check_n(N):
    N = int(N)
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    return N


def _rademacher(rng, shape):
    return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0


# ----------------------------------------------------------------- raw laws

def _square(N, rng):
    z1 = rng.uniform(-1.0, 1.0, N)
    z2 = np.sqrt(rng.uniform(0.0, 1.0, N)) * _rademacher(rng, N)
    return np.column_stack([z1, z2])


def _l1(N, rng):
    # the square law restricted to |z1| + |z2| <= 1 keeps 1/3 of its mass
    out = np.empty((0, 2))
    while len(out) < N:
        need = N - len(out)
        cand = _square(int(3.3 * need) + 64, rng)
        keep = cand[np.abs(cand).sum(axis=1) <= 1.0]
        out = np.concatenate([out, keep[:need]])
    return out


def _alpha(N, alpha, rng):
    z0 = _square(N, rng)
    z1 = _l1(N, rng)
    return (1.0 - alpha) * z0 + alpha * z1


def _dirichlet(N, alpha, rng):
    alpha = np.asarray(alpha, dtype=np.float64)
    g = rng.standard_gamma(np.append(alpha, 1.0), size=(N, len(alpha) + 1))
    w = g[:, :-1] / g.sum(axis=1, keepdims=True)
    return w * _rademacher(rng, w.shape)


def default_dirichlet_alpha(n):
    """Exponents ``alpha_i = 2^((i-1)/(n-1))``, i = 1..n, spread over [1, 2]."""
    if n < 2:
        raise ValueError("need n >= 2")
    return 2.0 ** (np.arange(n) / (n - 1))


# ----------------------------------------------------------- standardizing

_SCALE_CACHE = {}


def pilot_scales(kind, params=(), draw=None):
    """Per-coordinate standard deviations of a law, from the fixed pilot stream.

    ``kind`` and the hashable ``params`` key a cache; ``draw(N, rng)``
    produces raw samples and is required for laws not built into this module.
    """
    key = (kind, params)
    if key in _SCALE_CACHE:
        return _SCALE_CACHE[key].copy()
    if draw is None:
        draw = _BUILTIN[kind](params)
    pilot = draw(PILOT_SIZE, np.random.default_rng([PILOT_SEED, _kind_code(kind)]))
    scales = pilot.std(axis=0)
    if np.any(scales <= 0) or not np.all(np.isfinite(scales)):
        raise ValueError(f"pilot sample of {kind!r} has a degenerate coordinate")
    if params is not None:
        _SCALE_CACHE[key] = scales
    return scales.copy()


def _kind_code(kind):
    return sum(ord(c) << (8 * (i % 4)) for i, c in enumerate(kind))


_BUILTIN = {
    "square": lambda p: _square,
    "l1": lambda p: _l1,
    "alpha": lambda p: (lambda N, rng: _alpha(N, p[0], rng)),
    "dirichlet": lambda p: (lambda N, rng: _dirichlet(N, p, rng)),
}


# ------------------------------------------------------------ public API

def sample_square_weighted(N, rng=None, standardize=False):
    """Density ``|z2| / 2`` on ``[-1, 1]^2``.

    ``z1`` is uniform; ``z2 = +-sqrt(U)`` inverts the CDF of ``|z|`` on
    ``[-1, 1]``.  The coordinates are independent, with variances 1/3 and 1/2.
    """
    Z = _square(_check_n(N), _gen(rng))
    return Z / pilot_scales("square") if standardize else Z


def sample_l1_weighted(N, rng=None, standardize=False):
    """Density ``3 |z2| / 2`` on the unit L1 ball, by rejection from the square law.

    The coordinates are dependent but pairwise mean independent: the density
    is even in each coordinate separately.
    """
    Z = _l1(_check_n(N), _gen(rng))
    return Z / pilot_scales("l1") if standardize else Z


def sample_alpha_mix(N, alpha, rng=None, standardize=True):
    """``(1 - alpha) z0 + alpha z1`` with independent square-law ``z0`` and L1-law ``z1``.

    ``alpha = 0`` is (a rescaling of) the independent square law and
    ``alpha = 1`` the L1-ball law.  Each draw consumes the stream in a fixed
    order: all of ``z0``, then ``z1``.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    Z = _alpha(_check_n(N), alpha, _gen(rng))
    return Z / pilot_scales("alpha", (alpha,)) if standardize else Z


def sample_dirichlet_l1(N, n, rng=None, alpha=None, standardize=True):
    """Density proportional to ``prod |z_i|^(alpha_i - 1)`` on the L1 ball in R^n.

    ``|z|`` are the first ``n`` coordinates of a Dirichlet(alpha, 1) vector
    (normalized Gamma draws) and the signs are independent fair coins.
    ``alpha`` defaults to :func:`default_dirichlet_alpha`.
    """
    n = int(n)
    alpha = default_dirichlet_alpha(n) if alpha is None else np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (n,) or np.any(alpha <= 0):
        raise ValueError("alpha must be a positive vector of length n")
    Z = _dirichlet(_check_n(N), alpha, _gen(rng))
    if standardize:
        Z = Z / pilot_scales("dirichlet", tuple(float(a) for a in alpha))
    return Z


def _shared_lognormal(rng, N, n):
    return np.repeat(np.exp(0.5 * rng.standard_normal((N, 1))), n, axis=1)


def sample_correlated_energy(N, n, rng=None, scale=None, noise=None, standardize=False):
    """``z_i = sigma_i * eps_i`` with jointly drawn scales and independent noise.

    Parameters
    ----------
    scale : callable ``(rng, N, n) -> (N, n)`` array, optional
        Strictly positive scales, possibly dependent across coordinates.
        Default: one lognormal ``exp(g / 2)`` shared by all coordinates.
    noise : callable ``(rng, N, n) -> (N, n)`` array, optional
        Zero-mean, unit-variance, independent entries.  Default: Rademacher.
    """
    N, n = _check_n(N), int(n)
    scale = scale or _shared_lognormal
    noise = noise or (lambda g, N_, n_: _rademacher(g, (N_, n_)))

    def draw(N_, g):
        sig = np.asarray(scale(g, N_, n), dtype=np.float64)
        if sig.shape != (N_, n) or np.any(sig <= 0):
            raise ValueError("scale draws must be a strictly positive (N, n) array")
        eps = np.asarray(noise(g, N_, n), dtype=np.float64)
        if eps.shape != (N_, n):
            raise ValueError("noise draws must be an (N, n) array")
        return sig * eps

    Z = draw(N, _gen(rng))
    if standardize:
        Z = Z / pilot_scales("energy", None, draw)
    return Z


@dataclass(frozen=True)
class Tree:
    """Rooted tree given by a child -> parent map (the root maps to ``None``)."""

    parents: dict
    leaves: tuple
    order: tuple = field(init=False)

    def __post_init__(self):
        roots = [v for v, p in self.parents.items() if p is None]
        if len(roots) != 1:
            raise ValueError(f"tree needs exactly one root, found {len(roots)}")
        for v, p in self.parents.items():
            if p is not None and p not in self.parents:
                raise ValueError(f"parent {p!r} of {v!r} is not a vertex")
        if len(set(self.leaves)) != len(self.leaves) or not self.leaves:
            raise ValueError("leaves must be a non-empty list of distinct vertices")
        for leaf in self.leaves:
            if leaf not in self.parents:
                raise ValueError(f"leaf {leaf!r} is not a vertex")
        # every vertex must reach the root without revisiting a vertex
        for v in self.parents:
            seen = set()
            while v is not None:
                if v in seen:
                    raise ValueError("parent map contains a cycle")
                seen.add(v)
                v = self.parents[v]
        object.__setattr__(self, "order", tuple(sorted(self.parents, key=str)))

    def path(self, v):
        out = []
        while v is not None:
            out.append(v)
            v = self.parents[v]
        return out[::-1]


def read_tree(path):
    """Load a tree from JSON ``{"parents": {child: parent-or-null}, "leaves": [...]}``."""
    import json

    with open(path) as fh:
        spec = json.load(fh)
    try:
        return Tree(dict(spec["parents"]), tuple(spec["leaves"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed tree file {path}: {exc}") from None


def sample_tree_broadcast(N, tree, rng=None, vertex=None, standardize=False):
    """Leaf ``v`` receives ``prod_{u on root..v path} tau_u`` with independent ``tau_u``.

    Parameters
    ----------
    tree : Tree or (parents, leaves)
    vertex : callable ``(rng, N) -> (N,)`` array, optional
        Zero-mean vertex law shared by all vertices; default Rademacher.
    """
    N = _check_n(N)
    if not isinstance(tree, Tree):
        parents, leaves = tree
        tree = Tree(dict(parents), tuple(leaves))
    vertex = vertex or (lambda g, N_: _rademacher(g, N_))

    def draw(N_, g):
        tau = {v: np.asarray(vertex(g, N_), dtype=np.float64) for v in tree.order}
        cols = []
        for leaf in tree.leaves:
            z = np.ones(N_)
            for u in tree.path(leaf):
                z = z * tau[u]
            cols.append(z)
        return np.column_stack(cols)

    Z = draw(N, _gen(rng))
    if standardize:
        Z = Z / pilot_scales("tree", None, draw)
    return Z


def mix(S, A):
    """Rows ``x_r = A s_r``, i.e. ``X = S A^T``.

    Raises
    ------
    ValueError
        On a shape mismatch or if ``cond(A) >= 1e12``.
    """
    S = np.asarray(S, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or S.ndim != 2 or S.shape[1] != A.shape[1]:
        raise ValueError(f"cannot mix data of shape {S.shape} with matrix {A.shape}")
    cond = np.linalg.cond(A)
    if not math.isfinite(cond) or cond >= MAX_CONDITION:
        raise ValueError(f"mixing matrix is singular (condition number {cond:.3e})")
    return S @ A.T


@dataclass(frozen=True)
class SourceSpec:
    """A named source law, parsed from ``square``, ``l1``, ``alpha:<a>``,
    ``dirichlet:<n>``, ``energy[:<n>]`` or ``tree:@file``."""

    kind: str
    alpha: float | None = None
    n: int | None = None
    tree: Tree | None = None
    standardize: bool | None = None

    @classmethod
    def parse(cls, text, standardize=None):
        text = text.strip()
        head, _, arg = text.partition(":")
        if head in ("square", "l1") and not arg:
            return cls(head, standardize=standardize)
        if head == "alpha" and arg:
            return cls("alpha", alpha=float(arg), standardize=standardize)
        if head == "dirichlet" and arg:
            return cls("dirichlet", n=int(arg), standardize=standardize)
        if head == "energy":
            return cls("energy", n=int(arg) if arg else 2, standardize=standardize)
        if head == "tree" and arg:
            return cls("tree", tree=read_tree(arg.lstrip("@")), standardize=standardize)
        raise ValueError(f"unknown distribution {text!r}; expected square, l1, alpha:<a>, "
                         "dirichlet:<n>, energy[:<n>] or tree:@file")

    def sample(self, N, rng=None):
        kw = {} if self.standardize is None else {"standardize": self.standardize}
        if self.kind == "square":
            return sample_square_weighted(N, rng, **kw)
        if self.kind == "l1":
            return sample_l1_weighted(N, rng, **kw)
        if self.kind == "alpha":
            return sample_alpha_mix(N, self.alpha, rng, **kw)
        if self.kind == "dirichlet":
            return sample_dirichlet_l1(N, self.n, rng, **kw)
        if self.kind == "energy":
            return sample_correlated_energy(N, self.n, rng, **kw)
        return sample_tree_broadcast(N, self.tree, rng, **kw)

    def describe(self):
        out = {"kind": self.kind}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.n is not None:
            out["n"] = self.n
        if self.tree is not None:
            out["leaves"] = list(self.tree.leaves)
        if self.standardize is not None:
            out["standardize"] = self.standardize
        return out
