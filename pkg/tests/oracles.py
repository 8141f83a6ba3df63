"""Independent reference implementations used only by the tests.

They work on dense ``n**d`` arrays with einsum and brute-force loops so they
share no code path with the canonical-storage implementation.
"""

import itertools
import math
import string

import numpy as np
from scipy.optimize import minimize_scalar


def symmetrize(A):
    d = A.ndim
    return sum(np.transpose(A, p) for p in itertools.permutations(range(d))) / math.factorial(d)


def dense_action(M, A):
    """Full contraction ``[M . A]_{i..} = sum M_{i j} ... A_{j ..}`` via one einsum."""
    d = A.ndim
    out = string.ascii_lowercase[:d]
    inp = string.ascii_uppercase[:d]
    spec = ",".join(f"{o}{i}" for o, i in zip(out, inp)) + f",{inp}->{out}"
    return np.einsum(spec, *([M] * d), A)


def dense_moment(X, d):
    N, n = X.shape
    out = np.zeros((n,) * d)
    for row in X:
        t = row
        for _ in range(d - 1):
            t = np.multiply.outer(t, row)
        out += t
    return out / N


def dense_cumulant(X, d):
    """Cumulants of the empirical law for d <= 5 from explicit pairing formulas."""
    Xc = X - X.mean(axis=0)
    m2 = dense_moment(Xc, 2)
    if d in (2, 3):
        return dense_moment(Xc, d)
    if d == 4:
        m4 = dense_moment(Xc, 4)
        return m4 - (np.einsum("ij,kl->ijkl", m2, m2) + np.einsum("ik,jl->ijkl", m2, m2)
                     + np.einsum("il,jk->ijkl", m2, m2))
    if d == 5:
        m3 = dense_moment(Xc, 3)
        m5 = dense_moment(Xc, 5)
        # the 10 ways to split five positions into a pair and a triple
        corr = np.zeros_like(m5)
        letters = "abcde"
        for pair in itertools.combinations(range(5), 2):
            rest = [k for k in range(5) if k not in pair]
            spec = (letters[pair[0]] + letters[pair[1]] + ","
                    + "".join(letters[k] for k in rest) + "->" + letters)
            corr += np.einsum(spec, m2, m3)
        return m5 - corr
    raise ValueError("oracle covers d <= 5")


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def pmi_residual_dense(dense, Q):
    """Relative distance of ``Q^T . T`` to V_pmi using a dense mask built by loops."""
    d, n = dense.ndim, dense.shape[0]
    S = dense_action(Q.T, dense)
    mask = np.zeros(S.shape, dtype=bool)
    for idx in itertools.product(range(n), repeat=d):
        counts = sorted((idx.count(v) for v in set(idx)), reverse=True)
        mask[idx] = counts == [d - 1, 1]
    norm = np.linalg.norm(dense)
    return np.linalg.norm(S[mask]) / norm


def angle_scan(dense, lo=0.05, hi=np.pi / 2 - 0.05, grid=10_000):
    """Minimum over ``theta in [lo, hi]`` of the PMI residual of ``R(theta)^T . T`` (n = 2).

    A vectorized grid search followed by bounded scalar refinement around
    the best grid point.  Returns ``(min_value, argmin_theta)``; a zero tensor
    returns ``(0.0, lo)`` since every rotation keeps it in the subspace.
    """
    d = dense.ndim
    norm = np.linalg.norm(dense)
    if norm == 0:
        return 0.0, lo
    thetas = np.linspace(lo, hi, grid)
    c, s = np.cos(thetas), np.sin(thetas)
    # binary form f(x, y) = sum_k binom(d,k) t_k x^(d-k) y^k; off-pattern
    # coordinates of the rotated tensor are directional derivatives, so we
    # evaluate them directly from the dense array.
    Qs = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)  # (g, 2, 2)

    def resid(Qb):
        S = dense
        S = np.broadcast_to(S, (len(Qb),) + S.shape)
        for _ in range(d):
            S = np.einsum("gji,gj...->g...i", Qb, S)
        # entries with one index distinct from the rest: (0,1,...,1) and (1,0,...,0)
        a = S[(slice(None), 0) + (1,) * (d - 1)]
        b = S[(slice(None), 1) + (0,) * (d - 1)]
        return np.sqrt(d * (a ** 2 + b ** 2)) / norm

    vals = resid(Qs)
    k = int(np.argmin(vals))
    step = thetas[1] - thetas[0]
    a, b = max(lo, thetas[k] - step), min(hi, thetas[k] + step)
    res = minimize_scalar(lambda t: float(resid(rotation(t)[None])[0]), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-14})
    best = min((vals[k], thetas[k]), (res.fun, res.x))
    return float(best[0]), float(best[1])


def brute_sp_error(Q_hat, Q_true):
    n = len(Q_hat)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        P = np.eye(n)[:, perm]
        for signs in itertools.product((1.0, -1.0), repeat=n):
            best = min(best, np.linalg.norm(Q_hat - Q_true @ (P * np.array(signs))))
    return best
