"""
Sources generated along a tree
------------------------------

Each vertex of a rooted tree draws an independent Gaussian and every leaf
multiplies the draws on its path to the root.  Leaves share factors, so
they are dependent, but any two of them are mean independent.  The fourth
cumulant therefore sits near the PMI subspace in leaf coordinates.

Leaves at equal depth would have equal fourth cumulants, and then the
basis is not unique.  Here the three leaves hang at depths 1, 2 and 3.
"""

import numpy as np

import pmica

tree = pmica.samplers.Tree(
    parents={"root": None, "a": "root", "u": "root", "b": "u", "v": "u", "c": "v"},
    leaves=("a", "b", "c"))

S = pmica.sample_tree_broadcast(400_000, tree, rng=3,
                                vertex=lambda g, N: g.standard_normal(N))
K_sources = pmica.cumulant_tensor(S, 4)
print("diagonal fourth cumulants:", np.round(pmica.diagonal_entries(K_sources), 1))
print("distance to PMI in leaf coordinates:",
      round(pmica.distance_to_subspace(np.eye(3), K_sources, pmica.PMI), 4))

A = pmica.random_orthogonal(3, np.random.default_rng(11))
K = pmica.cumulant_tensor(pmica.whiten(pmica.mix(S, A)).whitened, 4)
print("after mixing:", round(pmica.distance_to_subspace(np.eye(3), K, pmica.PMI), 4))

fit = pmica.rgd_fit(K, pmica.PMI, n_inits=20, seed=0)
print("after fitting:", round(pmica.distance_to_subspace(fit.best_Q, K, pmica.PMI), 4))
print("recovery error up to sign and order:",
      round(pmica.sp_matched_error(fit.best_Q, A)[0], 4))

# certify the projected, unmixed cumulant
rotated = pmica.orthogonal_action(fit.best_Q.T, K, atol=1e-6)
print("certificate:", pmica.is_generic_pmi(pmica.project(rotated, pmica.PMI)).generic)
