"""Blind source separation under pairwise mean independence.

Estimate a fourth (or other order) cumulant tensor from whitened data, find
the rotation that brings it closest to a zero-pattern subspace by Riemannian
gradient descent on O(n), and certify that the answer is unique.
"""

__version__ = "0.1.0"

from .cumulants import (RankDeficiencyError, WhiteningResult, cumulant_tensor,
                        moment_tensor, pca_reduce, whiten)
from .genericity import (GenericityReport, PatternMembershipError, UnsupportedOrderError,
                         binary_slice, is_generic_diag, is_generic_pmi)
from .metrics import (Scorecard, distance_to_subspace, gap_and_offdiag, scorecard,
                      sp_matched_error)
from .optim import (FitConfig, FitResult, euclidean_gradient, objective, random_orthogonal,
                    rgd_fit, riemannian_gradient, riemannian_step)
from .samplers import (SourceSpec, mix, sample_alpha_mix, sample_correlated_energy,
                       sample_dirichlet_l1, sample_l1_weighted, sample_square_weighted,
                       sample_tree_broadcast)
from .subspace import (DIAG, MI, PMI, REFL, ZeroPattern, constrained_indices, contains,
                       project, project_complement, subspace_dim)
from .symtensor import (SymTensor, diagonal_entries, frobenius, orthogonal_action,
                        rank_one_sum, read_symtensor, write_symtensor)
