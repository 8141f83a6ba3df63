import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_tensor
from pmica.subspace import (DIAG, MI, PMI, REFL, ZeroPattern, constrained_indices, contains,
                            dense_mask, pmi_without_pair, project, project_complement,
                            signature, subspace_dim)
from pmica.symtensor import SymTensor, diagonal_entries, frobenius

KINDS = [DIAG, PMI, MI, REFL, ZeroPattern.kindep(2), ZeroPattern.kindep(3)]


def brute_constrained(kind, n, d, k=None):
    """Direct reading of each family's defining condition on a sorted tuple."""
    out = set()
    for idx in itertools.combinations_with_replacement(range(n), d):
        counts = [idx.count(v) for v in set(idx)]
        distinct = len(counts)
        hit = {
            "diag": distinct >= 2,
            "pmi": distinct == 2 and sorted(counts) == [1, d - 1],
            "mi": distinct >= 2 and 1 in counts,
            "refl": any(c % 2 for c in counts),
            "kindep": 2 <= distinct <= (k or 0),
        }[kind]
        if hit:
            out.add(idx)
    return out


class TestConstrainedIndices:
    def test_pmi_binary_cubic(self):
        assert constrained_indices(PMI, 2, 3) == {(0, 0, 1), (0, 1, 1)}

    def test_diag_matrix(self):
        assert constrained_indices(DIAG, 2, 2) == {(0, 1)}

    def test_pmi_n3_d4(self):
        got = constrained_indices(PMI, 3, 4)
        assert len(got) == 2 * math.comb(3, 2) == 6
        want = {tuple(sorted((i,) + (j,) * 3)) for i in range(3) for j in range(3) if i != j}
        assert got == want

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_matches_definitions(self, n, d):
        for V in KINDS:
            assert constrained_indices(V, n, d) == brute_constrained(V.kind, n, d, V.k)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_diag_and_pmi_agree_for_matrices(self, n):
        assert constrained_indices(DIAG, n, 2) == constrained_indices(PMI, n, 2)

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("d", [3, 4, 5, 6])
    def test_nesting(self, n, d):
        pmi, mi, diag = (constrained_indices(V, n, d) for V in (PMI, MI, DIAG))
        assert pmi <= mi <= diag

    def test_refl_odd_order_is_everything(self):
        assert len(constrained_indices(REFL, 3, 3)) == math.comb(5, 3)

    def test_signature(self):
        assert signature((0, 1, 1, 1)) == (3, 1)
        assert signature((2, 0, 2, 1, 0)) == (2, 2, 1)


class TestDimensions:
    def test_pmi_example(self):
        assert subspace_dim(PMI, 3, 4) == 9

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6, 7, 8, 9])
    def test_diag_dim_is_n(self, d):
        assert subspace_dim(DIAG, 4, d) == 4

    def test_kindep_example(self):
        assert subspace_dim(ZeroPattern.kindep(2), 3, 3) == 4

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_closed_forms(self, n, d):
        total = math.comb(n + d - 1, d)
        # for matrices (i, j) and (j, i) are the same canonical entry
        pmi_codim = (2 if d > 2 else 1) * math.comb(n, 2)
        assert subspace_dim(PMI, n, d) == total - pmi_codim
        for k in range(2, d + 1):
            codim = sum(math.comb(d - 1, j - 1) * math.comb(n, j) for j in range(2, k + 1))
            assert subspace_dim(ZeroPattern.kindep(k), n, d) == total - codim
        if d % 2:
            assert subspace_dim(REFL, n, d) == 0
        else:
            assert subspace_dim(REFL, n, d) == math.comb(n + d // 2 - 1, d // 2)

    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_dim_plus_codim(self, n, d):
        for V in KINDS:
            assert (subspace_dim(V, n, d) + len(constrained_indices(V, n, d))
                    == math.comb(n + d - 1, d))


class TestProjections:
    def test_member_projects_to_zero(self, rng):
        T = project(random_tensor(rng, 3, 4), PMI)
        assert frobenius(project_complement(T, PMI)) == 0.0
        assert contains(T, PMI)

    def test_fully_constrained_tensor_is_fixed(self):
        T = SymTensor.from_entries({(0, 1, 1): 1.0}, 3, 2)
        np.testing.assert_array_equal(project_complement(T, PMI).values, T.values)

    @given(st.integers(1, 4), st.integers(2, 5), st.sampled_from(KINDS),
           st.integers(0, 2**32 - 1))
    def test_orthogonal_idempotent(self, n, d, V, seed):
        T = random_tensor(np.random.default_rng(seed), n, d)
        P, C = project(T, V), project_complement(T, V)
        assert abs(frobenius(P, C)) <= 1e-12 * frobenius(T) ** 2
        np.testing.assert_array_equal(project_complement(C, V).values, C.values)
        np.testing.assert_allclose((P + C).values, T.values, rtol=0, atol=1e-15)

    def test_diag_projection_keeps_diagonal(self, rng):
        T = random_tensor(rng, 3, 4)
        np.testing.assert_array_equal(diagonal_entries(project(T, DIAG)), diagonal_entries(T))

    def test_dense_mask_matches_canonical(self, rng):
        T = random_tensor(rng, 3, 3)
        masked = T.dense() * dense_mask(PMI, 3, 3)
        np.testing.assert_allclose(masked, project_complement(T, PMI).dense())

    def test_contains_zero_tensor(self):
        assert contains(SymTensor.zeros(4, 2), DIAG)

    def test_contains_relative(self, rng):
        T = project(random_tensor(rng, 2, 4), DIAG) * 1e6
        bumped = T + SymTensor.from_entries({(0, 1, 1, 1): 1e-6}, 4, 2)
        assert contains(bumped, DIAG, tol=1e-10)
        assert not contains(bumped, DIAG, tol=1e-14)


class TestPatterns:
    @pytest.mark.parametrize("name", ["diag", "pmi", "mi", "refl", "kindep:3"])
    def test_parse_roundtrip(self, name):
        assert str(ZeroPattern.parse(name)) == name

    def test_parse_custom_file(self, tmp_path):
        path = tmp_path / "pat.txt"
        path.write_text("# one tuple per line\n1 2 2 2\n1,1,1,2\n")
        V = ZeroPattern.parse(f"custom:@{path}")
        assert constrained_indices(V, 2, 4) == {(0, 1, 1, 1), (0, 0, 0, 1)}

    def test_parse_rejects_unknown(self):
        with pytest.raises(ValueError):
            ZeroPattern.parse("banana")
        with pytest.raises(ValueError):
            ZeroPattern.kindep(1)

    def test_custom_by_signature(self):
        V = ZeroPattern.custom(signatures=[(1, 3)])
        assert constrained_indices(V, 3, 4) == constrained_indices(PMI, 3, 4)

    def test_drop_one_ordered_pair(self):
        V = pmi_without_pair(3, 4, 0, 1)
        got = constrained_indices(V, 3, 4)
        assert (0, 1, 1, 1) not in got
        assert (0, 0, 0, 1) in got
        assert len(got) == 5

    def test_patterns_are_hashable(self):
        assert len({DIAG, PMI, ZeroPattern("pmi"), ZeroPattern.kindep(2)}) == 3
