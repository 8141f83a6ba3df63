import json
import math

import numpy as np
import pytest
from scipy import stats

from pmica.cumulants import cumulant_tensor
from pmica.samplers import (PILOT_SIZE, SourceSpec, Tree, default_dirichlet_alpha, mix,
                            pilot_scales, read_tree, sample_alpha_mix, sample_correlated_energy,
                            sample_dirichlet_l1, sample_l1_weighted, sample_square_weighted,
                            sample_tree_broadcast)
from pmica.subspace import PMI, constrained_indices

BIG = 1_000_000


def pmi_z_scores(Z, d, batches=20):
    """|entry| / standard error for every constrained PMI entry of the order-d cumulant.

    The standard error comes from batch means: the spread of the cumulant over
    ``batches`` disjoint blocks, divided by sqrt(batches).
    """
    idx = sorted(constrained_indices(PMI, Z.shape[1], d))
    full = cumulant_tensor(Z, d)
    parts = [cumulant_tensor(B, d) for B in np.array_split(Z, batches)]
    out = []
    for i in idx:
        se = np.std([P[i] for P in parts], ddof=1) / math.sqrt(batches)
        out.append(abs(full[i]) / se)
    return np.array(out)


def mean_within(Z, target, k=5.0):
    m = Z.mean(axis=0)
    se = Z.std(axis=0) / math.sqrt(len(Z))
    return np.all(np.abs(m - target) <= k * se)


class TestSquare:
    def test_moments(self):
        Z = sample_square_weighted(BIG, 0)
        N = len(Z)
        assert abs(np.mean(Z[:, 0] * Z[:, 1])) < 5 / math.sqrt(N)
        assert mean_within(Z ** 2, [1 / 3, 1 / 2])
        assert np.all(np.abs(Z) <= 1)

    def test_second_coordinate_density(self):
        z2 = sample_square_weighted(100_000, 1)[:, 1]
        # P(z2 <= x) = (1 + sign(x) x^2) / 2 for density |z|
        ks = stats.kstest(z2, lambda x: (1 + np.sign(x) * x * x) / 2).statistic
        assert ks < 0.01


class TestL1:
    def test_support_and_mean(self):
        Z = sample_l1_weighted(BIG, 2)
        assert np.all(np.abs(Z).sum(axis=1) <= 1)
        assert mean_within(Z, [0.0, 0.0])

    def test_pmi_law(self):
        Z = sample_l1_weighted(BIG, 3)
        assert np.all(pmi_z_scores(Z, 3) < 5)
        assert np.all(pmi_z_scores(Z, 4) < 5)

    def test_coordinates_are_dependent(self):
        Z = sample_l1_weighted(200_000, 4)
        # E[z1^2 z2^2] differs from the product of the second moments
        cov = np.mean(Z[:, 0] ** 2 * Z[:, 1] ** 2) - np.mean(Z[:, 0] ** 2) * np.mean(Z[:, 1] ** 2)
        assert cov < -0.005

    def test_exact_count(self):
        assert sample_l1_weighted(7, 0).shape == (7, 2)


class TestAlphaMix:
    def test_endpoints_match_pure_laws(self):
        a0 = sample_alpha_mix(100_000, 0.0, 10, standardize=False)
        a1 = sample_alpha_mix(100_000, 1.0, 11, standardize=False)
        sq = sample_square_weighted(100_000, 12)
        l1 = sample_l1_weighted(100_000, 13)
        for k in range(2):
            assert stats.ks_2samp(a0[:, k], sq[:, k]).statistic < 0.01
            assert stats.ks_2samp(a1[:, k], l1[:, k]).statistic < 0.01

    @pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_pmi_for_every_alpha(self, alpha):
        Z = sample_alpha_mix(BIG, alpha, 20)
        assert np.all(pmi_z_scores(Z, 4) < 5)

    def test_unit_variance(self):
        Z = sample_alpha_mix(BIG, 0.6, 21)
        np.testing.assert_allclose(Z.var(axis=0), 1.0, atol=0.02)

    def test_range_checked(self):
        with pytest.raises(ValueError):
            sample_alpha_mix(10, 1.5)

    def test_standardization_constants_are_seed_free(self):
        s = pilot_scales("alpha", (0.3,))
        a = sample_alpha_mix(1000, 0.3, 1, standardize=False) / s
        np.testing.assert_array_equal(a, sample_alpha_mix(1000, 0.3, 1))


class TestDirichlet:
    def test_default_exponents(self):
        np.testing.assert_allclose(default_dirichlet_alpha(3), [1.0, math.sqrt(2), 2.0])

    def test_support_and_symmetry(self):
        Z = sample_dirichlet_l1(BIG, 3, 0, standardize=False)
        assert np.all(np.abs(Z).sum(axis=1) <= 1)
        assert mean_within(Z, 0.0) and mean_within(Z ** 3, 0.0)

    def test_abs_mean(self):
        a = default_dirichlet_alpha(4)
        Z = sample_dirichlet_l1(BIG, 4, 1, standardize=False)
        assert mean_within(np.abs(Z), a / (1 + a.sum()))

    def test_two_dims_is_l1_law(self):
        d = sample_dirichlet_l1(100_000, 2, 2, alpha=[1.0, 2.0], standardize=False)
        l1 = sample_l1_weighted(100_000, 3)
        for k in range(2):
            assert stats.ks_2samp(d[:, k], l1[:, k]).statistic < 0.01

    def test_pmi_and_unit_variance(self):
        Z = sample_dirichlet_l1(BIG, 3, 4)
        np.testing.assert_allclose(Z.var(axis=0), 1.0, atol=0.02)
        assert np.all(pmi_z_scores(Z, 4) < 5)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            sample_dirichlet_l1(10, 2, alpha=[1.0, 0.0])


class TestEnergy:
    def test_constant_scale_is_independent(self):
        Z = sample_correlated_energy(200_000, 2, 0, scale=lambda g, N, n: np.ones((N, n)))
        K = cumulant_tensor(Z, 4)
        assert abs(K[(0, 0, 1, 1)]) < 0.05

    def test_shared_scale(self):
        Z = sample_correlated_energy(BIG, 2, 1)
        assert mean_within(Z, 0.0)
        assert np.all(pmi_z_scores(Z, 4) < 5)
        # with sigma^2 = e^g: E sigma^4 - (E sigma^2)^2 = e^2 - e
        K = cumulant_tensor(Z, 4)
        assert K[(0, 0, 1, 1)] == pytest.approx(math.e ** 2 - math.e, rel=0.15)

    def test_rejects_nonpositive_scales(self):
        with pytest.raises(ValueError):
            sample_correlated_energy(10, 2, 0, scale=lambda g, N, n: np.zeros((N, n)))

    def test_standardized(self):
        Z = sample_correlated_energy(BIG, 3, 2, standardize=True)
        np.testing.assert_allclose(Z.var(axis=0), 1.0, atol=0.05)


class TestTree:
    def test_single_path(self):
        tree = Tree({"r": None, "l": "r"}, ("l",))
        z = sample_tree_broadcast(1000, tree, 5, vertex=lambda g, N: g.standard_normal(N))
        g = np.random.default_rng(5)
        np.testing.assert_allclose(z[:, 0], g.standard_normal(1000) * g.standard_normal(1000))

    def test_star_is_pmi(self):
        star = ({"root": None, "a": "root", "b": "root", "c": "root"}, ["a", "b", "c"])
        Z = sample_tree_broadcast(BIG, star, 6, vertex=lambda g, N: g.standard_normal(N))
        assert mean_within(Z, 0.0)
        assert np.all(pmi_z_scores(Z, 4) < 5)

    @pytest.mark.parametrize("parents,leaves", [
        ({"a": None, "b": None}, ("a",)),
        ({"a": None, "b": "c"}, ("b",)),
        ({"a": None, "b": "c", "c": "b"}, ("b",)),
        ({"a": None, "b": "a"}, ("b", "b")),
        ({"a": None}, ("z",)),
    ])
    def test_malformed(self, parents, leaves):
        with pytest.raises(ValueError):
            Tree(parents, leaves)

    def test_read_tree(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(json.dumps({"parents": {"0": None, "1": "0", "2": "0"}, "leaves": ["1", "2"]}))
        t = read_tree(p)
        assert t.path("2") == ["0", "2"]
        p.write_text(json.dumps({"leaves": []}))
        with pytest.raises(ValueError):
            read_tree(p)


class TestMix:
    def test_identity(self, rng):
        S = rng.standard_normal((50, 3))
        np.testing.assert_array_equal(mix(S, np.eye(3)), S)

    def test_covariance(self):
        S = sample_alpha_mix(200_000, 0.5, 1)
        c, s = math.cos(0.4), math.sin(0.4)
        A = np.array([[c, -s], [s, c]])
        X = mix(S, A)
        np.testing.assert_allclose(np.cov(X.T), A @ np.cov(S.T) @ A.T, atol=1e-12)

    def test_singular(self, rng):
        with pytest.raises(ValueError, match="singular"):
            mix(rng.standard_normal((5, 2)), np.array([[1.0, 2.0], [2.0, 4.0]]))
        with pytest.raises(ValueError):
            mix(rng.standard_normal((5, 2)), np.eye(3))


class TestDeterminism:
    @pytest.mark.parametrize("text", ["square", "l1", "alpha:0.3", "dirichlet:3", "energy:3"])
    def test_bit_identical(self, text):
        spec = SourceSpec.parse(text)
        np.testing.assert_array_equal(spec.sample(5000, 42), spec.sample(5000, 42))
        assert not np.array_equal(spec.sample(5000, 42), spec.sample(5000, 43))

    def test_generator_and_seed_agree(self):
        np.testing.assert_array_equal(sample_l1_weighted(100, 9),
                                      sample_l1_weighted(100, np.random.default_rng(9)))

    def test_pilot_size(self):
        assert PILOT_SIZE == 100_000


class TestSourceSpec:
    def test_parse(self):
        assert SourceSpec.parse("alpha:0.6").alpha == 0.6
        assert SourceSpec.parse("dirichlet:4").n == 4
        assert SourceSpec.parse("energy").n == 2
        assert SourceSpec.parse("square", standardize=True).describe() == {
            "kind": "square", "standardize": True}

    def test_parse_tree(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(json.dumps({"parents": {"r": None, "x": "r", "y": "r"}, "leaves": ["x", "y"]}))
        spec = SourceSpec.parse(f"tree:@{p}")
        assert spec.sample(10, 0).shape == (10, 2)

    @pytest.mark.parametrize("text", ["gauss", "alpha", "dirichlet:", "tree:"])
    def test_reject(self, text):
        with pytest.raises(ValueError):
            SourceSpec.parse(text)

    def test_standardize_override(self):
        raw = SourceSpec.parse("alpha:0.5", standardize=False).sample(100, 1)
        np.testing.assert_array_equal(raw, sample_alpha_mix(100, 0.5, 1, standardize=False))
