import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpce import pce
from mpce.pce import (
    BasisSizeError,
    RankDeficiencyError,
    count_params,
    eval_basis,
    fit,
    predict,
    total_degree_set,
)


class TestIndexSet:
    def test_k2_smax1(self):
        s = total_degree_set(2, 1)
        assert s.indices.tolist() == [[0, 0], [1, 0], [0, 1]]

    def test_table_sizes(self):
        assert total_degree_set(18, 2).size == 190
        assert total_degree_set(30, 2).size == 496

    def test_no_duplicates_and_degree_bound(self):
        s = total_degree_set(4, 3)
        rows = {tuple(r) for r in s.indices}
        assert len(rows) == s.size
        assert (s.indices.sum(axis=1) <= 3).all()

    def test_graded_order(self):
        s = total_degree_set(3, 4)
        deg = s.indices.sum(axis=1)
        assert (np.diff(deg) >= 0).all()

    @settings(max_examples=40, deadline=None)
    @given(k=st.integers(1, 64), s_max=st.integers(0, 8))
    def test_cardinality_closed_form(self, k, s_max):
        S = math.comb(s_max + k, k)
        if S > 20_000:
            # enumerating the full set is the check; bound the work
            return
        assert total_degree_set(k, s_max).size == S

    def test_size_guard(self):
        with pytest.raises(BasisSizeError):
            total_degree_set(64, 8)


class TestCountParams:
    def test_paper_table_counts(self):
        assert count_params(2, 18, 20) == 3_800
        assert count_params(2, 30, 45) == 22_320

    def test_degree_zero(self):
        for k in (1, 7, 100):
            assert count_params(0, k, 9) == 9

    def test_large_inputs_exact(self):
        # exact integers even where factorials would overflow floats
        assert count_params(8, 64, 1) == math.comb(72, 8)


class TestBasis:
    def test_zero_index_is_one(self):
        iset = total_degree_set(3, 2)
        vals = eval_basis(iset, "hermite_probabilists", np.zeros(3))
        assert vals[0] == 1.0

    def test_hermite_degree2_at_zero(self):
        # He_2(0)/sqrt(2!) = -1/sqrt(2)
        iset = total_degree_set(1, 2)
        vals = eval_basis(iset, "hermite_probabilists", np.array([0.0]))
        assert vals[2] == pytest.approx(-1 / math.sqrt(2))

    def test_orthonormality_hermite_qmc(self):
        # expectation of Xi_s Xi_t over a standard normal estimated with a
        # scrambled-Sobol sample of 2^20 points (plain MC at this budget has
        # ~1e-2 noise on the degree-3 diagonal entries)
        from scipy.stats import norm, qmc

        iset = total_degree_set(3, 3)
        eng = qmc.Sobol(d=3, scramble=True, seed=123)
        Z = norm.ppf(eng.random(2**20))
        Phi = eval_basis(iset, "hermite_probabilists", Z)
        G = Phi.T @ Phi / Z.shape[0]
        assert np.abs(G - np.eye(iset.size)).max() <= 5e-3

    def test_orthonormality_legendre_qmc(self):
        from scipy.stats import qmc

        iset = total_degree_set(2, 3)
        eng = qmc.Sobol(d=2, scramble=True, seed=7)
        Z = 2.0 * eng.random(2**19) - 1.0
        Phi = eval_basis(iset, "legendre", Z)
        G = Phi.T @ Phi / Z.shape[0]
        assert np.abs(G - np.eye(iset.size)).max() <= 5e-3


class TestFit:
    def setup_method(self):
        self.rng = np.random.default_rng(1)

    def test_constant_target(self):
        Z = self.rng.standard_normal((40, 3))
        model = fit(Z, np.full(40, 3.25), 2, penalty=0.0)
        assert model.coeffs[0, 0] == pytest.approx(3.25, abs=1e-8)
        assert np.abs(model.coeffs[1:]).max() <= 1e-8

    def test_exact_degree2_recovery(self):
        k, s_max = 4, 2
        iset = total_degree_set(k, s_max)
        Z = self.rng.standard_normal((2 * iset.size + 10, k)) * 2.0 + 1.0
        c_true = self.rng.standard_normal((iset.size, 3))
        loc, scale = Z.mean(axis=0), Z.std(axis=0)
        Y = eval_basis(iset, "hermite_probabilists", (Z - loc) / scale) @ c_true
        model = fit(Z, Y, s_max, penalty=0.0)
        assert np.abs(model.coeffs - c_true).max() / np.abs(c_true).max() <= 1e-6
        assert np.abs(predict(model, Z) - Y).max() <= 1e-6

    def test_ridge_limit_kills_nonintercept(self):
        Z = self.rng.standard_normal((60, 3))
        Y = self.rng.standard_normal((60, 2))
        model = fit(Z, Y, 2, penalty=1e9)
        assert np.abs(model.coeffs[1:]).max() <= 1e-6 * np.abs(Y).max()

    def test_interpolation_regime(self):
        # S >= N at zero penalty: minimum-norm fit reproduces training targets
        Z = self.rng.standard_normal((6, 3))
        Y = self.rng.standard_normal((6, 2))
        model = fit(Z, Y, 2, penalty=0.0)  # S = 10 > 6
        assert np.abs(predict(model, Z) - Y).max() <= 1e-8

    def test_overdetermined_rank_deficiency_raises(self):
        z = self.rng.standard_normal((40, 1))
        Z = np.hstack([z, z])  # duplicated dimension
        with pytest.raises(RankDeficiencyError):
            fit(Z, self.rng.standard_normal(40), 2, penalty=0.0)

    def test_zero_variance_dimension_warns(self):
        # a dead input dimension produces a dead basis column, so a small
        # ridge is needed for the system to stay solvable
        Z = self.rng.standard_normal((30, 2))
        Z[:, 1] = 4.2
        with pytest.warns(RuntimeWarning, match="zero variance"):
            model = fit(Z, Z[:, 0], 1, penalty=1e-6)
        assert (model.scale > 0).all()
        assert model.scale[1] == 1.0

    def test_residual_nonincreasing_in_degree(self):
        Z = self.rng.standard_normal((80, 2))
        Y = np.sin(Z[:, 0]) + 0.3 * Z[:, 1] ** 3
        prev = np.inf
        for s_max in range(5):
            model = fit(Z, Y, s_max, penalty=0.0)
            res = np.linalg.norm(predict(model, Z)[:, 0] - Y)
            assert res <= prev + 1e-12
            prev = res

    def test_non_finite_rejected(self):
        Z = self.rng.standard_normal((10, 2))
        Y = np.full(10, np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            fit(Z, Y, 1)


class TestPredict:
    def test_intercept_only_model(self):
        rng = np.random.default_rng(3)
        Z = rng.standard_normal((30, 2))
        model = fit(Z, np.full(30, -1.5), 2, penalty=0.0)
        out = predict(model, rng.standard_normal((5, 2)))
        assert np.allclose(out, -1.5, atol=1e-7)

    def test_training_mean_point_evaluation(self):
        # at the training mean the degree-1 Hermite terms vanish, so the
        # prediction equals the direct basis evaluation with z = 0
        rng = np.random.default_rng(4)
        Z = rng.standard_normal((50, 3)) * 1.7 + 0.4
        Y = Z[:, 0] ** 2 + Z[:, 1] - Z[:, 2]
        model = fit(Z, Y, 2, penalty=0.0)
        z_mean = Z.mean(axis=0)
        direct = eval_basis(model.index_set, model.family, np.zeros((1, 3))) @ model.coeffs
        assert predict(model, z_mean)[0] == pytest.approx(direct[0, 0], rel=1e-10)
        basis_at_mean = eval_basis(model.index_set, model.family, model.standardize(z_mean))
        deg1 = model.index_set.indices.sum(axis=1) == 1
        assert np.abs(basis_at_mean[deg1]).max() <= 1e-12

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(5)
        model = fit(rng.standard_normal((20, 2)), rng.standard_normal(20), 1)
        with pytest.raises(ValueError, match="dimension"):
            predict(model, np.zeros(3))
