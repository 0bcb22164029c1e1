import numpy as np
import pytest

from mvggm import (
    MultiSessionDataset,
    dataset_from_models,
    debiased_phi,
    fit_spatial,
    gen_temporal_model,
    omega_rho,
    residuals,
)
from mvggm.errors import NonPositiveDiagonal, ShapeMismatch


def tridiag_precision():
    return np.array(
        [[1.0, -0.4, 0.0], [-0.4, 1.0, -0.4], [0.0, -0.4, 1.0]]
    )


def true_beta(omega):
    # beta[j, i] = -omega_ji / omega_ii, diagonal zero
    q = omega.shape[0]
    beta = -omega / np.diag(omega)[None, :]
    beta[np.arange(q), np.arange(q)] = 0.0
    return beta


def true_phi(omega):
    return omega / np.outer(np.diag(omega), np.diag(omega))


class TestResiduals:
    def test_zero_beta_returns_data(self, small_dataset):
        res = residuals(small_dataset, np.zeros((2, 8, 8)))
        for r, s in zip(res, small_dataset.sessions):
            assert np.array_equal(r, s)

    def test_matches_direct_computation(self, small_dataset):
        rng = np.random.default_rng(0)
        beta = rng.standard_normal((2, 8, 8)) * 0.1
        res = residuals(small_dataset, beta)
        for l, s in enumerate(small_dataset.sessions):
            assert np.allclose(res[l], s - s @ beta[l], atol=1e-14)

    def test_rejects_wrong_shape(self, small_dataset):
        with pytest.raises(ShapeMismatch):
            residuals(small_dataset, np.zeros((2, 8, 7)))


class TestDebiasedPhi:
    def test_unit_alternating_residual(self):
        # column variance (1/(n p)) sum eps^2: [1,-1,1,-1] gives exactly 1
        eps = np.zeros((1, 2, 2, 2))  # one session: (n, p, q) = (2, 2, 2)
        col0 = np.array([1.0, -1.0, 1.0, -1.0])
        col1 = np.array([2.0, 2.0, 2.0, 2.0])
        eps[0, :, :, 0] = col0.reshape(2, 2)
        eps[0, :, :, 1] = col1.reshape(2, 2)
        phi, flags = debiased_phi((eps[0],), np.zeros((1, 2, 2)))
        assert phi[0, 0, 0] == pytest.approx(1.0, abs=1e-15)
        assert phi[0, 1, 1] == pytest.approx(4.0, abs=1e-15)
        # cross term 2 - 2 + 2 - 2 = 0 and beta = 0, so the off-diagonal is 0
        assert phi[0, 0, 1] == pytest.approx(0.0, abs=1e-15)
        assert flags == (False,)

    def test_correction_terms(self):
        # hand-computed 2x2 case with nonzero beta
        e = np.array([[[1.0, 2.0], [3.0, -1.0]]])  # (n, p, q) = (1, 2, 2)
        beta = np.zeros((1, 2, 2))
        beta[0, 1, 0] = 0.5  # coefficient of node 1 in regression of node 0
        beta[0, 0, 1] = -0.25
        phi, _ = debiased_phi((e,), beta)
        np_scale = 1.0 / 2.0
        cross = 1 * 2 + 3 * (-1)
        ssq0 = 1 + 9
        ssq1 = 4 + 1
        want01 = -np_scale * (cross + ssq1 * beta[0, 1, 0] + ssq0 * beta[0, 0, 1])
        assert phi[0, 0, 1] == pytest.approx(want01, abs=1e-14)
        assert phi[0, 1, 0] == phi[0, 0, 1]  # bit-exact symmetry
        assert phi[0, 0, 0] == pytest.approx(np_scale * ssq0, abs=1e-14)

    def test_flags_nonpositive_diagonal(self):
        e = np.zeros((1, 2, 2))
        phi, flags = debiased_phi((e,), np.zeros((1, 2, 2)))
        assert flags == (True,)

    def test_unbiased_at_true_beta(self):
        # E Phi_hat = Omega_ij / (Omega_ii Omega_jj) at the true coefficients
        omega = tridiag_precision()
        beta = true_beta(omega)
        want = true_phi(omega)
        tm = gen_temporal_model(4, alpha=1.0, kappa5=0.0)  # identity rows
        reps = 200
        vals = np.empty((reps, 3, 3))
        for r in range(reps):
            ds = dataset_from_models([omega], [tm], n=(10,), seed=1000 + r)
            res = residuals(ds, beta[None])
            phi, _ = debiased_phi(res, beta[None])
            vals[r] = phi[0]
        mean = vals.mean(axis=0)
        se = vals.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(mean - want) < 4 * se + 1e-12)


class TestOmegaRho:
    def test_two_by_two_example(self):
        phi = np.array([[1.0, -0.5], [-0.5, 1.0]])
        omega, rho = omega_rho(phi)
        assert omega[0, 1] == pytest.approx(-0.5, abs=1e-15)
        assert omega[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert rho[0, 1] == pytest.approx(0.5, abs=1e-15)
        assert rho[0, 0] == -1.0 and rho[1, 1] == -1.0

    def test_unequal_variances(self):
        phi = np.array([[4.0, 1.0], [1.0, 1.0]])
        omega, rho = omega_rho(phi)
        assert omega[0, 0] == pytest.approx(0.25, abs=1e-15)
        assert omega[0, 1] == pytest.approx(1.0 / 4.0, abs=1e-15)
        assert rho[0, 1] == pytest.approx(-0.5, abs=1e-15)

    def test_stacked_input(self):
        phi = np.stack([np.eye(3), 2.0 * np.eye(3)])
        omega, rho = omega_rho(phi)
        assert omega.shape == rho.shape == (2, 3, 3)
        assert np.allclose(np.diagonal(rho, axis1=1, axis2=2), -1.0)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(NonPositiveDiagonal):
            omega_rho(np.array([[0.0, 0.1], [0.1, 1.0]]))

    def test_round_trip_from_precision(self):
        omega = tridiag_precision()
        om_hat, rho = omega_rho(true_phi(omega))
        assert np.allclose(om_hat, omega, atol=1e-12)
        assert rho[0, 1] == pytest.approx(0.4, abs=1e-12)


class TestFitSpatial:
    def test_conventions(self, small_dataset):
        fit = fit_spatial(small_dataset)
        m, q = 2, 8
        assert fit.rho.shape == (m, q, q)
        assert np.allclose(np.diagonal(fit.rho, axis1=1, axis2=2), -1.0)
        for mat in (fit.phi, fit.omega, fit.rho):
            assert np.max(np.abs(mat - mat.transpose(0, 2, 1))) < 1e-14
        idx = np.arange(q)
        assert np.all(fit.beta[:, idx, idx] == 0.0)
        assert all(fit.converged)
        assert fit.nonpositive_diag == (False, False)

    def test_residuals_consistent(self, small_dataset):
        fit = fit_spatial(small_dataset, gamma=0.1)
        for l, s in enumerate(small_dataset.sessions):
            assert np.allclose(fit.residuals[l], s - s @ fit.beta[l], atol=1e-12)

    def test_huge_gamma_gives_sample_moments(self, small_dataset):
        # beta = 0: diagonal is the raw second moment, off-diagonals are the
        # negated cross moments (no correction terms left to add)
        fit = fit_spatial(small_dataset, gamma=1e6)
        assert np.all(fit.beta == 0.0)
        s = small_dataset.sessions[0]
        flat = s.reshape(-1, 8)
        moment = flat.T @ flat / flat.shape[0]
        want = -moment + 2.0 * np.diag(np.diag(moment))
        assert np.allclose(fit.phi[0], want, atol=1e-12)

    def test_rho_scale_invariant(self, small_dataset):
        fit = fit_spatial(small_dataset, gamma=0.15)
        scaled = MultiSessionDataset(
            dims=small_dataset.dims,
            sessions=tuple(3.0 * s for s in small_dataset.sessions),
            name="scaled",
        )
        fit3 = fit_spatial(scaled, gamma=0.15)
        assert np.allclose(fit.rho, fit3.rho, atol=1e-10)
        assert np.allclose(fit.beta, fit3.beta, atol=1e-10)

    def test_cv_gamma_path(self, small_dataset):
        fit = fit_spatial(
            small_dataset, gamma="cv", cv_folds=3, cv_grid=(0.05, 0.2)
        )
        assert fit.gamma[0] in (0.05, 0.2)

    def test_recovers_strong_graph(self):
        # one strong edge, plenty of data: rho_hat near truth, zeros near zero
        q = 4
        omega = np.eye(q)
        omega[0, 1] = omega[1, 0] = -0.4
        tm = gen_temporal_model(6, alpha=1.0, kappa5=0.0)
        ds = dataset_from_models([omega], [tm], n=(60,), seed=5)
        fit = fit_spatial(ds, gamma=0.02)
        assert fit.rho[0, 0, 1] == pytest.approx(0.4, abs=0.08)
        assert abs(fit.rho[0, 2, 3]) < 0.08
