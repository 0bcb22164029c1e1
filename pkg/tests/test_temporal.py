import numpy as np
import pytest

from mvggm import (
    assemble_temporal,
    default_bandwidth,
    fit_banded_regression,
    fit_temporal,
    gen_temporal_model,
    truncate_singular,
)
from mvggm.errors import (
    BadAlpha,
    ConfigError,
    NonPositiveDiagonal,
    ShapeMismatch,
)


class TestBandwidth:
    def test_power_rule(self):
        # (n q)^(1/(1+alpha)): 1024 samples at alpha = 1 -> 32
        assert default_bandwidth(32, 32, alpha=1.0, p=100) == 32
        assert default_bandwidth(8, 8, alpha=1.0, p=100) == 8
        assert default_bandwidth(10, 10, alpha=3.0, p=100) == 3

    def test_clamped_to_band_range(self):
        assert default_bandwidth(32, 32, alpha=1.0, p=5) == 4
        assert default_bandwidth(1, 1, alpha=1.0, p=10) == 1

    def test_large_alpha_floors_at_one(self):
        assert default_bandwidth(100, 100, alpha=1e6, p=50) == 1

    def test_conservative_rule(self):
        # exponent 1/(2(alpha+1)): 1024^(1/4) = 5.65 -> 5
        assert default_bandwidth(32, 32, alpha=1.0, p=100, rule="conservative") == 5

    def test_rejects_bad_inputs(self):
        with pytest.raises(BadAlpha):
            default_bandwidth(4, 4, alpha=0.0, p=10)
        with pytest.raises(ConfigError):
            default_bandwidth(4, 4, alpha=1.0, p=10, rule="oracle")
        with pytest.raises(ShapeMismatch):
            default_bandwidth(0, 4, alpha=1.0, p=10)


class TestBandedRegression:
    def test_band_structure(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((50, 6))
        beta, phi = fit_banded_regression(y, h=2)
        for t in range(6):
            lo = max(0, t - 2)
            outside = np.ones(6, dtype=bool)
            outside[lo:t] = False
            assert np.all(beta[outside, t] == 0.0)
        assert np.all(beta[:, 0] == 0.0)
        assert phi.shape == (6,)

    def test_ar1_recovery(self):
        # rows are independent AR(1) series with coefficient 0.5, unit noise
        rng = np.random.default_rng(1)
        rows, p, a = 4000, 8, 0.5
        y = np.empty((rows, p))
        y[:, 0] = rng.standard_normal(rows) / np.sqrt(1 - a * a)
        for t in range(1, p):
            y[:, t] = a * y[:, t - 1] + rng.standard_normal(rows)
        beta, phi = fit_banded_regression(y, h=1)
        est = np.array([beta[t - 1, t] for t in range(1, p)])
        assert np.max(np.abs(est - a)) < 0.05
        assert np.max(np.abs(phi[1:] - 1.0)) < 0.05

    def test_white_noise_variances(self):
        rng = np.random.default_rng(2)
        rows, p = 5000, 5
        y = rng.standard_normal((rows, p))
        beta, phi = fit_banded_regression(y, h=2)
        se = np.sqrt(2.0 / rows)  # var of a chi2 mean
        assert np.max(np.abs(phi - 1.0)) < 4 * se + 0.01
        assert np.max(np.abs(beta)) < 0.08

    def test_collinear_band_uses_ridge(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal((40, 4))
        y[:, 1] = y[:, 0]  # exactly collinear predecessors for t = 2
        beta, phi = fit_banded_regression(y, h=2)
        assert np.all(np.isfinite(beta)) and np.all(np.isfinite(phi))

    def test_rejects_bad_bandwidth(self):
        y = np.zeros((10, 4))
        with pytest.raises(ShapeMismatch):
            fit_banded_regression(y, h=0)
        with pytest.raises(ShapeMismatch):
            fit_banded_regression(y, h=4)


class TestTruncateSingular:
    def test_clips_diagonal(self):
        out = truncate_singular(np.diag([3.0, 0.1]), eta=2.0)
        assert np.allclose(out, np.diag([2.0, 0.5]), atol=1e-12)

    def test_orthogonal_unchanged(self):
        theta = 0.3
        rot = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        assert np.allclose(truncate_singular(rot, eta=10.0), rot, atol=1e-10)

    def test_all_values_in_band(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((6, 6)) * 3.0
        out = truncate_singular(a, eta=5.0)
        s = np.linalg.svd(out, compute_uv=False)
        assert np.all(s <= 5.0 + 1e-10)
        assert np.all(s >= 1.0 / 5.0 - 1e-10)

    def test_rejects_eta_below_one(self):
        with pytest.raises(ConfigError):
            truncate_singular(np.eye(2), eta=0.5)


class TestAssembleTemporal:
    def test_identity_case(self):
        p = 5
        asm = assemble_temporal(np.zeros((p, p)), np.ones(p), eta=10.0)
        assert np.allclose(asm.sigma_hat, np.eye(p), atol=1e-12)
        assert np.allclose(asm.omega_hat, np.eye(p), atol=1e-12)
        assert asm.frob_sq_over_p == pytest.approx(1.0, abs=1e-12)

    def test_recovers_generating_model(self):
        # true coefficients and unit innovations reproduce the trace-p sigma
        tm = gen_temporal_model(8, alpha=1.0, kappa5=0.2)
        asm = assemble_temporal(tm.beta, np.ones(8), eta=10.0)
        assert np.allclose(asm.sigma_hat, tm.sigma, atol=1e-10)
        assert np.allclose(asm.omega_hat, tm.omega, atol=1e-10)

    def test_matches_cholesky_of_arbitrary_covariance(self):
        # the lower Cholesky of any SPD sigma yields predecessor-regression
        # coefficients and innovation variances that rebuild sigma exactly
        rng = np.random.default_rng(3)
        p = 6
        g = rng.standard_normal((p, 2 * p))
        sigma = g @ g.T / (2 * p)
        sigma *= p / np.trace(sigma)
        low = np.linalg.cholesky(sigma)
        d = np.diag(low).copy()
        unit = low / d[None, :]
        beta = (np.eye(p) - np.linalg.inv(unit)).T
        asm = assemble_temporal(beta, d**2, eta=1e6)
        assert np.allclose(asm.sigma_hat, sigma, atol=1e-10)

    def test_trace_and_inverse_contracts(self):
        rng = np.random.default_rng(5)
        p = 7
        beta = np.zeros((p, p))
        beta[np.triu_indices(p, k=1)] = 0.1
        phi = rng.uniform(0.5, 2.0, p)
        asm = assemble_temporal(beta, phi, eta=10.0)
        assert np.trace(asm.sigma_hat) == pytest.approx(p, abs=1e-8)
        assert np.max(np.abs(asm.sigma_hat @ asm.omega_hat - np.eye(p))) < 1e-6
        want_frob = float(np.sum(asm.sigma_hat**2)) / p
        assert asm.frob_sq_over_p == pytest.approx(want_frob, rel=1e-12)

    def test_rejects_nonpositive_phi(self):
        with pytest.raises(NonPositiveDiagonal):
            assemble_temporal(np.zeros((3, 3)), np.array([1.0, 0.0, 1.0]))


class TestFitTemporal:
    def test_shapes_and_contracts(self, small_dataset):
        fit = fit_temporal(small_dataset)
        m, p = 2, 12
        assert fit.beta.shape == (m, p, p)
        assert fit.sigma_hat.shape == (m, p, p)
        for l in range(m):
            assert np.trace(fit.sigma_hat[l]) == pytest.approx(p, abs=1e-8)
            assert (
                np.max(np.abs(fit.sigma_hat[l] @ fit.omega_hat[l] - np.eye(p)))
                < 1e-6
            )
            want = float(np.sum(fit.sigma_hat[l] ** 2)) / p
            assert fit.frob_sq_over_p[l] == pytest.approx(want, rel=1e-12)

    def test_default_bandwidth_per_session(self, small_dataset):
        fit = fit_temporal(small_dataset, alpha=1.0)
        dims = small_dataset.dims
        want = tuple(
            default_bandwidth(dims.n[l], dims.q, 1.0, dims.p) for l in range(2)
        )
        assert fit.h == want

    def test_explicit_bandwidths(self, small_dataset):
        assert fit_temporal(small_dataset, h=3).h == (3, 3)
        assert fit_temporal(small_dataset, h=(2, 4)).h == (2, 4)
        with pytest.raises(ConfigError):
            fit_temporal(small_dataset, h=(2, 4, 6))
        with pytest.raises(ConfigError):
            fit_temporal(small_dataset, alpha=(1.0,))

    def test_truncation_engages(self, small_dataset):
        # with eta = 1 the factor becomes orthogonal, so sigma_hat's spectrum
        # is exactly the innovation variances rescaled to trace p
        fit = fit_temporal(small_dataset, eta=1.0)
        p = small_dataset.dims.p
        for l in range(2):
            s = np.linalg.svd(fit.sigma_hat[l], compute_uv=False)
            want = np.sort(fit.phi[l])[::-1] * (p / np.sum(fit.phi[l]))
            assert np.allclose(s, want, atol=1e-10)

    def test_estimates_temporal_covariance(self):
        from mvggm import Dimensions, SimulationSpec, simulate_dataset

        spec = SimulationSpec(
            dims=Dimensions(m=1, n=(80,), p=10, q=12), kind="chain", seed=2
        )
        ds = simulate_dataset(spec)
        fit = fit_temporal(ds)
        err = np.max(np.abs(fit.sigma_hat[0] - ds.ground_truth.sigma_t[0]))
        assert err < 0.15
