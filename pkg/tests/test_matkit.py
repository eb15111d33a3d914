import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fblfading.matkit import (
    RngStream,
    eigvalsh_descending,
    hermitian_eigenvalues,
    log_multivariate_gamma,
    log_regularized_lower_incomplete_gamma,
    regularized_lower_incomplete_gamma,
    sample_isotropic_unitary,
    sample_standard_complex_gaussian,
    singular_values,
)
from oracles import gammainc_quad, log_gammainc_mp, log_multivariate_gamma_mp

from conftest import SEED


class TestIncompleteGamma:
    def test_zero_argument(self):
        assert regularized_lower_incomplete_gamma(3.0, 0.0) == 0.0

    def test_shape_one_closed_form(self):
        assert regularized_lower_incomplete_gamma(1.0, 1.0) == pytest.approx(
            1.0 - np.exp(-1.0), abs=1e-14
        )

    def test_against_quadrature_oracle(self):
        # frozen from the quadrature oracle (1 - 2/e)
        expected = 0.2642411176571154
        assert gammainc_quad(2.0, 1.0) == pytest.approx(expected, abs=1e-12)
        assert regularized_lower_incomplete_gamma(2.0, 1.0) == pytest.approx(
            expected, abs=1e-12
        )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            regularized_lower_incomplete_gamma(0.0, 1.0)
        with pytest.raises(ValueError):
            regularized_lower_incomplete_gamma(2.0, -0.5)
        with pytest.raises(ValueError):
            log_regularized_lower_incomplete_gamma(-1.0, 1.0)

    @pytest.mark.parametrize(
        "n,x,expected",
        [
            # frozen from 50-digit mpmath
            (165.0, 3.0, -502.66415632333822),
            (300.0, 1e-3, -3487.2334303174445),
            (0.5, 1e-8, -9.0895581376742708),
            (40.0, 2.0, -84.544804381486536),
        ],
    )
    def test_log_variant_deep_tail(self, n, x, expected):
        assert log_gammainc_mp(n, x) == pytest.approx(expected, rel=1e-12)
        got = log_regularized_lower_incomplete_gamma(n, x)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_log_variant_matches_linear_range(self):
        rng = np.random.default_rng(SEED)
        n = 10.0 ** rng.uniform(-0.5, 2.5, size=300)
        x = n * 10.0 ** rng.uniform(-1.0, 1.0, size=300)
        lin = np.array([regularized_lower_incomplete_gamma(a, b) for a, b in zip(n, x)])
        keep = lin > 1e-250
        got = log_regularized_lower_incomplete_gamma(n[keep], x[keep])
        np.testing.assert_allclose(got, np.log(lin[keep]), rtol=1e-10, atol=1e-15)

    def test_saturates_to_one(self):
        for n in (1.0, 7.0, 160.0, 1200.0):
            x = n + 40.0 * np.sqrt(n)
            assert regularized_lower_incomplete_gamma(n, x) == pytest.approx(1.0, abs=1e-8)
            assert abs(log_regularized_lower_incomplete_gamma(n, x)) < 1e-8

    @given(
        n=st.floats(0.05, 500.0),
        x1=st.floats(0.0, 2000.0),
        x2=st.floats(0.0, 2000.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_argument(self, n, x1, x2):
        lo, hi = sorted((x1, x2))
        a = log_regularized_lower_incomplete_gamma(n, lo)
        b = log_regularized_lower_incomplete_gamma(n, hi)
        assert a <= b + 1e-12
        assert b <= 1e-12

    def test_scalar_returns_float(self):
        out = log_regularized_lower_incomplete_gamma(2.0, 3.0)
        assert isinstance(out, float)


class TestMultivariateGamma:
    def test_order_one_is_plain_gamma(self):
        assert log_multivariate_gamma(1, 5.0) == pytest.approx(np.log(24.0), abs=1e-12)

    def test_order_two_at_two(self):
        # Gamma_2(2) = pi * Gamma(2) * Gamma(1) = pi
        assert log_multivariate_gamma(2, 2.0) == pytest.approx(np.log(np.pi), abs=1e-12)

    def test_large_argument_against_mp_oracle(self):
        expected = 2740.9180812848755  # frozen from 50-digit mpmath
        assert log_multivariate_gamma_mp(4, 168.0) == pytest.approx(expected, rel=1e-13)
        assert log_multivariate_gamma(4, 168.0) == pytest.approx(expected, rel=1e-12)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            log_multivariate_gamma(3, 2.0)
        with pytest.raises(ValueError):
            log_multivariate_gamma(0, 1.0)

    @given(m=st.integers(2, 8), a=st.floats(0.5, 300.0))
    @settings(max_examples=100, deadline=None)
    def test_recursion(self, m, a):
        a = a + m - 1  # ensure a > m - 1
        lhs = log_multivariate_gamma(m, a)
        rhs = (
            log_multivariate_gamma(m - 1, a)
            + log_multivariate_gamma(1, a - m + 1)
            + (m - 1) * np.log(np.pi)
        )
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-10)


class TestComplexGaussian:
    def test_moments(self):
        z = sample_standard_complex_gaussian(1000, 1000, RngStream(SEED, 1))
        power = np.abs(z) ** 2
        assert power.mean() == pytest.approx(1.0, abs=0.01)
        assert abs(z.mean()) < 0.01

    def test_real_part_distribution(self):
        z = sample_standard_complex_gaussian(1000, 1000, RngStream(SEED, 2))
        ks = stats.kstest(np.real(z).ravel() * np.sqrt(2.0), "norm")
        assert ks.statistic < 0.002

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            sample_standard_complex_gaussian(0, 3, RngStream(SEED))


class TestIsotropicUnitary:
    def test_orthonormal_columns(self):
        phi = sample_isotropic_unitary(7, 3, RngStream(SEED, 3))
        np.testing.assert_allclose(phi.conj().T @ phi, np.eye(3), atol=1e-12)

    def test_scalar_case_unit_modulus(self):
        gen = RngStream(SEED, 4).generator()
        phases = []
        for _ in range(2000):
            phi = sample_isotropic_unitary(1, 1, gen)
            assert abs(abs(phi[0, 0]) - 1.0) < 1e-12
            phases.append(np.angle(phi[0, 0]))
        ks = stats.kstest(np.array(phases), stats.uniform(-np.pi, 2 * np.pi).cdf)
        assert ks.pvalue > 1e-4

    def test_top_entry_power_uniform(self):
        # for a random unit vector in C^2, |phi_1|^2 is uniform on [0, 1]
        gen = RngStream(SEED, 5).generator()
        from fblfading.matkit import _haar_stiefel

        phi = _haar_stiefel(gen, 100_000, 2, 1)
        ks = stats.kstest(np.abs(phi[:, 0, 0]) ** 2, "uniform")
        assert ks.statistic < 0.005

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError):
            sample_isotropic_unitary(2, 3, RngStream(SEED))


class TestSpectra:
    def test_identity(self):
        np.testing.assert_allclose(hermitian_eigenvalues(np.eye(3)), np.ones(3))

    def test_diagonal(self):
        np.testing.assert_allclose(
            hermitian_eigenvalues(np.diag([5.0, 2.0, 9.0])), [9.0, 5.0, 2.0]
        )

    def test_trace_identity(self):
        gen = RngStream(SEED, 6).generator()
        g = gen.standard_normal((4, 4)) + 1j * gen.standard_normal((4, 4))
        a = g + g.conj().T
        w = hermitian_eigenvalues(a)
        assert np.all(np.diff(w) <= 0)
        assert w.sum() == pytest.approx(np.trace(a).real, rel=1e-9)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_eigenvalues(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_oversize(self):
        with pytest.raises(ValueError):
            hermitian_eigenvalues(np.eye(9))

    def test_scaled_identity_stack_singular_values(self):
        t, m = 12, 3
        x = np.zeros((t, m), dtype=complex)
        x[:m, :m] = np.sqrt(t) * np.eye(m)
        np.testing.assert_allclose(singular_values(x), np.full(m, np.sqrt(t)), rtol=1e-12)

    def test_zero_matrix(self):
        np.testing.assert_allclose(singular_values(np.zeros((5, 2))), np.zeros(2))

    def test_cross_oracle_against_eigensolver(self):
        gen = RngStream(SEED, 7).generator()
        y = gen.standard_normal((6, 2)) + 1j * gen.standard_normal((6, 2))
        sv = singular_values(y)
        ev = hermitian_eigenvalues(y.conj().T @ y)
        np.testing.assert_allclose(sv**2, ev, rtol=1e-9)

    def test_wide_rejected(self):
        with pytest.raises(ValueError):
            singular_values(np.zeros((2, 5)))

    @given(seed=st.integers(0, 10_000), n=st.integers(3, 6))
    @settings(max_examples=60, deadline=None)
    def test_frobenius_identity(self, seed, n):
        gen = np.random.default_rng(seed)
        y = gen.standard_normal((n + 2, n)) + 1j * gen.standard_normal((n + 2, n))
        sv = singular_values(y)
        assert (sv**2).sum() == pytest.approx((np.abs(y) ** 2).sum(), rel=1e-9)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_two_by_two_closed_form_matches_lapack(self, seed):
        gen = np.random.default_rng(seed)
        g = gen.standard_normal((50, 2, 2)) + 1j * gen.standard_normal((50, 2, 2))
        a = g + np.conj(np.swapaxes(g, 1, 2))
        fast = eigvalsh_descending(a)
        ref = np.linalg.eigvalsh(a)[..., ::-1]
        np.testing.assert_allclose(fast, ref, rtol=1e-9, atol=1e-9)


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(123, 5).generator().standard_normal(64)
        b = RngStream(123, 5).generator().standard_normal(64)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ_and_decorrelate(self):
        a = RngStream(123, 0).generator().standard_normal(200_000)
        b = RngStream(123, 1).generator().standard_normal(200_000)
        assert not np.array_equal(a[:64], b[:64])
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 4.0 / np.sqrt(a.size) + 1e-3

    def test_shifted(self):
        s = RngStream(9, 3).shifted(4)
        assert s == RngStream(9, 7)

    def test_validation(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(2**64)
        with pytest.raises(ValueError):
            RngStream(1, -2)
