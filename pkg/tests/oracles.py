"""Independent reference oracles for expected test values.

Everything here deliberately avoids the package's own code paths: the
incomplete gamma comes from adaptive quadrature or mpmath, determinants are
evaluated in 50-digit arithmetic, and the single-antenna two-slot case is
written out from its closed forms (P(1, x) = 1 - exp(-x)).
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, optimize


def gammainc_quad(n: float, x: float) -> float:
    """Regularized lower incomplete gamma by adaptive quadrature (1e-12)."""
    from scipy.special import gammaln

    if x == 0:
        return 0.0
    val, _ = integrate.quad(
        lambda t: np.exp((n - 1) * np.log(t) - t - gammaln(n)),
        0.0,
        x,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=400,
    )
    return val


def log_gammainc_mp(n: float, x: float) -> float:
    """Log of the regularized lower incomplete gamma, 50-digit arithmetic."""
    import mpmath as mp

    with mp.workdps(50):
        return float(mp.log(mp.gammainc(mp.mpf(n), 0, mp.mpf(x), regularized=True)))


def log_multivariate_gamma_mp(m: int, a: float) -> float:
    import mpmath as mp

    with mp.workdps(50):
        val = 0.5 * m * (m - 1) * mp.log(mp.pi) + sum(
            mp.loggamma(mp.mpf(a) - k + 1) for k in range(1, m + 1)
        )
        return float(val)


def log_f_mp(b, rho: float, m: int, t: int) -> float:
    """Spectrum factor of the output pdf in 50-digit arithmetic."""
    import mpmath as mp

    with mp.workdps(50):
        b = [mp.mpf(float(v)) for v in b]
        n = len(b)
        kap = mp.mpf(rho) * t / (m + mp.mpf(rho) * t)
        gain = 1 + mp.mpf(rho) * t / m
        rows = []
        for j in range(1, n + 1):
            if j <= m:
                rows.append(
                    [bk ** (m - j) * mp.gammainc(t + j - 2 * m, 0, kap * bk, regularized=True)
                     for bk in b]
                )
            else:
                rows.append([bk ** (t - j) * mp.e ** (-kap * bk) for bk in b])
        det = mp.det(mp.matrix(rows))
        vander = mp.mpf(1)
        for i in range(n):
            for j in range(i + 1, n):
                vander *= b[i] - b[j]
        prod = mp.mpf(1)
        for bk in b:
            prod *= mp.e ** (-bk / gain) / bk ** (t - n)
        return float(mp.log(det / vander * prod))


def log_output_pdf_mp(b, rho: float, m: int, t: int) -> float:
    """Log output pdf from the squared singular values, via mpmath."""
    import mpmath as mp

    n = len(b)
    with mp.workdps(50):
        const = (
            m * (t - m - n) * mp.log(1 + mp.mpf(rho) * t / m)
            - n * t * mp.log(mp.pi)
            - m * (t - m) * mp.log(mp.mpf(rho) * t / m)
            + log_multivariate_gamma_mp(m, t)
            - log_multivariate_gamma_mp(m, m)
        )
        return float(const) + log_f_mp(b, rho, m, t)


class ScalarTwoSlotOracle:
    """Closed-form oracle for one transmit/receive antenna and T = 2.

    Under the channel law the spectrum is b = gain*u + v with u, v unit
    exponentials; under the unitary-output law b has density
    (1 - exp(-kap*b)) exp(-b/gain) / (snr*T).  The spectrum factor reduces
    to f(b) = (1 - exp(-kap*b)) exp(-b/gain) / b.
    """

    def __init__(self, rho: float):
        self.rho = rho
        self.t = 2
        self.gain = 1.0 + 2.0 * rho
        self.kap = 2.0 * rho / (1.0 + 2.0 * rho)
        self.c = np.log(self.kap)

    def log_f(self, b):
        return np.log1p(-np.exp(-self.kap * b)) - b / self.gain - np.log(b)

    def density_sum(self, u, v):
        """The per-block draw S as a function of the two exponentials."""
        return self.c - (u + v) - self.log_f(self.gain * u + v)

    def channel_spectrum_pdf(self, b):
        d = self.gain
        return (np.exp(-b / d) - np.exp(-b)) / (d - 1.0)

    def output_spectrum_pdf(self, b):
        return (1.0 - np.exp(-self.kap * b)) * np.exp(-b / self.gain) / (2.0 * self.rho)

    def mean_S(self) -> float:
        val, _ = integrate.quad(
            lambda b: self.log_f(b) * self.channel_spectrum_pdf(b),
            1e-12, 80.0 * self.gain, limit=400,
        )
        return self.c - 2.0 - val

    def mean_K(self) -> float:
        val, _ = integrate.quad(
            lambda b: (self.c - b * (1.0 + 1.0 / self.gain) / 2.0 - self.log_f(b))
            * self.output_spectrum_pdf(b),
            1e-12, 80.0 * self.gain, limit=400,
        )
        return val

    def cdf_S(self, s: float) -> float:
        """P(S <= s) by slicing over u; S is decreasing in v."""

        def slice_prob(u):
            if self.density_sum(u, 1e-12) <= s:
                return 1.0
            vstar = optimize.brentq(
                lambda v: self.density_sum(u, v) - s, 1e-12, 2000.0
            )
            return np.exp(-vstar)

        val, _ = integrate.quad(
            lambda u: slice_prob(u) * np.exp(-u), 0.0, 60.0, limit=300
        )
        return val

    def quantile_S(self, epsilon: float) -> float:
        return optimize.brentq(lambda s: self.cdf_S(s) - epsilon, -60.0, 30.0)


def siso_outage_probability(rho: float, rate_nats: float) -> float:
    """P(ln(1 + rho |h|^2) < R) for exponential |h|^2."""
    return 1.0 - np.exp(-(np.exp(rate_nats) - 1.0) / rho)


def siso_outage_capacity(rho: float, epsilon: float) -> float:
    """ln(1 + rho ln(1/(1-eps))), nats."""
    return np.log1p(rho * np.log(1.0 / (1.0 - epsilon)))
