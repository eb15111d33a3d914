"""Monte Carlo evaluation of the achievability and converse rate bounds.

A :class:`SampleBank` holds i.i.d. draws of the per-codeword
information-density sum.  The achievability (dependency-testing) bound
searches the largest codebook size whose union-style error estimate stays
below the target; the converse bound evaluates the auxiliary-law tail
probability at the epsilon-quantile threshold by change of measure on the
same bank.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import stats

from ._parallel import DEFAULT_CHUNK_SIZE, run_chunked
from .matkit import RngStream
from .ustm import DensityParams, sample_k_chunk, sample_s_chunk

__all__ = [
    "LN2",
    "MonteCarloEstimate",
    "SampleBank",
    "RateBoundResult",
    "ResampleBudgetError",
    "build_bank",
    "dt_error_prob",
    "dt_max_rate",
    "mc_gamma",
    "mc_tail_prob",
    "mc_upper_rate",
]

LN2 = float(np.log(2.0))

# fraction of the bank size allowed to be resampled before giving up
RESAMPLE_BUDGET = 1e-4
# quantile estimates need at least this many expected tail samples
QUANTILE_GUARD = 100.0

_BISECT_TOL = 1e-6
_Z95 = 1.959963984540054


class ResampleBudgetError(RuntimeError):
    """Degeneracy resampling exceeded the allowed fraction of the bank."""


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Point estimate with its standard error and a 95% interval.

    Mean-type estimates carry std_error = sample std / sqrt(count) and a
    normal interval; quantile-type estimates carry an order-statistic
    interval with the matching implied standard error.
    """

    value: float
    std_error: float
    count: int
    ci_low: float
    ci_high: float

    @classmethod
    def from_mean(cls, samples: np.ndarray) -> "MonteCarloEstimate":
        m = float(samples.mean())
        se = float(samples.std(ddof=1) / np.sqrt(samples.size)) if samples.size > 1 else 0.0
        return cls(m, se, int(samples.size), m - _Z95 * se, m + _Z95 * se)


@dataclass
class SampleBank:
    """Reusable batch of i.i.d. per-codeword information-density draws."""

    law: str
    params: DensityParams
    blocks: int
    values: np.ndarray
    master_seed: int
    stream_base: int
    chunk_size: int
    resampled: int = 0
    perturbed: int = 0

    def __post_init__(self) -> None:
        if self.law not in ("P", "Q"):
            raise ValueError(f"law must be 'P' or 'Q', got {self.law!r}")
        if self.values.size < 1:
            raise ValueError("bank must hold at least one draw")
        if not np.isfinite(self.values).all():
            raise ValueError("bank contains non-finite draws")

    @property
    def count(self) -> int:
        return int(self.values.size)

    @property
    def blocklength(self) -> int:
        return self.blocks * self.params.coherence


@dataclass(frozen=True)
class RateBoundResult:
    """One evaluated rate bound in nats and bits per channel use."""

    rate_nats_per_cu: float
    rate_bits_per_cu: float
    epsilon_target: float
    bound_kind: str
    blocklength: int
    std_error_nats: float
    ci_low_bits: float
    ci_high_bits: float
    estimate: MonteCarloEstimate = field(repr=False)

    def __post_init__(self) -> None:
        if self.bound_kind not in ("dt_lower", "mc_upper"):
            raise ValueError(f"unknown bound kind {self.bound_kind!r}")
        if self.rate_nats_per_cu < 0:
            raise ValueError("rates are nonnegative")


def build_bank(
    params: DensityParams,
    blocks: int,
    count: int,
    law: str,
    rng: RngStream,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int = 1,
) -> SampleBank:
    """Draw ``count`` i.i.d. per-codeword sums under the P or Q law.

    Deterministic given ``rng`` and ``chunk_size``, independent of
    ``workers``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if blocks < 1:
        raise ValueError("blocks must be >= 1")
    if law == "P":
        chunk_fn = partial(sample_s_chunk, params, blocks)
    elif law == "Q":
        chunk_fn = partial(sample_k_chunk, params, blocks)
    else:
        raise ValueError(f"law must be 'P' or 'Q', got {law!r}")
    values, diag = run_chunked(
        chunk_fn, count, rng, chunk_size=chunk_size, workers=workers
    )
    resampled = int(diag.get("resampled", 0))
    if resampled > RESAMPLE_BUDGET * count * blocks:
        raise ResampleBudgetError(
            f"{resampled} resampled blocks exceed budget for count={count}"
        )
    return SampleBank(
        law=law,
        params=params,
        blocks=blocks,
        values=values,
        master_seed=rng.master_seed,
        stream_base=rng.stream_index,
        chunk_size=chunk_size,
        resampled=resampled,
        perturbed=int(diag.get("perturbed", 0)),
    )


# ---------------------------------------------------------------------------
# dependency-testing lower bound
# ---------------------------------------------------------------------------

def _dt_threshold(log_codebook_size: float) -> float:
    """ln((M - 1) / 2) for codebook size M = exp(log_codebook_size).

    The boundary value 0 (a one-word codebook) gives -inf, and the error
    estimate is then exactly zero.
    """
    if log_codebook_size < 0:
        raise ValueError("log codebook size must be nonnegative")
    with np.errstate(divide="ignore"):
        return float(
            log_codebook_size + np.log1p(-np.exp(-log_codebook_size)) - LN2
        )


def dt_error_prob(bank: SampleBank, log_codebook_size: float) -> MonteCarloEstimate:
    """Union-style error estimate E[exp(-[sum - ln((M-1)/2)]^+)].

    Nondecreasing in the codebook size on a fixed bank (pointwise monotone
    integrand), with values in [0, 1].
    """
    _require_p_bank(bank)
    tau = _dt_threshold(log_codebook_size)
    weights = np.exp(-np.maximum(bank.values - tau, 0.0))
    return MonteCarloEstimate.from_mean(weights)


def _dt_eps_value(values: np.ndarray, tau: float) -> float:
    return float(np.exp(-np.maximum(values - tau, 0.0)).mean())


def dt_max_rate(bank: SampleBank, epsilon: float) -> RateBoundResult:
    """Largest rate whose error estimate stays below epsilon, in rate units.

    Bisection over the log codebook size on the fixed bank (common random
    numbers), exploiting exact monotonicity; tolerance 1e-6 nats.  The
    reported interval folds in the Monte Carlo error of the feasibility
    boundary and the <= ln2 integer-codebook rounding.
    """
    _require_p_bank(bank)
    _check_quantile_guard(epsilon, bank.count)
    n = bank.blocklength
    values = bank.values
    lo = LN2
    hi = 2.0 * n * np.log(bank.params.gain)
    if _dt_eps_value(values, _dt_threshold(lo)) > epsilon:
        raise ValueError(
            f"infeasible: even one information bit violates epsilon={epsilon}"
        )
    if _dt_eps_value(values, _dt_threshold(hi)) <= epsilon:
        raise ValueError("bracket saturated: bank cannot resolve the rate")
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if _dt_eps_value(values, _dt_threshold(mid)) <= epsilon:
            lo = mid
        else:
            hi = mid
    log_size = lo
    estimate = dt_error_prob(bank, log_size)
    # d eps / d tau = eps(tau) - F(tau) on a fixed bank, so the rate error
    # is the epsilon error divided by that slope (and by n)
    tau = _dt_threshold(log_size)
    cdf_at_tau = float((values <= tau).mean())
    slope = max(estimate.value - cdf_at_tau, 1e-300)
    se_rate_nats = estimate.std_error / slope / n
    rate_nats = log_size / n
    half_width = (_Z95 * se_rate_nats + LN2 / n) / LN2
    rate_bits = rate_nats / LN2
    return RateBoundResult(
        rate_nats_per_cu=rate_nats,
        rate_bits_per_cu=rate_bits,
        epsilon_target=epsilon,
        bound_kind="dt_lower",
        blocklength=n,
        std_error_nats=se_rate_nats,
        ci_low_bits=rate_bits - half_width,
        ci_high_bits=rate_bits + half_width,
        estimate=estimate,
    )


# ---------------------------------------------------------------------------
# meta-converse upper bound
# ---------------------------------------------------------------------------

def mc_gamma(bank: SampleBank, epsilon: float) -> MonteCarloEstimate:
    """Empirical epsilon-quantile of the bank, normalized per channel use.

    The interval is the order-statistic 95% interval for the quantile.
    """
    _require_p_bank(bank)
    _check_quantile_guard(epsilon, bank.count)
    n = bank.blocklength
    q, lo, hi = _order_stat_quantile(bank.values, epsilon)
    se = (hi - lo) / (2.0 * _Z95) / n
    return MonteCarloEstimate(q / n, se, bank.count, lo / n, hi / n)


def mc_tail_prob(bank: SampleBank, gamma_n: float) -> MonteCarloEstimate:
    """Auxiliary-law tail probability by change of measure on a P bank.

    Estimates the Q-probability that the density sum is at least
    n*gamma_n as the P-mean of exp(-sum) over {sum >= n*gamma_n}; the
    weights are bounded by exp(-n*gamma_n).  Returns 0 with a one-sided
    rule-of-three interval when no bank point clears the threshold.
    """
    _require_p_bank(bank)
    if not np.isfinite(gamma_n) and gamma_n > 0:
        return MonteCarloEstimate(0.0, 0.0, bank.count, 0.0, 0.0)
    threshold = gamma_n * bank.blocklength
    selected = bank.values[bank.values >= threshold]
    count = bank.count
    if selected.size == 0:
        bound = 3.0 / count * float(np.exp(-threshold)) if np.isfinite(threshold) else 1.0
        warnings.warn("no bank point above the tail threshold; returning 0")
        return MonteCarloEstimate(0.0, 0.0, count, 0.0, bound)
    if selected.size < 100:
        warnings.warn(
            f"only {selected.size} bank points above the tail threshold; "
            "the tail estimate is unreliable"
        )
    weights = np.exp(-selected)
    mean = float(weights.sum() / count)
    second = float((weights**2).sum() / count)
    var = max(second - mean**2, 0.0)
    se = float(np.sqrt(var / count))
    return MonteCarloEstimate(
        mean, se, count, max(mean - _Z95 * se, 0.0), mean + _Z95 * se
    )


def mc_upper_rate(
    params: DensityParams,
    blocks: int,
    epsilon: float,
    count: int | None = None,
    rng: RngStream | None = None,
    *,
    bank: SampleBank | None = None,
    workers: int = 1,
) -> RateBoundResult:
    """Converse bound (1/n) ln(1 / tail) at the epsilon-quantile threshold.

    Composes :func:`mc_gamma` and :func:`mc_tail_prob` on one P bank
    (freshly built unless ``bank`` is supplied); the interval is propagated
    from the tail estimate.
    """
    if bank is None:
        if count is None or rng is None:
            raise ValueError("need either a prebuilt bank or (count, rng)")
        bank = build_bank(params, blocks, count, "P", rng, workers=workers)
    _require_p_bank(bank)
    if bank.params != params or bank.blocks != blocks:
        raise ValueError("bank was built for different parameters")
    n = bank.blocklength
    gamma = mc_gamma(bank, epsilon)
    tail = mc_tail_prob(bank, gamma.value)
    if tail.value <= 0.0:
        raise ValueError("tail estimate is zero; converse rate is unresolved")
    rate_nats = -np.log(tail.value) / n
    lo_bits = -np.log(min(tail.value + _Z95 * tail.std_error, 1.0)) / n / LN2
    hi_tail = max(tail.value - _Z95 * tail.std_error, tail.value * 1e-3)
    hi_bits = -np.log(hi_tail) / n / LN2
    se_nats = tail.std_error / tail.value / n
    return RateBoundResult(
        rate_nats_per_cu=float(rate_nats),
        rate_bits_per_cu=float(rate_nats) / LN2,
        epsilon_target=epsilon,
        bound_kind="mc_upper",
        blocklength=n,
        std_error_nats=float(se_nats),
        ci_low_bits=float(min(lo_bits, rate_nats / LN2)),
        ci_high_bits=float(hi_bits),
        estimate=tail,
    )


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _require_p_bank(bank: SampleBank) -> None:
    if bank.law != "P":
        raise ValueError("this estimator consumes a P-law bank")


def _check_quantile_guard(epsilon: float, count: int) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if epsilon * count < QUANTILE_GUARD:
        raise ValueError(
            f"quantile resolution guard: epsilon*count = {epsilon * count:.1f} < "
            f"{QUANTILE_GUARD:.0f}; increase the sample count"
        )


def _order_stat_quantile(values: np.ndarray, epsilon: float) -> tuple[float, float, float]:
    """(quantile, ci_low, ci_high) via order statistics at 95%."""
    sorted_vals = np.sort(values)
    count = sorted_vals.size
    k = int(np.ceil(epsilon * count))
    k = min(max(k, 1), count)
    lo_idx = int(stats.binom.ppf(0.025, count, epsilon))
    hi_idx = int(stats.binom.ppf(0.975, count, epsilon)) + 1
    lo_idx = min(max(lo_idx, 1), count)
    hi_idx = min(max(hi_idx, 1), count)
    return (
        float(sorted_vals[k - 1]),
        float(sorted_vals[lo_idx - 1]),
        float(sorted_vals[hi_idx - 1]),
    )
