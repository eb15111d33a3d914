"""Asymptotic reference curves: outage, diversity schemes, ergodic, DMT.

The outage random variable is normalized per channel use, (1/L) of the
summed log-determinants, so every curve shares the bits-per-channel-use
axis of the finite-blocklength bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ._parallel import DEFAULT_CHUNK_SIZE, run_chunked
from .bounds import LN2, MonteCarloEstimate, _check_quantile_guard, _order_stat_quantile
from .matkit import RngStream, as_generator, complex_normal
from .ustm import DensityParams

__all__ = [
    "OutageCurve",
    "DmtCurve",
    "mutual_info_sample",
    "mutual_info_chunk",
    "outage_probability",
    "outage_capacity",
    "alamouti_rate_sample",
    "alamouti_rate_chunk",
    "fstd_rate_sample",
    "fstd_rate_chunk",
    "ergodic_reference",
    "dmt_curve",
]

_Z95 = 1.959963984540054


@dataclass(frozen=True)
class OutageCurve:
    """One outage-rate point: the largest rate with outage <= epsilon."""

    epsilon: float
    rate_bits_per_cu: float
    blocks: int
    scheme: str
    estimate: MonteCarloEstimate = field(repr=False)

    def __post_init__(self) -> None:
        if self.rate_bits_per_cu < 0:
            raise ValueError("outage rates are nonnegative")
        if self.scheme not in ("ustm_outage", "alamouti", "fstd"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class DmtCurve:
    """Piecewise-linear diversity-multiplexing tradeoff curve."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        rs = [r for r, _ in self.vertices]
        ds = [d for _, d in self.vertices]
        if sorted(rs) != rs:
            raise ValueError("multiplexing vertices must be increasing")
        if any(d2 > d1 for d1, d2 in zip(ds, ds[1:])):
            raise ValueError("diversity must be nonincreasing")
        slopes = [
            (d2 - d1) / (r2 - r1)
            for (r1, d1), (r2, d2) in zip(self.vertices, self.vertices[1:])
        ]
        if any(s2 < s1 - 1e-12 for s1, s2 in zip(slopes, slopes[1:])):
            raise ValueError("curve must be convex")

    def diversity(self, r: float) -> float:
        """Linear interpolation of the tradeoff at multiplexing gain r."""
        rs = np.array([v[0] for v in self.vertices])
        ds = np.array([v[1] for v in self.vertices])
        if r < rs[0] or r > rs[-1]:
            raise ValueError(f"multiplexing gain {r} outside [{rs[0]}, {rs[-1]}]")
        return float(np.interp(r, rs, ds))


# ---------------------------------------------------------------------------
# mutual information / outage
# ---------------------------------------------------------------------------

def _log_det_capacity(h: np.ndarray, snr_over_m: float) -> np.ndarray:
    """ln det(I + a H H^H) for a (count, M, N) stack of fading draws."""
    m = h.shape[1]
    if m == 1:
        return np.log1p(snr_over_m * (np.abs(h[:, 0, :]) ** 2).sum(axis=1))
    if m == 2:
        p11 = (np.abs(h[:, 0, :]) ** 2).sum(axis=1)
        p22 = (np.abs(h[:, 1, :]) ** 2).sum(axis=1)
        cross = (h[:, 0, :].conj() * h[:, 1, :]).sum(axis=1)
        det = (1.0 + snr_over_m * p11) * (1.0 + snr_over_m * p22) - (
            snr_over_m**2
        ) * np.abs(cross) ** 2
        return np.log(det)
    gram = np.einsum("kin,kjn->kij", h, h.conj())
    mat = np.eye(m)[None] + snr_over_m * gram
    _, logdet = np.linalg.slogdet(mat)
    return logdet


def mutual_info_chunk(
    p: DensityParams, blocks: int, count: int, rng: RngStream | np.random.Generator
) -> tuple[np.ndarray, dict]:
    """``count`` draws of the per-cu mutual information RV, in nats."""
    gen = as_generator(rng)
    m, n = p.tx_antennas, p.rx_antennas
    h = complex_normal(gen, (count * blocks, m, n))
    vals = _log_det_capacity(h, p.snr / m).reshape(count, blocks).mean(axis=1)
    return vals, {}


def mutual_info_sample(
    p: DensityParams, blocks: int, rng: RngStream | np.random.Generator
) -> float:
    """One draw of (1/L) sum_l ln det(I + snr/M H_l H_l^H), nats per cu."""
    values, _ = mutual_info_chunk(p, blocks, 1, rng)
    return float(values[0])


def outage_probability(
    p: DensityParams,
    blocks: int,
    rate_nats_per_cu: float,
    count: int,
    rng: RngStream,
    *,
    workers: int = 1,
) -> MonteCarloEstimate:
    """Empirical frequency of the mutual information falling below the rate."""
    if rate_nats_per_cu < 0:
        raise ValueError("rate must be nonnegative")
    values, _ = run_chunked(
        partial(mutual_info_chunk, p, blocks), count, rng, workers=workers
    )
    hits = (values < rate_nats_per_cu).astype(float)
    return MonteCarloEstimate.from_mean(hits)


def outage_capacity(
    p: DensityParams,
    blocks: int,
    epsilon: float,
    count: int,
    rng: RngStream,
    *,
    workers: int = 1,
) -> OutageCurve:
    """Largest rate with outage probability <= epsilon (empirical quantile)."""
    values, _ = run_chunked(
        partial(mutual_info_chunk, p, blocks), count, rng, workers=workers
    )
    return _quantile_curve(values, epsilon, blocks, "ustm_outage")


# ---------------------------------------------------------------------------
# diversity schemes
# ---------------------------------------------------------------------------

def alamouti_rate_chunk(
    p: DensityParams, blocks: int, count: int, rng: RngStream | np.random.Generator
) -> tuple[np.ndarray, dict]:
    """Rate draws of the orthogonal two-antenna scheme, nats per cu.

    Full-rate orthogonal design with per-antenna power snr/2: the channel
    collapses to a scalar link with SNR (snr/2) ||H||_F^2.
    """
    if p.tx_antennas != 2:
        raise ValueError("the two-antenna orthogonal scheme needs tx_antennas = 2")
    gen = as_generator(rng)
    h = complex_normal(gen, (count * blocks, 2, p.rx_antennas))
    gains = (np.abs(h) ** 2).sum(axis=(1, 2))
    vals = np.log1p(0.5 * p.snr * gains).reshape(count, blocks).mean(axis=1)
    return vals, {}


def alamouti_rate_sample(
    p: DensityParams, blocks: int, rng: RngStream | np.random.Generator
) -> float:
    values, _ = alamouti_rate_chunk(p, blocks, 1, rng)
    return float(values[0])


def fstd_rate_chunk(
    p: DensityParams, blocks: int, count: int, rng: RngStream | np.random.Generator
) -> tuple[np.ndarray, dict]:
    """Rate draws of the four-antenna switched-diversity scheme, nats per cu.

    Half the channel uses run the orthogonal pair code on antennas {1,2},
    half on {3,4}, each with per-antenna power snr/2; the rate is the
    average of the two scalar-link rates.
    """
    if p.tx_antennas != 4:
        raise ValueError("the switched-diversity scheme needs tx_antennas = 4")
    gen = as_generator(rng)
    h = complex_normal(gen, (count * blocks, 4, p.rx_antennas))
    g1 = (np.abs(h[:, :2, :]) ** 2).sum(axis=(1, 2))
    g2 = (np.abs(h[:, 2:, :]) ** 2).sum(axis=(1, 2))
    vals = 0.5 * (np.log1p(0.5 * p.snr * g1) + np.log1p(0.5 * p.snr * g2))
    return vals.reshape(count, blocks).mean(axis=1), {}


def fstd_rate_sample(
    p: DensityParams, blocks: int, rng: RngStream | np.random.Generator
) -> float:
    values, _ = fstd_rate_chunk(p, blocks, 1, rng)
    return float(values[0])


def outage_rate_of_scheme(
    p: DensityParams,
    blocks: int,
    epsilon: float,
    count: int,
    rng: RngStream,
    scheme: str,
    *,
    workers: int = 1,
) -> OutageCurve:
    """Epsilon-outage rate of a diversity scheme ('alamouti' or 'fstd')."""
    chunk = {"alamouti": alamouti_rate_chunk, "fstd": fstd_rate_chunk}[scheme]
    values, _ = run_chunked(partial(chunk, p, blocks), count, rng, workers=workers)
    return _quantile_curve(values, epsilon, blocks, scheme)


def _quantile_curve(
    values: np.ndarray, epsilon: float, blocks: int, scheme: str
) -> OutageCurve:
    _check_quantile_guard(epsilon, values.size)
    q, lo, hi = _order_stat_quantile(values, epsilon)
    se = (hi - lo) / (2.0 * _Z95)
    est = MonteCarloEstimate(q / LN2, se / LN2, values.size, lo / LN2, hi / LN2)
    return OutageCurve(epsilon, q / LN2, blocks, scheme, est)


# ---------------------------------------------------------------------------
# ergodic reference and DMT
# ---------------------------------------------------------------------------

def ergodic_reference(
    p: DensityParams, count: int, rng: RngStream, *, workers: int = 1
) -> MonteCarloEstimate:
    """Coherent ergodic reference E[ln det(I + snr/M H H^H)], nats per cu.

    The large-L limit of the outage family; stands in for the noncoherent
    ergodic capacity, which has no closed form.
    """
    values, _ = run_chunked(
        partial(mutual_info_chunk, p, 1), count, rng, workers=workers
    )
    return MonteCarloEstimate.from_mean(values)


def dmt_curve(tx_antennas: int, rx_antennas: int, blocks: int) -> DmtCurve:
    """Piecewise-linear diversity-multiplexing tradeoff.

    Vertices (k, L (M-k)(N-k)) for k = 0..min(M, N); the k = 0 endpoint
    (0, L*M*N) anchors the curve at zero multiplexing.
    """
    if min(tx_antennas, rx_antennas, blocks) < 1:
        raise ValueError("antenna counts and blocks must be >= 1")
    kmax = min(tx_antennas, rx_antennas)
    verts = tuple(
        (float(k), float(blocks * (tx_antennas - k) * (rx_antennas - k)))
        for k in range(kmax + 1)
    )
    return DmtCurve(verts)
