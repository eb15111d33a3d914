"""Output density induced by unitary space-time inputs, and samplers.

The channel is Y = sqrt(snr/M) X H + W on a T-by-N block, with H and W
i.i.d. CN(0,1) and codeword blocks constrained to X^H X = T I_M.  This
module evaluates, in log domain:

* the closed-form output pdf q(Y) induced by isotropic unitary inputs,
  which depends on Y only through its singular values;
* the conditional (channel) pdf p(Y | X);
* per-block information-density draws under the channel law (``S``) and
  under the q-output law (``K``), which feed the achievability and
  converse bounds.

All density arithmetic stays in natural logs with per-row factoring of the
determinant, since raw factors span exp(+-several thousand) at T = 168.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matkit import (
    MAX_ANTENNAS,
    MAX_MATRIX_DIM,
    RngStream,
    as_generator,
    complex_normal,
    eigvalsh_descending,
    log_multivariate_gamma,
    singular_values,
    _haar_stiefel,
    _log_gammainc_scalar_shape,
)

__all__ = [
    "DensityParams",
    "DegenerateSpectrumError",
    "NonPositiveDensityError",
    "d_matrix_diagonal",
    "c_const",
    "a_matrix_entry",
    "log_f",
    "log_output_pdf",
    "log_output_pdf_from_spectrum",
    "log_channel_pdf",
    "sample_S",
    "sample_K",
    "sample_s_chunk",
    "sample_k_chunk",
    "sample_k_resampled_unitary_chunk",
    "sample_s_reference_chunk",
]

# consecutive spectrum values closer than this (relative) get the
# multiplicative perturbation treatment before the Vandermonde division
DEGENERACY_RTOL = 1e-10
PERTURBATION = 1e-8

_MAX_RESAMPLE_ROUNDS = 64


class DegenerateSpectrumError(RuntimeError):
    """Spectrum gap below tolerance even after perturbation."""


class NonPositiveDensityError(RuntimeError):
    """Determinant sign came out nonpositive: numerical breakdown."""


@dataclass(frozen=True)
class DensityParams:
    """Scenario parameters for the unitary-input output density.

    ``snr`` is the linear power ratio at each receive antenna;
    ``coherence`` is the number of channel uses per fading block.
    """

    snr: float
    tx_antennas: int
    coherence: int
    rx_antennas: int

    def __post_init__(self) -> None:
        if not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")
        for name in ("tx_antennas", "rx_antennas"):
            v = getattr(self, name)
            if not 1 <= int(v) <= MAX_ANTENNAS:
                raise ValueError(f"{name} must be in [1, {MAX_ANTENNAS}], got {v}")
        if not 1 <= int(self.coherence) <= MAX_MATRIX_DIM:
            raise ValueError(
                f"coherence must be in [1, {MAX_MATRIX_DIM}], got {self.coherence}"
            )
        if self.coherence < self.tx_antennas + self.rx_antennas:
            raise ValueError(
                "coherence must be at least tx_antennas + rx_antennas "
                f"({self.tx_antennas + self.rx_antennas}), got {self.coherence}"
            )

    @classmethod
    def from_db(
        cls, snr_db: float, tx_antennas: int, coherence: int, rx_antennas: int
    ) -> "DensityParams":
        return cls(10.0 ** (snr_db / 10.0), tx_antennas, coherence, rx_antennas)

    @property
    def gain(self) -> float:
        """Per-entry variance 1 + snr*T/M of the signal rows."""
        return 1.0 + self.snr * self.coherence / self.tx_antennas

    @property
    def tail_scale(self) -> float:
        """snr*T / (M + snr*T), the argument scale inside the gamma terms."""
        st = self.snr * self.coherence
        return st / (self.tx_antennas + st)


def _require_density_scope(p: DensityParams) -> None:
    # The N-by-N determinant form of the output pdf covers tx <= rx only;
    # for tx > rx it does not normalize (checked numerically).
    if p.tx_antennas > p.rx_antennas:
        raise ValueError(
            "output density requires tx_antennas <= rx_antennas, got "
            f"tx={p.tx_antennas}, rx={p.rx_antennas}"
        )


# ---------------------------------------------------------------------------
# closed-form pieces
# ---------------------------------------------------------------------------

def d_matrix_diagonal(p: DensityParams) -> np.ndarray:
    """Diagonal of the conditional output covariance at the canonical input.

    First M entries are 1 + snr*T/M, the remaining T - M are 1.
    """
    out = np.ones(p.coherence)
    out[: p.tx_antennas] = p.gain
    return out


def c_const(p: DensityParams) -> float:
    """Additive constant of the per-block information density.

    c = M(T-M) ln[snr*T/(M + snr*T)] - ln[Gamma_M(T)/Gamma_M(M)].
    """
    M, T = p.tx_antennas, p.coherence
    return M * (T - M) * np.log(p.tail_scale) - (
        log_multivariate_gamma(M, T) - log_multivariate_gamma(M, M)
    )


def a_matrix_entry(j: int, k: int, b: float, p: DensityParams) -> tuple[float, float]:
    """(log magnitude, sign) of the (j, k) determinant entry at value b.

    Rows with j <= M carry a regularized incomplete gamma factor; the
    remaining rows are pure exponentials.  All entries are positive, so the
    sign is always +1.
    """
    _require_density_scope(p)
    M, T, N = p.tx_antennas, p.coherence, p.rx_antennas
    if not 1 <= j <= N or not 1 <= k <= N:
        raise ValueError(f"indices must be in [1, {N}], got j={j}, k={k}")
    if not b > 0:
        raise ValueError(f"need b > 0, got {b}")
    if j <= M:
        shape = T + j - 2 * M
        if shape <= 0:
            raise ValueError(
                f"gamma shape T + j - 2M = {shape} is not positive "
                f"(T={T}, j={j}, M={M})"
            )
        x = np.array([p.tail_scale * b])
        log_mag = (M - j) * np.log(b) + float(_log_gammainc_scalar_shape(float(shape), x)[0])
    else:
        log_mag = (T - j) * np.log(b) - p.tail_scale * b
    return log_mag, 1.0


def _log_a_row(j: int, logb: np.ndarray, x: np.ndarray, p: DensityParams) -> np.ndarray:
    """Log magnitudes of determinant row j (1-based) at x = tail_scale * b."""
    M, T = p.tx_antennas, p.coherence
    if j <= M:
        shape = T + j - 2 * M
        if shape <= 0:
            raise ValueError(f"gamma shape T + j - 2M = {shape} is not positive")
        return (M - j) * logb + _log_gammainc_scalar_shape(float(shape), x.ravel()).reshape(
            logb.shape
        )
    return (T - j) * logb - x


def _log_a_entries_batch(b: np.ndarray, p: DensityParams) -> np.ndarray:
    """Log magnitudes of the determinant entries, shape (batch, N, N)."""
    _require_density_scope(p)
    N = p.rx_antennas
    logb = np.log(b)
    x = p.tail_scale * b
    out = np.empty(b.shape[:-1] + (N, N))
    for j in range(1, N + 1):
        out[..., j - 1, :] = _log_a_row(j, logb, x, p)
    return out


def _log_f_batch(b: np.ndarray, p: DensityParams) -> tuple[np.ndarray, np.ndarray]:
    """(log f, bad) over a (batch, N) stack of strictly descending spectra.

    ``bad`` marks rows whose determinant came out with a nonpositive sign,
    which signals numerical breakdown rather than a valid value.
    """
    _require_density_scope(p)
    N, T = p.rx_antennas, p.coherence
    with np.errstate(invalid="ignore", divide="ignore"):
        return _log_f_batch_impl(b, p)


def _log_f_batch_impl(b: np.ndarray, p: DensityParams) -> tuple[np.ndarray, np.ndarray]:
    N, T = p.rx_antennas, p.coherence
    logb = np.log(b)
    if N == 1:
        x = p.tail_scale * b
        logdet = _log_a_row(1, logb, x, p)[..., 0]
        bad = np.zeros(b.shape[:-1], dtype=bool)
        vander = 0.0
    elif N == 2:
        x = p.tail_scale * b
        row1 = _log_a_row(1, logb, x, p)
        row2 = _log_a_row(2, logb, x, p)
        main = row1[..., 0] + row2[..., 1]
        anti = row1[..., 1] + row2[..., 0]
        bad = ~(main > anti)
        with np.errstate(invalid="ignore"):
            logdet = main + np.log1p(-np.exp(anti - main))
        vander = np.log(b[..., 0] - b[..., 1])
    else:
        log_a = _log_a_entries_batch(b, p)
        row_max = log_a.max(axis=-1)
        sign, ld = np.linalg.slogdet(np.exp(log_a - row_max[..., None]))
        logdet = ld + row_max.sum(axis=-1)
        bad = sign <= 0
        vander = np.zeros(b.shape[:-1])
        for i in range(N - 1):
            for j in range(i + 1, N):
                vander += np.log(b[..., i] - b[..., j])
    rest = (-b / p.gain).sum(axis=-1) - (T - N) * logb.sum(axis=-1)
    return logdet - vander + rest, bad


def _perturb_degenerate(b: np.ndarray) -> tuple[np.ndarray, int, np.ndarray]:
    """Split near-equal spectrum values multiplicatively.

    Returns (possibly copied b, number of perturbed rows, rows still
    degenerate after the perturbation).
    """
    N = b.shape[-1]
    if N == 1:
        return b, 0, np.zeros(b.shape[0], dtype=bool)
    # '<=' so an exactly-zero gap stays degenerate even when the relative
    # tolerance underflows (denormal spectra)
    gaps_bad = (b[:, :-1] - b[:, 1:]) <= DEGENERACY_RTOL * b[:, :-1]
    rows = gaps_bad.any(axis=1)
    if not rows.any():
        return b, 0, np.zeros(b.shape[0], dtype=bool)
    b = b.copy()
    idx = np.flatnonzero(rows)
    factors = 1.0 + PERTURBATION * np.arange(N - 1, -1, -1)
    b[idx] = b[idx] * factors
    still = np.zeros(b.shape[0], dtype=bool)
    still[idx] = (
        (b[idx, :-1] - b[idx, 1:]) <= DEGENERACY_RTOL * b[idx, :-1]
    ).any(axis=1)
    return b, idx.size, still


def _log_f_with_policy(
    b: np.ndarray, p: DensityParams, diag: dict
) -> tuple[np.ndarray, np.ndarray]:
    """Batched log f with the degeneracy perturbation; (values, bad rows)."""
    b, n_pert, still = _perturb_degenerate(b)
    diag["perturbed"] = diag.get("perturbed", 0) + n_pert
    # keep degenerate rows out of the log; they get resampled by the caller
    safe = b.copy() if still.any() else b
    if still.any():
        safe[still] = np.arange(p.rx_antennas, 0, -1)
    values, bad = _log_f_batch(safe, p)
    return values, bad | still


# ---------------------------------------------------------------------------
# public densities
# ---------------------------------------------------------------------------

def log_f(b, p: DensityParams) -> float:
    """Log of the spectrum factor of the output pdf at one spectrum.

    ``b`` must be the strictly descending, strictly positive squared
    singular values (length N).  Raises :class:`DegenerateSpectrumError`
    when consecutive values stay within relative 1e-10 of each other after
    the perturbation policy, and :class:`NonPositiveDensityError` when the
    determinant sign is lost to cancellation.
    """
    arr = np.asarray(b, dtype=float).reshape(1, -1)
    if arr.shape[1] != p.rx_antennas:
        raise ValueError(f"expected {p.rx_antennas} values, got {arr.shape[1]}")
    if not np.all(arr > 0):
        raise ValueError("spectrum values must be strictly positive")
    if np.any(np.diff(arr[0]) > 0):
        raise ValueError("spectrum values must be descending")
    arr, _, still = _perturb_degenerate(arr)
    if still.any():
        raise DegenerateSpectrumError(f"spectrum gap below tolerance: {arr[0]}")
    value, bad = _log_f_batch(arr, p)
    if bad[0]:
        raise NonPositiveDensityError(f"determinant sign nonpositive at {arr[0]}")
    return float(value[0])


def log_output_pdf_from_spectrum(b: np.ndarray, p: DensityParams) -> np.ndarray:
    """Log output pdf for a (batch, N) stack of squared singular values."""
    M, T, N = p.tx_antennas, p.coherence, p.rx_antennas
    b = np.atleast_2d(np.asarray(b, dtype=float))
    diag: dict = {}
    values, bad = _log_f_with_policy(b, p, diag)
    if bad.any():
        raise NonPositiveDensityError(f"{int(bad.sum())} spectra failed")
    const = (
        M * (T - M - N) * np.log(p.gain)
        - N * T * np.log(np.pi)
        - M * (T - M) * np.log(p.snr * T / M)
        + log_multivariate_gamma(M, T)
        - log_multivariate_gamma(M, M)
    )
    return const + values


def log_output_pdf(y: np.ndarray, p: DensityParams) -> float:
    """Log pdf of the output block Y under the unitary input ensemble.

    Depends on Y only through its singular values.
    """
    y = np.asarray(y)
    if y.shape != (p.coherence, p.rx_antennas):
        raise ValueError(
            f"expected a {p.coherence}x{p.rx_antennas} matrix, got {y.shape}"
        )
    sv2 = singular_values(y) ** 2
    return float(log_output_pdf_from_spectrum(sv2[None, :], p)[0])


def log_channel_pdf(y: np.ndarray, x: np.ndarray, p: DensityParams) -> float:
    """Log conditional pdf of Y given the scaled-unitary codeword block X.

    ln p(Y|X) = -tr(Y^H (snr/M XX^H + I)^{-1} Y) - N ln det(snr/M XX^H + I)
    - NT ln(pi).  The inverse reduces to I - (1 - 1/gain) XX^H / T under
    the codeword constraint X^H X = T I_M.
    """
    M, T, N = p.tx_antennas, p.coherence, p.rx_antennas
    y = np.asarray(y)
    x = np.asarray(x)
    if y.shape != (T, N):
        raise ValueError(f"expected Y of shape {(T, N)}, got {y.shape}")
    if x.shape != (T, M):
        raise ValueError(f"expected X of shape {(T, M)}, got {x.shape}")
    gram = x.conj().T @ x
    if np.abs(gram - T * np.eye(M)).max() > 1e-8 * max(1.0, T):
        raise ValueError("codeword constraint X^H X = T I violated")
    xy = x.conj().T @ y
    quad = (np.abs(y) ** 2).sum() - (1.0 - 1.0 / p.gain) / T * (np.abs(xy) ** 2).sum()
    return float(-quad - N * M * np.log(p.gain) - N * T * np.log(np.pi))


# ---------------------------------------------------------------------------
# information-density samplers
# ---------------------------------------------------------------------------

def _draw_channel_spectra(
    p: DensityParams, count: int, gen: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-block (trace term, descending spectrum) under the channel law.

    The T-by-N Gaussian block enters only through W1 = Ztop^H Ztop (top M
    rows) and W2 = Zbot^H Zbot (bottom T - M rows); W2 is drawn directly in
    Wishart form via the Bartlett factorization, which removes the
    T-dependence of the sampling cost.  N in {1, 2} runs on scalar arrays.
    """
    M, N, T = p.tx_antennas, p.rx_antennas, p.coherence
    d = p.gain
    dof = T - M
    g = complex_normal(gen, (count, M, N))
    if N == 1:
        w1 = (np.abs(g[:, :, 0]) ** 2).sum(axis=1)
        w2 = gen.gamma(dof, size=count)
        trace = w1 + w2
        return trace, (d * w1 + w2)[:, None]
    if N == 2:
        g0 = g[:, :, 0]
        g1 = g[:, :, 1]
        w1_00 = (np.abs(g0) ** 2).sum(axis=1)
        w1_11 = (np.abs(g1) ** 2).sum(axis=1)
        w1_01 = (g0.conj() * g1).sum(axis=1)
        diag0 = gen.gamma(dof, size=count)
        z = complex_normal(gen, count)
        diag1 = gen.gamma(dof - 1, size=count)
        zsq = z.real**2 + z.imag**2
        a00 = d * w1_00 + diag0
        a11 = d * w1_11 + zsq + diag1
        a01_sq = np.abs(d * w1_01 + np.sqrt(diag0) * z.conj()) ** 2
        half_tr = 0.5 * (a00 + a11)
        half_disc = 0.5 * np.sqrt((a00 - a11) ** 2 + 4.0 * a01_sq)
        trace = w1_00 + w1_11 + diag0 + diag1 + zsq
        return trace, np.stack([half_tr + half_disc, half_tr - half_disc], axis=-1)
    w1 = np.einsum("kmi,kmj->kij", g.conj(), g)
    lower = np.zeros((count, N, N), dtype=complex)
    for j in range(N):
        lower[:, j, j] = np.sqrt(gen.gamma(dof - j, size=count))
        for i in range(j + 1, N):
            lower[:, i, j] = complex_normal(gen, count)
    trace = np.einsum("kii->k", w1).real + (np.abs(lower) ** 2).sum(axis=(1, 2))
    w2 = np.einsum("kil,kjl->kij", lower, lower.conj())
    spectra = eigvalsh_descending(p.gain * w1 + w2)
    return trace, spectra


def _draw_auxiliary_spectra(
    p: DensityParams, count: int, gen: np.random.Generator, resample_unitary: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Per-block (trace term, descending spectrum) under the q-output law.

    Simulates Y = sqrt(snr T / M) Phi H + W with Phi isotropic unitary,
    which realizes the unitary-input output law.  The trace term uses the
    left singular factor of Y itself, or an independently redrawn isotropic
    factor when ``resample_unitary`` is set (the two agree in law).
    """
    M, N, T = p.tx_antennas, p.rx_antennas, p.coherence
    phi = _haar_stiefel(gen, count, T, M)
    h = complex_normal(gen, (count, M, N))
    w = complex_normal(gen, (count, T, N))
    y = np.sqrt(p.snr * T / M) * (phi @ h) + w
    gram = np.einsum("kti,ktj->kij", y.conj(), y)
    spectra = eigvalsh_descending(gram)
    shrink = 1.0 - 1.0 / p.gain
    if resample_unitary:
        u = _haar_stiefel(gen, count, T, N)
        top_frac = (np.abs(u[:, :M, :]) ** 2).sum(axis=1)
        trace = (spectra * (1.0 - shrink * top_frac)).sum(axis=1)
    else:
        trace = (np.abs(y) ** 2).sum(axis=(1, 2)) - shrink * (
            np.abs(y[:, :M, :]) ** 2
        ).sum(axis=(1, 2))
    return trace, spectra


def _info_density_blocks(
    p: DensityParams,
    count: int,
    gen: np.random.Generator,
    draw,
    diag: dict,
) -> np.ndarray:
    """One block's density draws with the degeneracy/resampling policy."""
    const = c_const(p)
    trace, spectra = draw(p, count, gen)
    values_f, bad = _log_f_with_policy(spectra, p, diag)
    out = const - trace - values_f
    rounds = 0
    while bad.any():
        idx = np.flatnonzero(bad)
        diag["resampled"] = diag.get("resampled", 0) + idx.size
        trace, spectra = draw(p, idx.size, gen)
        values_f, sub_bad = _log_f_with_policy(spectra, p, diag)
        out[idx] = const - trace - values_f
        bad[:] = False
        bad[idx[sub_bad]] = True
        rounds += 1
        if rounds > _MAX_RESAMPLE_ROUNDS:
            raise NonPositiveDensityError("resampling failed to clear bad spectra")
    return out


def sample_s_chunk(
    p: DensityParams,
    blocks: int,
    count: int,
    rng: RngStream | np.random.Generator,
) -> tuple[np.ndarray, dict]:
    """``count`` draws of the summed density over ``blocks`` under P.

    Returns (values, diagnostics); diagnostics counts perturbed and
    resampled blocks.
    """
    _require_density_scope(p)
    gen = as_generator(rng)
    diag: dict = {"perturbed": 0, "resampled": 0}
    total = np.zeros(count)
    for _ in range(blocks):
        total += _info_density_blocks(p, count, gen, _draw_channel_spectra, diag)
    return total, diag


def sample_k_chunk(
    p: DensityParams,
    blocks: int,
    count: int,
    rng: RngStream | np.random.Generator,
) -> tuple[np.ndarray, dict]:
    """``count`` draws of the summed density over ``blocks`` under Q."""
    _require_density_scope(p)
    gen = as_generator(rng)
    diag: dict = {"perturbed": 0, "resampled": 0}
    total = np.zeros(count)

    def draw(pp, cnt, g):
        return _draw_auxiliary_spectra(pp, cnt, g, resample_unitary=False)

    for _ in range(blocks):
        total += _info_density_blocks(p, count, gen, draw, diag)
    return total, diag


def sample_k_resampled_unitary_chunk(
    p: DensityParams,
    blocks: int,
    count: int,
    rng: RngStream | np.random.Generator,
) -> tuple[np.ndarray, dict]:
    """Q-law draws with an independently redrawn isotropic unitary factor.

    Distribution-equality cross-check for :func:`sample_k_chunk`.
    """
    _require_density_scope(p)
    gen = as_generator(rng)
    diag: dict = {"perturbed": 0, "resampled": 0}
    total = np.zeros(count)

    def draw(pp, cnt, g):
        return _draw_auxiliary_spectra(pp, cnt, g, resample_unitary=True)

    for _ in range(blocks):
        total += _info_density_blocks(p, count, gen, draw, diag)
    return total, diag


def sample_s_reference_chunk(
    p: DensityParams,
    blocks: int,
    count: int,
    rng: RngStream | np.random.Generator,
) -> tuple[np.ndarray, dict]:
    """Literal-construction P sampler: full T-by-N Gaussian blocks.

    Slower than :func:`sample_s_chunk` but follows the defining recipe
    (draw Z, take the spectrum of Z^H D Z); kept as a cross-check that the
    Wishart-form fast path samples the same law.
    """
    _require_density_scope(p)
    gen = as_generator(rng)
    diag: dict = {"perturbed": 0, "resampled": 0}
    dvec = d_matrix_diagonal(p)
    total = np.zeros(count)

    def draw(pp, cnt, g):
        z = complex_normal(g, (cnt, pp.coherence, pp.rx_antennas))
        gram = np.einsum("kti,t,ktj->kij", z.conj(), dvec, z)
        trace = (np.abs(z) ** 2).sum(axis=(1, 2))
        return trace, eigvalsh_descending(gram)

    for _ in range(blocks):
        total += _info_density_blocks(p, count, gen, draw, diag)
    return total, diag


def sample_S(
    p: DensityParams, blocks: int, rng: RngStream | np.random.Generator
) -> float:
    """One draw of the per-codeword information-density sum under P."""
    values, _ = sample_s_chunk(p, blocks, 1, rng)
    return float(values[0])


def sample_K(
    p: DensityParams, blocks: int, rng: RngStream | np.random.Generator
) -> float:
    """One draw of the per-codeword information-density sum under Q."""
    values, _ = sample_k_chunk(p, blocks, 1, rng)
    return float(values[0])
