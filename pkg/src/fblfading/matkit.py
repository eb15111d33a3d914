"""Special functions, seeded random streams, and small-matrix helpers.

Everything downstream (densities, bounds, baselines) is built on the
functions in this module.  Complex matrices are plain ``numpy`` arrays of
``complex128`` in the usual (rows, cols) layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "RngStream",
    "as_generator",
    "regularized_lower_incomplete_gamma",
    "log_regularized_lower_incomplete_gamma",
    "log_multivariate_gamma",
    "sample_standard_complex_gaussian",
    "sample_isotropic_unitary",
    "hermitian_eigenvalues",
    "singular_values",
]

MAX_MATRIX_DIM = 4096
MAX_ANTENNAS = 8

# scipy's linear-domain gammainc underflows around 1e-290; below this we
# switch to the log-domain series.
_LINEAR_FLOOR = 1e-280
# x beyond shape + 12*sqrt(shape) + 40 gives 1 - gammainc < 1e-16, i.e.
# log gammainc is zero to double precision.
_FAR_TAIL_SLOPE = 12.0
_FAR_TAIL_OFFSET = 40.0


@dataclass(frozen=True)
class RngStream:
    """Deterministic, splittable random stream.

    Identical ``(master_seed, stream_index)`` pairs reproduce the same draw
    sequence; distinct ``stream_index`` values give statistically
    independent streams (numpy SeedSequence spawn keys).  Chunked Monte
    Carlo assigns one stream per chunk, so results do not depend on how
    chunks are scheduled across workers.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not (0 <= int(self.master_seed) < 2 ** 64):
            raise ValueError("master_seed must fit in 64 bits")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed), spawn_key=(int(self.stream_index),)
        )
        return np.random.default_rng(seq)

    def shifted(self, offset: int) -> "RngStream":
        """Stream with the same master seed and a shifted index."""
        return RngStream(self.master_seed, self.stream_index + offset)


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    """Accept either an RngStream or a live Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


# ---------------------------------------------------------------------------
# incomplete gamma
# ---------------------------------------------------------------------------

def regularized_lower_incomplete_gamma(n: float, x: float) -> float:
    """Regularized lower incomplete gamma P(n, x) = gamma(n, x) / Gamma(n).

    Monotone nondecreasing in ``x`` with values in [0, 1].  For arguments
    where the linear-domain value underflows, use
    :func:`log_regularized_lower_incomplete_gamma` instead.
    """
    if n <= 0:
        raise ValueError(f"shape must be positive, got n={n}")
    if x < 0:
        raise ValueError(f"argument must be nonnegative, got x={x}")
    return float(special.gammainc(n, x))


def log_regularized_lower_incomplete_gamma(n, x):
    """Natural log of the regularized lower incomplete gamma function.

    Accurate down to arguments where the linear-domain value underflows
    (values as small as exp(-1e5) and beyond).  ``n`` and ``x`` may be
    scalars or broadcastable arrays; scalar inputs return a float.
    """
    n_arr = np.asarray(n, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(n_arr <= 0):
        raise ValueError("shape must be positive")
    if np.any(x_arr < 0):
        raise ValueError("argument must be nonnegative")
    nb, xb = np.broadcast_arrays(n_arr, x_arr)
    out = _log_gammainc_lower(nb.ravel().copy(), xb.ravel().copy()).reshape(nb.shape)
    if np.isscalar(n) and np.isscalar(x):
        return float(out)
    return out


def _log_gammainc_lower(shape: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Vectorized log gammainc for flat positive-shape arrays."""
    out = np.zeros_like(x)
    zero = x == 0.0
    out[zero] = -np.inf
    near = (~zero) & (x < shape + _FAR_TAIL_SLOPE * np.sqrt(shape) + _FAR_TAIL_OFFSET)
    idx = np.flatnonzero(near)
    if idx.size:
        out[idx] = _log_gammainc_near(shape[idx], x[idx])
    return out


def _log_gammainc_near(shape: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Log gammainc away from the saturated far tail (x > 0)."""
    vals = np.empty_like(x)
    hi = x >= shape + 1.0
    if hi.any():
        # upper tail is O(1) here, so 1 - Q loses no precision
        vals[hi] = np.log1p(-special.gammaincc(shape[hi], x[hi]))
    lo = ~hi
    if lo.any():
        g = special.gammainc(shape[lo], x[lo])
        glog = np.empty_like(g)
        ok = g >= _LINEAR_FLOOR
        glog[ok] = np.log(g[ok])
        if not ok.all():
            glog[~ok] = _log_gammainc_series(shape[lo][~ok], x[lo][~ok])
        vals[lo] = glog
    return vals


def _log_gammainc_series(shape: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Log-domain lower series; covers x < shape + 1 below underflow.

    ln P(n,x) = n ln x - x - ln Gamma(n+1) + ln sum_k prod_{i<=k} x/(n+i).
    All series terms are positive, so no cancellation occurs.
    """
    prefix = shape * np.log(x) - x - special.gammaln(shape + 1.0)
    total = np.ones_like(x)
    term = np.ones_like(x)
    active = np.arange(x.size)
    k = 1.0
    while active.size:
        term[active] *= x[active] / (shape[active] + k)
        total[active] += term[active]
        active = active[term[active] >= 1e-18 * total[active]]
        k += 1.0
        if k > 500_000:  # pragma: no cover - cannot trigger for x < shape+1
            raise RuntimeError("incomplete-gamma series failed to converge")
    return prefix + np.log(total)


def _log_gammainc_scalar_shape(n: float, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Hot-path variant for a scalar shape against an argument array."""
    if out is None:
        out = np.zeros_like(x)
    else:
        out[:] = 0.0
    cut = n + _FAR_TAIL_SLOPE * np.sqrt(n) + _FAR_TAIL_OFFSET
    zero = x == 0.0
    idx = np.flatnonzero((x < cut) & ~zero)
    if idx.size:
        xs = x[idx]
        out[idx] = _log_gammainc_near(np.full(xs.size, float(n)), xs)
    if zero.any():
        out[zero] = -np.inf
    return out


# ---------------------------------------------------------------------------
# multivariate gamma
# ---------------------------------------------------------------------------

def log_multivariate_gamma(m: int, a: float) -> float:
    """ln of the complex multivariate gamma function.

    ln Gamma_m(a) = m(m-1)/2 * ln(pi) + sum_{k=1..m} ln Gamma(a - k + 1),
    defined for a > m - 1.
    """
    m = int(m)
    if m < 1:
        raise ValueError(f"order must be a positive integer, got m={m}")
    if a <= m - 1:
        raise ValueError(f"need a > m - 1, got a={a}, m={m}")
    ks = np.arange(1, m + 1)
    return float(0.5 * m * (m - 1) * np.log(np.pi) + special.gammaln(a - ks + 1).sum())


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def complex_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. circularly symmetric CN(0,1) entries (real/imag var 1/2)."""
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) * np.sqrt(0.5)


def sample_standard_complex_gaussian(
    rows: int, cols: int, rng: RngStream | np.random.Generator
) -> np.ndarray:
    """A rows-by-cols matrix with i.i.d. CN(0,1) entries."""
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be >= 1")
    _check_dims(rows, cols)
    return complex_normal(as_generator(rng), (rows, cols))


def sample_isotropic_unitary(
    t: int, m: int, rng: RngStream | np.random.Generator
) -> np.ndarray:
    """A t-by-m isotropically distributed matrix with orthonormal columns.

    QR of a complex Gaussian matrix with the diagonal phase correction that
    makes the law exactly invariant under left multiplication by any fixed
    unitary matrix.
    """
    if m > t:
        raise ValueError(f"need m <= t, got t={t}, m={m}")
    _check_dims(t, m)
    gen = as_generator(rng)
    return _haar_stiefel(gen, 1, t, m)[0]


def _haar_stiefel(gen: np.random.Generator, count: int, t: int, m: int) -> np.ndarray:
    """Batch of isotropic t-by-m semi-unitary matrices, shape (count, t, m)."""
    g = complex_normal(gen, (count, t, m))
    q, r = np.linalg.qr(g)
    d = np.einsum("kii->ki", r)
    # q * diag(d/|d|) is the Q factor of the unique positive-diagonal QR
    return q * (d / np.abs(d))[:, None, :]


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

def hermitian_eigenvalues(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a small Hermitian matrix, sorted descending.

    The input must be square with side <= 8 and Hermitian to within 1e-10
    (relative to its largest entry).
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_ANTENNAS:
        raise ValueError(f"matrix side {a.shape[0]} exceeds cap {MAX_ANTENNAS}")
    scale = max(1.0, float(np.abs(a).max()))
    asym = float(np.abs(a - a.conj().T).max())
    if asym > 1e-10 * scale:
        raise ValueError(f"matrix is not Hermitian (asymmetry {asym:.2e})")
    return np.linalg.eigvalsh(a)[::-1]


def singular_values(y: np.ndarray) -> np.ndarray:
    """Singular values of a tall matrix (t >= n), sorted descending."""
    y = np.asarray(y)
    if y.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {y.shape}")
    t, n = y.shape
    if t < n:
        raise ValueError(f"expected a tall matrix, got shape {y.shape}")
    _check_dims(t, n)
    return np.linalg.svd(y, compute_uv=False)


def eigvalsh_descending(a: np.ndarray) -> np.ndarray:
    """Descending eigenvalues for a (..., n, n) Hermitian stack.

    Uses a closed form for n in {1, 2} (the Monte Carlo hot path) and
    LAPACK otherwise.
    """
    n = a.shape[-1]
    if n == 1:
        return a[..., 0, 0].real[..., None]
    if n == 2:
        p = a[..., 0, 0].real
        q = a[..., 1, 1].real
        c = a[..., 0, 1]
        half_tr = 0.5 * (p + q)
        half_disc = 0.5 * np.sqrt((p - q) ** 2 + 4.0 * np.abs(c) ** 2)
        return np.stack([half_tr + half_disc, half_tr - half_disc], axis=-1)
    return np.linalg.eigvalsh(a)[..., ::-1]


def _check_dims(rows: int, cols: int) -> None:
    if max(rows, cols) > MAX_MATRIX_DIM:
        raise ValueError(
            f"matrix dimension {max(rows, cols)} exceeds cap {MAX_MATRIX_DIM}"
        )
