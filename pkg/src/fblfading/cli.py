"""Command-line driver: scenario configs, coherence sweeps, CSV emission.

Subcommands ``dt``, ``mc``, ``outage``, ``dmt`` evaluate one quantity;
``sweep`` runs a full scenario (from a key=value config file or a named
preset) and writes one CSV row per (scheme, coherence) point.  Progress
goes to stderr only; the CSV is the machine contract.

Exit codes: 0 full success, 1 validation error, 2 partial per-point
failure (failed points carry an error column instead of aborting).
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import baselines, bounds
from .matkit import MAX_ANTENNAS, RngStream
from .ustm import DensityParams

__all__ = [
    "ConfigError",
    "SweepSpec",
    "RatePoint",
    "parse_config",
    "run_sweep",
    "write_csv",
    "read_csv",
    "main",
]

VALID_SCHEMES = ("dt", "mc", "outage", "alamouti", "fstd", "dmt", "ergodic")

CSV_HEADER = "T,L,scheme,rate_bits_per_cu,ci_low,ci_high,samples,seed,error"

DEFAULT_SEED = 1234567890
DEFAULT_SAMPLES = 10**6

# each (coherence, purpose) pair owns a disjoint block of stream indices
_STREAM_STRIDE = 1 << 20
_PURPOSES = {"bank": 0, "outage": 1, "alamouti": 2, "fstd": 3, "ergodic": 4}


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending key."""


@dataclass(frozen=True)
class SweepSpec:
    """Validated sweep scenario."""

    n: int
    tx: int
    rx: int
    snr_db: float
    epsilon: float
    coherence_values: tuple[int, ...]
    schemes: tuple[str, ...]
    samples: int
    seed: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError(f"n: blocklength must be >= 1, got {self.n}")
        for key in ("tx", "rx"):
            v = getattr(self, key)
            if not 1 <= v <= MAX_ANTENNAS:
                raise ConfigError(f"{key}: antenna count must be in [1, {MAX_ANTENNAS}], got {v}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon: must be in (0, 1), got {self.epsilon}")
        if self.samples < 1:
            raise ConfigError(f"samples: must be >= 1, got {self.samples}")
        if self.epsilon * self.samples < 100:
            raise ConfigError(
                "samples: quantile resolution guard requires epsilon*samples >= 100, "
                f"got {self.epsilon * self.samples:.1f}"
            )
        if not self.coherence_values:
            raise ConfigError("coherence: need at least one coherence value")
        for t in self.coherence_values:
            if self.n % t != 0:
                raise ConfigError(f"coherence: T={t} does not divide n={self.n}")
            if t < self.tx + self.rx:
                raise ConfigError(
                    f"coherence: T={t} is below tx+rx={self.tx + self.rx}"
                )
        if not self.schemes:
            raise ConfigError("schemes: need at least one scheme")
        for s in self.schemes:
            if s not in VALID_SCHEMES:
                raise ConfigError(
                    f"schemes: unknown scheme {s!r}; valid: {', '.join(VALID_SCHEMES)}"
                )
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must fit in 64 bits, got {self.seed}")


@dataclass(frozen=True)
class RatePoint:
    """One plotted point: (coherence, scheme) with rate and interval."""

    T: int
    L: int
    scheme: str
    rate_bits_per_cu: float
    ci_low: float
    ci_high: float
    samples: int
    seed: int
    error: str = ""

    def __post_init__(self) -> None:
        if not self.error and not (
            self.ci_low <= self.rate_bits_per_cu <= self.ci_high
        ):
            raise ValueError("interval must bracket the rate")


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = ("n", "tx", "rx", "epsilon", "coherence", "schemes")
_ALL_KEYS = _REQUIRED_KEYS + ("snr_db", "samples", "seed")


def parse_config(text: str) -> SweepSpec:
    """Parse a flat key = value configuration document."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"{key}: missing required key")
    n = _parse_int("n", raw["n"])
    tx = _parse_int("tx", raw["tx"])
    rx = _parse_int("rx", raw["rx"])
    return SweepSpec(
        n=n,
        tx=tx,
        rx=rx,
        snr_db=_parse_float("snr_db", raw.get("snr_db", "6.0")),
        epsilon=_parse_float("epsilon", raw["epsilon"]),
        coherence_values=_parse_coherence(raw["coherence"], n, tx, rx),
        schemes=_parse_schemes(raw["schemes"]),
        samples=_parse_int("samples", raw.get("samples", str(DEFAULT_SAMPLES))),
        seed=_parse_int("seed", raw.get("seed", str(DEFAULT_SEED))),
    )


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def _parse_float(key: str, value: str) -> float:
    try:
        out = float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc
    if not math.isfinite(out):
        raise ConfigError(f"{key}: expected a finite number, got {value!r}")
    return out


def _parse_coherence(value: str, n: int, tx: int, rx: int) -> tuple[int, ...]:
    if value.strip().lower() == "all":
        return divisor_coherences(n, tx, rx)
    out = tuple(_parse_int("coherence", part) for part in value.split(",") if part.strip())
    return tuple(sorted(set(out)))


def _parse_schemes(value: str) -> tuple[str, ...]:
    parts = [part.strip().lower() for part in value.split(",") if part.strip()]
    seen: list[str] = []
    for part in parts:
        if part not in seen:
            seen.append(part)
    return tuple(seen)


def divisor_coherences(n: int, tx: int, rx: int) -> tuple[int, ...]:
    """All divisors T of n with T >= tx + rx."""
    return tuple(t for t in range(tx + rx, n + 1) if n % t == 0)


# ---------------------------------------------------------------------------
# sweep execution
# ---------------------------------------------------------------------------

def _stream_for(spec: SweepSpec, t_index: int, purpose: str) -> RngStream:
    slot = t_index * len(_PURPOSES) + _PURPOSES[purpose]
    return RngStream(spec.seed, slot * _STREAM_STRIDE)


def run_sweep(spec: SweepSpec, *, workers: int = 1, progress: bool = False) -> list[RatePoint]:
    """All requested (scheme, coherence) points, deterministic in the spec.

    Per-point failures are recorded in the point's error column; the sweep
    itself never aborts on them.
    """
    points: list[RatePoint] = []
    need_bank = bool({"dt", "mc"} & set(spec.schemes))
    for t_index, T in enumerate(sorted(spec.coherence_values)):
        L = spec.n // T
        params = DensityParams.from_db(spec.snr_db, spec.tx, T, spec.rx)
        bank = None
        bank_error: Exception | None = None
        if need_bank:
            if progress:
                print(f"[sweep] building bank T={T} L={L}", file=sys.stderr)
            try:
                bank = bounds.build_bank(
                    params,
                    L,
                    spec.samples,
                    "P",
                    _stream_for(spec, t_index, "bank"),
                    workers=workers,
                )
            except Exception as exc:  # noqa: BLE001 - recorded per point
                bank_error = exc
        for scheme in spec.schemes:
            if progress:
                print(f"[sweep] T={T} scheme={scheme}", file=sys.stderr)
            try:
                points.append(
                    _evaluate_point(
                        spec, scheme, T, L, params, bank, bank_error, t_index, workers
                    )
                )
            except Exception as exc:  # noqa: BLE001 - recorded per point
                points.append(_error_point(spec, scheme, T, L, exc))
    return points


def _evaluate_point(
    spec: SweepSpec,
    scheme: str,
    T: int,
    L: int,
    params: DensityParams,
    bank,
    bank_error: Exception | None,
    t_index: int,
    workers: int,
) -> RatePoint:
    if scheme in ("dt", "mc"):
        if bank_error is not None:
            raise bank_error
        if scheme == "dt":
            res = bounds.dt_max_rate(bank, spec.epsilon)
        else:
            res = bounds.mc_upper_rate(params, L, spec.epsilon, bank=bank)
        return RatePoint(
            T, L, scheme, res.rate_bits_per_cu, res.ci_low_bits, res.ci_high_bits,
            spec.samples, spec.seed,
        )
    if scheme == "outage":
        curve = baselines.outage_capacity(
            params, L, spec.epsilon, spec.samples,
            _stream_for(spec, t_index, "outage"), workers=workers,
        )
        est = curve.estimate
        return RatePoint(
            T, L, scheme, curve.rate_bits_per_cu, est.ci_low, est.ci_high,
            spec.samples, spec.seed,
        )
    if scheme in ("alamouti", "fstd"):
        curve = baselines.outage_rate_of_scheme(
            params, L, spec.epsilon, spec.samples,
            _stream_for(spec, t_index, scheme), scheme, workers=workers,
        )
        est = curve.estimate
        return RatePoint(
            T, L, scheme, curve.rate_bits_per_cu, est.ci_low, est.ci_high,
            spec.samples, spec.seed,
        )
    if scheme == "ergodic":
        est = baselines.ergodic_reference(
            params, spec.samples, _stream_for(spec, t_index, "ergodic"),
            workers=workers,
        )
        return RatePoint(
            T, L, scheme, est.value / bounds.LN2, est.ci_low / bounds.LN2,
            est.ci_high / bounds.LN2, spec.samples, spec.seed,
        )
    if scheme == "dmt":
        # closed form; the rate column carries the maximal diversity
        # d*(0) = L*M*N for this branch count (see README)
        d0 = baselines.dmt_curve(spec.tx, spec.rx, L).diversity(0.0)
        return RatePoint(T, L, scheme, d0, d0, d0, 0, spec.seed)
    raise ConfigError(f"schemes: unknown scheme {scheme!r}")


def _error_point(spec: SweepSpec, scheme: str, T: int, L: int, exc: Exception) -> RatePoint:
    return RatePoint(
        T, L, scheme, math.nan, math.nan, math.nan, spec.samples, spec.seed,
        error=f"{type(exc).__name__}: {exc}",
    )


# ---------------------------------------------------------------------------
# CSV contract
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else format(x, ".9g")


def write_csv(points: list[RatePoint], destination) -> None:
    """Write points as CSV, ordered by (scheme, T), 9 significant digits."""
    rows = sorted(points, key=lambda pt: (pt.scheme, pt.T))
    lines = [CSV_HEADER]
    for pt in rows:
        error = pt.error.replace(",", ";").replace("\n", " ")
        lines.append(
            f"{pt.T},{pt.L},{pt.scheme},{_fmt(pt.rate_bits_per_cu)},"
            f"{_fmt(pt.ci_low)},{_fmt(pt.ci_high)},{pt.samples},{pt.seed},{error}"
        )
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)


def read_csv(source) -> list[RatePoint]:
    """Parse a CSV produced by :func:`write_csv`."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError("csv: missing or unexpected header")
    out = []
    for line in lines[1:]:
        t, l_, scheme, rate, lo, hi, samples, seed, error = line.split(",", 8)
        out.append(
            RatePoint(
                int(t), int(l_), scheme, float(rate), float(lo), float(hi),
                int(samples), int(seed), error,
            )
        )
    return out


# ---------------------------------------------------------------------------
# presets and entry point
# ---------------------------------------------------------------------------

_PRESETS: dict[str, dict] = {
    "fig1": dict(tx=2, rx=2, epsilon=1e-3, samples=10**6,
                 schemes=("dt", "mc", "outage", "alamouti"), deep=False),
    "fig2": dict(tx=4, rx=4, epsilon=1e-3, samples=10**6,
                 schemes=("dt", "mc", "outage", "fstd"), deep=False),
    "fig3": dict(tx=2, rx=2, epsilon=1e-5, samples=10**7,
                 schemes=("dt", "mc", "outage", "alamouti"), deep=True),
    "fig4": dict(tx=4, rx=4, epsilon=1e-5, samples=10**7,
                 schemes=("dt", "mc", "outage", "fstd"), deep=True),
}


def preset_spec(name: str, *, deep: bool = False, **overrides) -> SweepSpec:
    """Build the sweep spec of a named preset, with optional overrides."""
    if name not in _PRESETS:
        raise ConfigError(f"preset: unknown preset {name!r}; valid: {', '.join(_PRESETS)}")
    base = dict(_PRESETS[name])
    needs_deep = base.pop("deep")
    spec_kwargs = dict(
        n=168, snr_db=6.0, seed=DEFAULT_SEED,
        tx=base["tx"], rx=base["rx"], epsilon=base["epsilon"],
        samples=base["samples"], schemes=base["schemes"],
    )
    spec_kwargs.update({k: v for k, v in overrides.items() if v is not None})
    if "coherence_values" not in spec_kwargs or spec_kwargs["coherence_values"] is None:
        spec_kwargs["coherence_values"] = divisor_coherences(
            spec_kwargs["n"], spec_kwargs["tx"], spec_kwargs["rx"]
        )
    if needs_deep and spec_kwargs["samples"] >= 10**7 and not deep:
        raise ConfigError(
            f"preset: {name} builds {spec_kwargs['samples']:.0e}-sample banks; "
            "pass --deep to confirm, or lower --samples"
        )
    return SweepSpec(**spec_kwargs)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on bad usage, matching config errors
        raise ConfigError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--tx", type=int, default=2, help="transmit antennas")
    sub.add_argument("--rx", type=int, default=2, help="receive antennas")
    sub.add_argument("--n", type=int, default=168, help="blocklength in channel uses")
    sub.add_argument("--coherence", default="all",
                     help="comma list of coherence values, or 'all' divisors of n")
    sub.add_argument("--snr-db", type=float, default=6.0, help="SNR in dB")
    sub.add_argument("--epsilon", type=float, default=1e-3, help="target error probability")
    sub.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="Monte Carlo samples")
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed")
    sub.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sub.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    sub.add_argument("--quiet", action="store_true", help="suppress stderr progress")


def _build_parser() -> _Parser:
    parser = _Parser(prog="fblfading", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("dt", "dependency-testing achievability lower bound"),
        ("mc", "meta-converse upper bound"),
        ("outage", "outage capacity"),
    ):
        sub = subs.add_parser(name, help=helptext)
        _add_common(sub)
    dmt = subs.add_parser("dmt", help="diversity-multiplexing tradeoff vertices")
    dmt.add_argument("--tx", type=int, default=2)
    dmt.add_argument("--rx", type=int, default=2)
    dmt.add_argument("--branches", type=int, default=1, help="diversity branches L")
    dmt.add_argument("--out", default=None)
    sweep = subs.add_parser("sweep", help="full multi-scheme sweep")
    _add_common(sweep)
    sweep.add_argument("--config", default=None, help="key=value config file")
    sweep.add_argument("--preset", default=None, choices=sorted(_PRESETS),
                       help="named scenario preset")
    sweep.add_argument("--schemes", default=None,
                       help="comma list out of: " + ",".join(VALID_SCHEMES))
    sweep.add_argument("--deep", action="store_true",
                       help="confirm 1e7-sample presets")
    return parser


def _spec_from_args(args: argparse.Namespace, schemes: tuple[str, ...]) -> SweepSpec:
    return SweepSpec(
        n=args.n,
        tx=args.tx,
        rx=args.rx,
        snr_db=args.snr_db,
        epsilon=args.epsilon,
        coherence_values=_parse_coherence(args.coherence, args.n, args.tx, args.rx),
        schemes=schemes,
        samples=args.samples,
        seed=args.seed,
    )


def _emit(points: list[RatePoint], out: str | None) -> int:
    write_csv(points, out if out is not None else sys.stdout)
    return 2 if any(pt.error for pt in points) else 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if args.command == "dmt":
            curve = baselines.dmt_curve(args.tx, args.rx, args.branches)
            text = "r,d\n" + "\n".join(f"{_fmt(r)},{_fmt(d)}" for r, d in curve.vertices) + "\n"
            if args.out is None:
                sys.stdout.write(text)
            else:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            return 0
        if args.command in ("dt", "mc", "outage"):
            spec = _spec_from_args(args, (args.command,))
            points = run_sweep(spec, workers=args.workers, progress=not args.quiet)
            return _emit(points, args.out)
        if args.command == "sweep":
            if args.config is not None and args.preset is not None:
                raise ConfigError("pass either --config or --preset, not both")
            if args.config is not None:
                with open(args.config, "r", encoding="utf-8") as fh:
                    spec = parse_config(fh.read())
                overrides = {}
                if args.seed != DEFAULT_SEED:
                    overrides["seed"] = args.seed
                if args.samples != DEFAULT_SAMPLES:
                    overrides["samples"] = args.samples
                if overrides:
                    spec = replace(spec, **overrides)
            elif args.preset is not None:
                overrides = dict(
                    seed=args.seed if args.seed != DEFAULT_SEED else None,
                    samples=args.samples if args.samples != DEFAULT_SAMPLES else None,
                    schemes=_parse_schemes(args.schemes) if args.schemes else None,
                    coherence_values=(
                        _parse_coherence(args.coherence, args.n, args.tx, args.rx)
                        if args.coherence != "all" else None
                    ),
                )
                spec = preset_spec(args.preset, deep=args.deep, **overrides)
            else:
                schemes = _parse_schemes(args.schemes) if args.schemes else ("dt",)
                spec = _spec_from_args(args, schemes)
            points = run_sweep(spec, workers=args.workers, progress=not args.quiet)
            return _emit(points, args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
