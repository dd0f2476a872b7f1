"""Command-line interface: simulate / estimate / kl / validate.

Exit codes shared by all subcommands::

    0  success
    2  usage error, invalid parameters, or a malformed/incompatible file
    3  the Gibbs chain diverged (non-finite values)
    4  degenerate input (constant field / vanishing estimator denominator)
    5  a covariance failed its positive-definiteness factorization
    6  validation finished but missed its tolerance

Reports go to stdout as plain ``key=value`` lines with 17 significant
digits, so identical invocations produce byte-identical output.  The version
banner is written to stderr only, keeping stdout clean for consumption.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import (
    DegenerateField,
    DegenerateNeighborhood,
    DivergedSimulation,
    GmrfError,
    InsufficientSamples,
    InvalidParams,
    SingularCovariance,
)
from .lattice import FIELD_MAGIC, MultiLatticeField, read_field
from .lattice import write_field as _write_field
from .moments import (
    MOMENTS_MAGIC,
    MultiPatchMoments,
    PatchMoments,
    multi_patch_moments,
    patch_moments,
    read_moments,
    write_moments,
)
from .estimation import (
    estimate_beta_multivariate,
    estimate_beta_univariate,
    estimate_params,
    format_estimation_report,
)
from .divergence import (
    MultiKLInputs,
    UniKLInputs,
    format_kl_report,
    kl_multivariate,
    kl_univariate,
)
from .oracle import format_oracle_report, mc_kl_univariate
from .sampler import ModelParams, MultiModelParams, SimConfig, simulate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_DEGENERATE = 4
EXIT_SINGULAR = 5
EXIT_TOLERANCE = 6


def _parse_reals(text: str, what: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise InvalidParams(f"could not parse {what}: {text!r}") from None


def _parse_matrix(text: str, what: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r != ""]
    parsed = [_parse_reals(r, what) for r in rows]
    widths = {len(r) for r in parsed}
    if len(widths) != 1:
        raise InvalidParams(f"{what} rows have unequal lengths: {text!r}")
    return np.array(parsed)


def _parse_params_string(text: str) -> ModelParams:
    """Parse ``mu=0,sigma2=1,beta=0.05`` into scalar model parameters."""
    fields = {}
    for item in text.split(","):
        if "=" not in item:
            raise InvalidParams(f"expected key=value items, got {item!r}")
        key, _, val = item.partition("=")
        fields[key.strip()] = val.strip()
    if set(fields) != {"mu", "sigma2", "beta"}:
        raise InvalidParams(
            f"params string must set exactly mu, sigma2, beta; got {sorted(fields)}"
        )
    try:
        return ModelParams(mu=float(fields["mu"]), sigma2=float(fields["sigma2"]),
                           beta=float(fields["beta"]))
    except ValueError:
        raise InvalidParams(f"could not parse params string {text!r}") from None


def _emit(text: str, output: Optional[str]) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="ascii") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args: argparse.Namespace) -> int:
    mu = _parse_reals(args.mu, "--mu")
    if args.sigma is not None:
        sigma = _parse_matrix(args.sigma, "--sigma")
        if sigma.shape != (len(mu), len(mu)):
            raise InvalidParams(
                f"--sigma must be {len(mu)}x{len(mu)} to match --mu, "
                f"got {sigma.shape}"
            )
        params = MultiModelParams(mu=np.array(mu), sigma=sigma, beta=args.beta)
    else:
        if len(mu) != 1:
            raise InvalidParams("vector --mu requires --sigma (a d x d matrix)")
        params = ModelParams(mu=mu[0], sigma2=args.sigma2, beta=args.beta)
    config = SimConfig(height=args.height, width=args.width, sweeps=args.sweeps,
                       burn_in=args.burn_in, seed=args.seed)
    field = simulate(params, config, allow_unstable=args.allow_unstable)
    _write_field(field, args.output)
    sys.stdout.write(f"seed={config.seed}\n")
    sys.stdout.write(f"burn_in={config.burn_in}\n")
    sys.stdout.write(f"sweeps={config.sweeps}\n")
    sys.stdout.write(f"total_sweeps={config.burn_in + config.sweeps}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def _cmd_estimate(args: argparse.Namespace) -> int:
    field = read_field(args.field)
    dim = field.dim if isinstance(field, MultiLatticeField) else 1
    if args.dim is not None and args.dim != dim:
        raise InvalidParams(f"field has dim {dim}, --dim expected {args.dim}")
    report = estimate_params(field)
    if args.moments_out is not None:
        if isinstance(field, MultiLatticeField):
            write_moments(multi_patch_moments(field), args.moments_out)
        else:
            write_moments(patch_moments(field), args.moments_out)
    _emit(format_estimation_report(report), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# kl
# ---------------------------------------------------------------------------

def _sniff_magic(path) -> str:
    try:
        with open(path, "r", encoding="ascii") as fh:
            first = fh.readline().split()
    except OSError as exc:
        raise InvalidParams(f"cannot read {path}: {exc}") from None
    return first[0] if first else ""


def _load_kl_side(path):
    """Load one kl input; returns (moments, default_params, n_sites or None)."""
    magic = _sniff_magic(path)
    if magic == MOMENTS_MAGIC:
        moments = read_moments(path)
        n_sites = None
    elif magic == FIELD_MAGIC:
        field = read_field(path)
        if isinstance(field, MultiLatticeField):
            moments = multi_patch_moments(field)
        else:
            moments = patch_moments(field)
        n_sites = field.n_sites
    else:
        raise InvalidParams(
            f"{path}: expected a {FIELD_MAGIC} or {MOMENTS_MAGIC} file, "
            f"got magic {magic!r}"
        )
    if isinstance(moments, MultiPatchMoments):
        beta = estimate_beta_multivariate(moments)
        params = MultiModelParams(mu=moments.mean, sigma=moments.sigma, beta=beta)
    else:
        beta = estimate_beta_univariate(moments)
        params = ModelParams(mu=moments.mean, sigma2=moments.var, beta=beta)
    return moments, params, n_sites


def _cmd_kl(args: argparse.Namespace) -> int:
    moments_p, params_p, n_p = _load_kl_side(args.input_p)
    moments_q, params_q, n_q = _load_kl_side(args.input_q)
    dim_p = moments_p.dim
    dim_q = moments_q.dim
    if dim_p != dim_q:
        raise InvalidParams(f"inputs have different dims: {dim_p} vs {dim_q}")
    if args.params_p is not None:
        if dim_p != 1:
            raise InvalidParams("--params-p overrides support scalar inputs only")
        params_p = _parse_params_string(args.params_p)
    if args.params_q is not None:
        if dim_q != 1:
            raise InvalidParams("--params-q overrides support scalar inputs only")
        params_q = _parse_params_string(args.params_q)

    if dim_p == 1:
        inputs = UniKLInputs(params_p=params_p, params_q=params_q,
                             moments_p=moments_p, moments_q=moments_q)
        report = kl_univariate(inputs)
    else:
        inputs = MultiKLInputs(params_p=params_p, params_q=params_q,
                               moments_p=moments_p, moments_q=moments_q)
        report = kl_multivariate(inputs, ridge=args.ridge)
    n_sites = n_p if (n_p is not None and n_p == n_q) else None
    _emit(format_kl_report(report, n_sites=n_sites), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _cmd_validate(args: argparse.Namespace) -> int:
    params_p = ModelParams(mu=args.mu_p, sigma2=args.sigma2_p, beta=args.beta_p)
    params_q = ModelParams(mu=args.mu_q, sigma2=args.sigma2_q, beta=args.beta_q)
    sweeps = args.snapshots * args.stride
    config = SimConfig(height=args.height, width=args.width, sweeps=sweeps,
                       burn_in=args.burn_in, seed=args.seed)
    _, snapshots = simulate(params_p, config, snapshot_stride=args.stride)
    report = mc_kl_univariate(snapshots, params_p, params_q)
    ok = report.relative_error <= args.tolerance
    text = format_oracle_report(report)
    text += f"tolerance={format(float(args.tolerance), '.17g')}\n"
    text += f"within_tolerance={1 if ok else 0}\n"
    _emit(text, args.output)
    return EXIT_OK if ok else EXIT_TOLERANCE


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmrfkl",
        description="Gibbs simulation, pseudo-likelihood fitting, and "
                    "closed-form KL divergences for Gauss-Markov lattice fields.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Gibbs chain, write the field")
    sim.add_argument("--height", type=int, required=True)
    sim.add_argument("--width", type=int, required=True)
    sim.add_argument("--mu", default="0",
                     help="site mean; comma-separated for vector fields")
    sim.add_argument("--sigma2", type=float, default=1.0,
                     help="conditional variance (scalar fields)")
    sim.add_argument("--sigma", default=None,
                     help="conditional covariance rows 'a,b;c,d' (vector fields)")
    sim.add_argument("--beta", type=float, required=True,
                     help="interaction coefficient (|beta| < 1/8 unless waived)")
    sim.add_argument("--sweeps", type=int, default=100)
    sim.add_argument("--burn-in", type=int, default=0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--allow-unstable", action="store_true",
                     help="waive the |beta| < 1/8 stability bound")
    sim.add_argument("-o", "--output", required=True, help="output field file")
    sim.set_defaults(func=_cmd_simulate)

    est = sub.add_parser("estimate", help="fit (mu, sigma, beta) to a field file")
    est.add_argument("field", help="input field file")
    est.add_argument("--dim", type=int, default=None,
                     help="expected dimensionality (errors if the file differs)")
    est.add_argument("-o", "--output", default=None,
                     help="report file (default: stdout)")
    est.add_argument("--moments-out", default=None,
                     help="also write pooled window moments to this file")
    est.set_defaults(func=_cmd_estimate)

    kl = sub.add_parser("kl", help="closed-form divergences between two inputs")
    kl.add_argument("input_p", help="field or moments file for model p")
    kl.add_argument("input_q", help="field or moments file for model q")
    kl.add_argument("--params-p", default=None,
                    help="override p params, e.g. 'mu=0,sigma2=1,beta=0.05'")
    kl.add_argument("--params-q", default=None,
                    help="override q params, same syntax")
    kl.add_argument("--ridge", type=float, default=0.0,
                    help="opt-in diagonal loading before factorization")
    kl.add_argument("-o", "--output", default=None,
                    help="report file (default: stdout)")
    kl.set_defaults(func=_cmd_kl)

    val = sub.add_parser(
        "validate",
        help="simulate, then compare closed-form vs Monte Carlo divergence",
    )
    val.add_argument("--height", type=int, default=128)
    val.add_argument("--width", type=int, default=128)
    val.add_argument("--burn-in", type=int, default=200)
    val.add_argument("--snapshots", type=int, default=200)
    val.add_argument("--stride", type=int, default=5,
                     help="sweeps between retained snapshots")
    val.add_argument("--seed", type=int, default=7)
    val.add_argument("--mu-p", type=float, default=0.0)
    val.add_argument("--sigma2-p", type=float, default=1.0)
    val.add_argument("--beta-p", type=float, default=0.05)
    val.add_argument("--mu-q", type=float, default=0.0)
    val.add_argument("--sigma2-q", type=float, default=1.0)
    val.add_argument("--beta-q", type=float, default=0.10)
    val.add_argument("--tolerance", type=float, default=0.02,
                     help="maximum relative error between MC and closed form")
    val.add_argument("-o", "--output", default=None,
                     help="report file (default: stdout)")
    val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    print(f"gmrfkl {__version__}", file=sys.stderr)
    try:
        return args.func(args)
    except (InvalidParams, InsufficientSamples) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergedSimulation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DegenerateField, DegenerateNeighborhood) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except SingularCovariance as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GmrfError as exc:  # any future taxonomy member defaults to usage
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
