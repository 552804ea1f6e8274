"""Command line interface for the audit pipeline.

Subcommands:
  audit     run a full campaign against a fixture and write reports
  exact     exact Renyi divergence of a neighboring histogram pair
  theory    Gaussian RDP upper bounds for sigma / sensitivity / group size
  convert   RDP curve JSON -> (epsilon, delta) at a given delta
  verify    validate a fixture and print per-query summaries
  estimate  fit a vote-model fixture from teacher prediction dumps

Every flag default can be overridden with a PREDAUDIT_-prefixed environment
variable (e.g. PREDAUDIT_TRIALS=100000). Exit codes: 0 success; 1 invalid
fixture under `verify`; 2 unparseable config or flags; 3 fixture invariant
violation; 4 quadrature failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .audit import rdp_to_dp
from .campaign import CHECKPOINT_TRIALS, CampaignConfig, run_campaign
from .fixtures import (
    FixtureError,
    estimate_fixture_from_dumps,
    fixture_summary,
    fixture_to_dict,
    load_fixture,
)
from .mechanism import (
    DEFAULT_ORDERS,
    Histogram,
    NormalizationFailure,
    OrderUnderflow,
    QuadratureFailure,
    RdpCurve,
    gaussian_group_rdp_bound,
    renyi_divergence_exact,
)

EXIT_OK = 0
EXIT_INVALID_FIXTURE = 1
EXIT_CONFIG = 2
EXIT_FIXTURE = 3
EXIT_QUADRATURE = 4


class _ConfigError(Exception):
    """Flag or environment value that cannot be parsed."""


def _orders_arg(text: str) -> tuple[float, ...]:
    parts = [t for t in text.split(",") if t.strip()]
    if not parts:
        raise ValueError("empty orders list")
    return tuple(float(t) for t in parts)


def _methods_arg(text: str) -> tuple[str, ...]:
    parts = tuple(t.strip() for t in text.split(",") if t.strip())
    if not parts:
        raise ValueError("empty methods list")
    return parts


def _hist_arg(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(","))


def _env(name: str, default, parse):
    raw = os.environ.get(f"PREDAUDIT_{name}")
    if raw is None:
        return default
    try:
        return parse(raw)
    except ValueError as exc:
        raise _ConfigError(f"bad PREDAUDIT_{name}={raw!r}: {exc}") from exc


def _print_curve(curve: RdpCurve) -> None:
    print("order,value")
    for order, value in zip(curve.orders, curve.values):
        print(f"{order:g},{value:.12g}")


def _cmd_audit(args) -> int:
    config = CampaignConfig(
        fixture=args.fixture,
        out_dir=args.out,
        trials=args.trials,
        orders=args.orders,
        confidence=args.confidence,
        delta=args.delta,
        methods=args.methods,
        selection_split=args.selection_split,
        seed=args.seed,
        workers=args.workers,
        resamples=args.resamples,
        checkpoint_trials=args.checkpoint_trials,
    )
    reports = run_campaign(config)
    for method in config.methods:
        report = reports[method]
        print(f"{method}: audited epsilon {report.audit_dp.epsilon:.6f} "
              f"at delta {report.delta:g} (order {report.audit_dp.source_order:g})")
        if report.exact_dp is not None:
            print(f"{method}: exact epsilon {report.exact_dp.epsilon:.6f} "
                  f"(order {report.exact_dp.source_order:g})")
        print(f"{method}: theory epsilon {report.theory_dp.epsilon:.6f} "
              f"(order {report.theory_dp.source_order:g})")
    return EXIT_OK


def _cmd_exact(args) -> int:
    if args.fixture is not None:
        fixture = load_fixture(args.fixture)
        if fixture.variant != "prompt_pate":
            raise FixtureError(
                "exact divergence needs a deterministic histogram pair; "
                f"variant {fixture.variant!r} draws votes at random (use audit)")
        qid = args.query if args.query is not None else fixture.query_ids[0]
        model = fixture.model_for(qid)
        hist_s, hist_sp, sigma = model.hist_s, model.hist_s_prime, fixture.sigma
    else:
        if args.hist_s is None or args.hist_s_prime is None or args.sigma is None:
            raise _ConfigError(
                "exact needs --fixture or all of --hist-s, --hist-s-prime, --sigma")
        hist_s = Histogram(args.hist_s)
        hist_sp = Histogram(args.hist_s_prime)
        sigma = args.sigma
    curve = renyi_divergence_exact(hist_s, hist_sp, sigma, args.orders)
    _print_curve(curve)
    return EXIT_OK


def _cmd_theory(args) -> int:
    curve = gaussian_group_rdp_bound(
        args.sigma, args.sensitivity, args.group_size, args.orders)
    _print_curve(curve)
    return EXIT_OK


def _cmd_convert(args) -> int:
    try:
        data = json.loads(Path(args.curve).read_text())
        curve = RdpCurve(orders=tuple(float(a) for a in data["orders"]),
                         values=tuple(float(v) for v in data["values"]))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise _ConfigError(f"cannot read curve {args.curve}: {exc}") from exc
    point = rdp_to_dp(curve, args.delta)
    print(f"epsilon {point.epsilon:.12g} at delta {point.delta:g} "
          f"(from order {point.source_order:g})")
    return EXIT_OK


def _cmd_verify(args) -> int:
    try:
        fixture = load_fixture(args.fixture)
    except FixtureError as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID_FIXTURE
    for line in fixture_summary(fixture):
        print(line)
    print("ok")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    fixture = estimate_fixture_from_dumps(
        args.dump_s, args.dump_s_prime, args.variant, args.sigma,
        teachers=args.teachers, num_classes=args.num_classes)
    text = json.dumps(fixture_to_dict(fixture), indent=2, sort_keys=True)
    if args.out is not None:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predaudit",
        description="Empirical Renyi-DP audits of noisy-argmax private prediction.")
    sub = parser.add_subparsers(dest="command", required=True)

    orders_default = _env("ORDERS", DEFAULT_ORDERS, _orders_arg)
    confidence_default = _env("CONFIDENCE", 0.95, float)
    delta_default = _env("DELTA", 1e-6, float)
    seed_default = _env("SEED", 0, int)
    sigma_default = _env("SIGMA", None, float)

    audit = sub.add_parser("audit", help="run an audit campaign")
    audit.add_argument("--fixture", required=True, help="scenario fixture JSON")
    audit.add_argument("--out", default=_env("OUT", "audit_out", str),
                       help="output directory for reports and checkpoints")
    audit.add_argument("--trials", type=int, default=_env("TRIALS", 10_000_000, int),
                       help="mechanism trials per query (pilot + audit)")
    audit.add_argument("--orders", type=_orders_arg, default=orders_default,
                       help="comma-separated Renyi orders, all > 1")
    audit.add_argument("--confidence", type=float, default=confidence_default,
                       help="overall confidence level for the audit bounds")
    audit.add_argument("--delta", type=float, default=delta_default,
                       help="target delta for the (epsilon, delta) conversion")
    audit.add_argument("--seed", type=int, default=seed_default,
                       help="campaign seed; fixes every random draw")
    audit.add_argument("--workers", type=int, default=_env("WORKERS", 1, int),
                       help="parallel worker processes")
    audit.add_argument("--methods", type=_methods_arg,
                       default=_env("METHODS", ("two_cut",), _methods_arg),
                       help="comma-separated audit methods")
    audit.add_argument("--selection-split", type=float,
                       default=_env("SELECTION_SPLIT", 0.1, float),
                       help="fraction of trials reserved for output-set selection")
    audit.add_argument("--resamples", type=int,
                       default=_env("RESAMPLES", 1000, int),
                       help="bootstrap replicates for bootstrap methods")
    audit.add_argument("--checkpoint-trials", type=int,
                       default=_env("CHECKPOINT_TRIALS", CHECKPOINT_TRIALS, int),
                       help="trials per checkpoint segment")
    audit.set_defaults(handler=_cmd_audit)

    exact = sub.add_parser("exact", help="exact divergence of a histogram pair")
    exact.add_argument("--fixture", help="prompt_pate fixture holding the pair")
    exact.add_argument("--query", help="query id within the fixture (default: first)")
    exact.add_argument("--hist-s", type=_hist_arg, help="comma-separated counts")
    exact.add_argument("--hist-s-prime", type=_hist_arg, help="comma-separated counts")
    exact.add_argument("--sigma", type=float, default=sigma_default,
                       help="Gaussian noise scale")
    exact.add_argument("--orders", type=_orders_arg, default=orders_default)
    exact.set_defaults(handler=_cmd_exact)

    theory = sub.add_parser("theory", help="Gaussian RDP upper bound curve")
    theory.add_argument("--sigma", type=float, required=sigma_default is None,
                        default=sigma_default, help="Gaussian noise scale")
    theory.add_argument("--sensitivity", type=float,
                        default=_env("SENSITIVITY", 2.0 ** 0.5, float),
                        help="L2 sensitivity of the histogram (default sqrt(2))")
    theory.add_argument("--group-size", type=int,
                        default=_env("GROUP_SIZE", 1, int),
                        help="number of differing records")
    theory.add_argument("--orders", type=_orders_arg, default=orders_default)
    theory.set_defaults(handler=_cmd_theory)

    convert = sub.add_parser("convert", help="RDP curve -> epsilon at delta")
    convert.add_argument("curve", help='JSON file with {"orders": [...], "values": [...]}')
    convert.add_argument("--delta", type=float, default=delta_default)
    convert.set_defaults(handler=_cmd_convert)

    verify = sub.add_parser("verify", help="validate a fixture")
    verify.add_argument("fixture", help="scenario fixture JSON")
    verify.set_defaults(handler=_cmd_verify)

    estimate = sub.add_parser("estimate", help="fit a fixture from prediction dumps")
    estimate.add_argument("--dump-s", required=True, help="CSV dump for dataset S")
    estimate.add_argument("--dump-s-prime", required=True,
                          help="CSV dump for neighboring dataset S'")
    estimate.add_argument("--variant", required=True, choices=("pate", "capc"),
                          help="vote model family to fit")
    estimate.add_argument("--sigma", type=float,
                          default=sigma_default if sigma_default is not None else 1.0,
                          help="Gaussian noise scale recorded in the fixture")
    estimate.add_argument("--teachers", type=int, default=None,
                          help="teacher count (default: inferred from the dumps)")
    estimate.add_argument("--num-classes", type=int, default=None,
                          help="class count (default: inferred from the dumps)")
    estimate.add_argument("--out", default=None, help="write fixture JSON here")
    estimate.set_defaults(handler=_cmd_estimate)

    return parser


def main(argv=None) -> int:
    try:
        parser = _build_parser()
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FixtureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIXTURE
    except (QuadratureFailure, NormalizationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except (ValueError, OrderUnderflow) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
