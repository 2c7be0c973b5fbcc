#!/usr/bin/env python3
"""
cycrir - robust instability radius bounds for cyclic networks

Computes how small a stable multiplicative perturbation of the agents can be
while still stabilizing a ring of n identical, nominally unstable agents.
Results go to standard output (or --out) as JSON or CSV; errors go to
standard error as one JSON object and set the exit code.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from complexpoly import RationalFn
from config_reader import AnalysisSettings, load_settings
from cyclicnet import CyclicNetwork, DiagPerturbation
from errors import CycrirError, PreconditionError, ValidationError, error_payload
from nyquistdata import (
    FrequencyGrid,
    crossing_frequency,
    eigen_markers,
    inverse_nyquist_curve,
    marker_band_gap,
    monotone_gain_check,
    value_set_band,
)
from report_writer import (
    ReportWriter,
    homogenize_to_dict,
    report_to_dict,
    verdict_to_dict,
    write_csv_file,
)
from rirbounds import homogenize, rho_plus, rir_report, verify_perturbation
from sweep_processor import SweepProcessor

logger = logging.getLogger(__name__)

DEFAULT_NYQUIST_DIR = "nyquist_output"


class JsonErrorParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors become ValidationError instead of exiting."""

    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def parse_coefficients(text: str, what: str = "coefficients") -> List[float]:
    """'1,4,3' -> [1.0, 4.0, 3.0] (descending powers, so s^2 + 4s + 3)."""
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(p == "" for p in parts):
        raise ValidationError(f"{what} must be a comma-separated list of reals, got {text!r}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ValidationError(f"{what} must be a comma-separated list of reals, got {text!r}")
    if not all(np.isfinite(values)):
        raise ValidationError(f"{what} must be finite, got {text!r}")
    return values


def parse_complex(text: str) -> complex:
    """'a+bi' with optional sign, e.g. '0.1+0.2i', '-0.5+0i', '0.3', '0.2i'."""
    cleaned = text.strip().replace(" ", "")
    if cleaned.endswith(("i", "j")):
        cleaned = cleaned[:-1] + "j"
        if cleaned in ("j", "+j", "-j"):
            cleaned = cleaned.replace("j", "1j")
    try:
        return complex(cleaned)
    except ValueError:
        raise ValidationError(f"cannot parse complex number {text!r}; expected a+bi")


def parse_rational(text: str) -> RationalFn:
    """'NUM:DEN' coefficient lists, DEN defaulting to 1 ('-0.5' is the constant -0.5)."""
    num, _, den = text.partition(":")
    return RationalFn(parse_coefficients(num, "perturbation numerator"),
                      parse_coefficients(den or "1", "perturbation denominator"))


def _common_parser() -> argparse.ArgumentParser:
    common = JsonErrorParser(add_help=False)
    common.add_argument('--tol-axis', type=float, help='Imaginary-axis tolerance on root real parts (default 1e-9)')
    common.add_argument('--margin-req', type=float, help='Required stability margin of verified roots (default 1e-6)')
    common.add_argument('--rho-bisect-tol', type=float, help='Bisection tolerance on rho (default 1e-4)')
    common.add_argument('--workers', type=int, help='Parallel worker processes (default: $CYCRIR_WORKERS or 1)')
    common.add_argument('--format', choices=['json', 'csv'], help='Output format')
    common.add_argument('--out', type=str, help='Output file (directory for nyquist); default standard output')
    common.add_argument('--config', type=str, help='Analysis settings file (YAML, JSON, INI or TOML)')
    common.add_argument('--verbose', '-v', action='count', default=0, help='-v for progress, -vv for debug output')
    return common


def _add_network_args(parser: argparse.ArgumentParser, general: Optional[bool] = None) -> None:
    """Agent h as --num/--den (general), --K/--tau (first order) or either."""
    if general is not False:
        parser.add_argument('--num', type=str, required=bool(general),
                            help='Numerator of h, comma-separated descending powers')
        parser.add_argument('--den', type=str, required=bool(general),
                            help='Denominator of h, e.g. --den 1,4,3 for s^2+4s+3')
    if general is not True:
        parser.add_argument('--K', type=float, required=general is False, help='First-order gain K in K/(tau s+1)')
        parser.add_argument('--tau', type=float, required=general is False, help='First-order time constant tau')
    parser.add_argument('--mu', type=float, required=True, help='Interaction strength mu > 0')


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = JsonErrorParser(
        prog='cycrir',
        description="Robust instability radius bounds for cyclic networks of identical agents",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  cycrir rir first-order --K 1 --tau 1 --mu 3 --n 9
  cycrir rir general --num 3 --den 1,4,3 --mu 5 --n 9
  cycrir sweep --num 3 --den 1,4,3 --mu 5 --n-min 3 --n-max 21 --out fig2.csv
  cycrir nyquist --K 1 --tau 1 --mu 3 --n 9 --out nyquist_output
  cycrir verify --K 1 --tau 1 --mu 2 --n 3 --delta=-0.5
  cycrir homogenize --deltas 0.1+0i,0+0.1i --r 0.1
        """
    )
    commands = parser.add_subparsers(dest='command', required=True)

    rir = commands.add_parser('rir', help='Full RIR report for one network')
    models = rir.add_subparsers(dest='model', required=True)
    first = models.add_parser('first-order', parents=[common], help='Agents K/(tau s+1)')
    _add_network_args(first, general=False)
    first.add_argument('--n', type=int, required=True, help='Number of agents (odd, >= 3)')
    general = models.add_parser('general', parents=[common], help='Agents num(s)/den(s)')
    _add_network_args(general, general=True)
    general.add_argument('--n', type=int, required=True, help='Number of agents (odd, >= 3)')

    sweep = commands.add_parser('sweep', parents=[common], help='RIR bounds for every odd n in a range')
    _add_network_args(sweep)
    sweep.add_argument('--n-min', type=int, default=3, help='Smallest n (default 3)')
    sweep.add_argument('--n-max', type=int, default=21, help='Largest n (default 21)')

    nyquist = commands.add_parser('nyquist', parents=[common], help='Inverse Nyquist curve, value-set band, markers')
    _add_network_args(nyquist)
    nyquist.add_argument('--n', type=int, required=True, help='Number of agents (odd, >= 3)')
    nyquist.add_argument('--rho', type=float, help='Band radius in (0, 1) (default: rho_plus of the network)')
    nyquist.add_argument('--alphas', type=int, default=256, help='Boundary points per frequency (default 256)')
    nyquist.add_argument('--grid-points', type=int, default=2001, help='Log-spaced frequencies (default 2001)')
    nyquist.add_argument('--omega-min', type=float, default=1e-3, help='Lowest nonzero frequency (default 1e-3)')
    nyquist.add_argument('--omega-max', type=float, default=1e3, help='Highest frequency (default 1e3)')

    verify = commands.add_parser('verify', parents=[common], help='Root test of a concrete perturbation')
    _add_network_args(verify)
    verify.add_argument('--n', type=int, required=True, help='Number of agents (odd, >= 3)')
    verify.add_argument('--delta', action='append', default=[],
                        help='Perturbation NUM:DEN per agent, or one for all (use --delta=-0.5 for negatives)')

    homog = commands.add_parser('homogenize', parents=[common], help='Homogeneous equivalent of complex gains')
    homog.add_argument('--deltas', type=str, required=True, help='Comma-separated complex numbers a+bi')
    homog.add_argument('--r', type=float, required=True, help='Disk radius r in (0, 1)')
    return parser


def _configure_logging(verbose: int) -> None:
    if verbose <= 0:
        return
    level = logging.DEBUG if verbose > 1 else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')


def _settings(args) -> AnalysisSettings:
    settings = load_settings(args.config)
    return settings.with_overrides(
        tol_axis=args.tol_axis,
        margin_req=args.margin_req,
        rho_bisect_tol=args.rho_bisect_tol,
        workers=args.workers,
    )


def _agent(args) -> RationalFn:
    if getattr(args, 'num', None) is not None or getattr(args, 'den', None) is not None:
        if args.num is None or args.den is None:
            raise ValidationError("--num and --den must be given together")
        return RationalFn(parse_coefficients(args.num, "--num"), parse_coefficients(args.den, "--den"))
    if getattr(args, 'K', None) is not None and getattr(args, 'tau', None) is not None:
        if args.K <= 0 or args.tau <= 0:
            raise ValidationError("first-order lag needs K > 0 and tau > 0")
        return RationalFn([args.K], [args.tau, 1.0])
    raise ValidationError("agent dynamics missing: give --num/--den or --K/--tau")


def _network(args) -> CyclicNetwork:
    return CyclicNetwork(n=args.n, mu=args.mu, h=_agent(args))


def cmd_rir(args, settings: AnalysisSettings) -> int:
    net = _network(args)
    started = time.perf_counter()
    report = rir_report(net, settings)
    runtime_ms = (time.perf_counter() - started) * 1000.0
    payload = report_to_dict(net, report, settings, runtime_ms)

    writer = ReportWriter(args.out)
    writer.validate(payload, "rir")
    if (args.format or 'json') == 'csv':
        writer.write_flat_csv(payload)
    else:
        writer.write_json(payload)

    if report.rho_plus is None:
        # the report is still written; the missing radii are an unmet precondition
        raise PreconditionError(
            f"network not strictly unstable (nominal {report.nominal.classification.value}); "
            "rho_plus and the upper bounds are null"
        )
    return 0


def cmd_sweep(args, settings: AnalysisSettings) -> int:
    h = _agent(args)
    processor = SweepProcessor(settings)
    n_values = processor.odd_sizes(args.n_min, args.n_max)
    rows = processor.process_sweep(h, args.mu, n_values)

    writer = ReportWriter(args.out)
    if (args.format or 'csv') == 'json':
        writer.write_json([row.as_dict() for row in rows])
    else:
        columns = processor.columns(h)
        writer.write_csv(columns, [row.as_dict() for row in rows])
    return 0


def cmd_nyquist(args, settings: AnalysisSettings) -> int:
    net = _network(args)
    rho = args.rho
    rho_source = "flag"
    if rho is None:
        rho = rho_plus(net, settings.tol_axis)[0]
        rho_source = "rho_plus"
    grid = FrequencyGrid.log_spaced(args.omega_min, args.omega_max, args.grid_points)
    curve = inverse_nyquist_curve(net.h, grid)
    band = value_set_band(net.h, rho, grid, args.alphas)
    markers = eigen_markers(net.n, net.mu)

    out_dir = Path(args.out or DEFAULT_NYQUIST_DIR)
    write_csv_file(out_dir / "curve.csv", ["omega", "re", "im"],
                   ((omega, value.real, value.imag) for omega, value in curve))
    write_csv_file(out_dir / "band.csv", ["omega", "alpha", "re", "im"],
                   ((omega, alpha, p.real, p.imag) for omega, alpha, p in band.rows()))
    write_csv_file(out_dir / "markers.csv", ["k", "re", "im"],
                   ((k, float(lam.real), float(lam.imag)) for k, lam in enumerate(markers, 1)))

    summary = {
        "n": net.n,
        "mu": net.mu,
        "rho": float(rho),
        "rho_source": rho_source,
        "grid_points": len(grid),
        "alphas": args.alphas,
        "monotone_gain": monotone_gain_check(curve),
        "crossing_frequency_unperturbed": crossing_frequency(net.h, net.mu),
        "marker_band_gap_k1": marker_band_gap(net.h, rho, complex(markers[0]), settings.tol_axis),
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as file:
        json.dump(summary, file, indent=2, allow_nan=False)
        file.write("\n")
    logger.info("nyquist data written to %s", out_dir)
    return 0


def cmd_verify(args, settings: AnalysisSettings) -> int:
    net = _network(args)
    deltas = [parse_rational(text) for text in args.delta] or [RationalFn.constant(0.0)]
    if len(deltas) == 1:
        perturbation = DiagPerturbation.homogeneous(deltas[0], net.n)
    elif len(deltas) == net.n:
        perturbation = DiagPerturbation(tuple(deltas))
    else:
        raise ValidationError(f"give one --delta or exactly n = {net.n}, got {len(deltas)}")
    verdict = verify_perturbation(net, perturbation, settings.margin_req, tol_axis=settings.tol_axis)
    payload = verdict_to_dict(verdict)

    writer = ReportWriter(args.out)
    if (args.format or 'json') == 'csv':
        writer.validate(payload, "verify")
        writer.write_flat_csv(payload)
    else:
        writer.write_json(payload, kind="verify")
    return 0


def cmd_homogenize(args, settings: AnalysisSettings) -> int:
    values = [parse_complex(part) for part in args.deltas.split(",")]
    delta = homogenize(values, args.r)
    product = complex(np.prod([1.0 + v for v in values]))
    residual = abs(product - (1.0 + delta) ** len(values)) / max(1.0, abs(product))
    payload = homogenize_to_dict(delta, residual)

    writer = ReportWriter(args.out)
    if (args.format or 'json') == 'csv':
        writer.validate(payload, "homogenize")
        writer.write_flat_csv(payload)
    else:
        writer.write_json(payload, kind="homogenize")
    return 0


COMMANDS = {
    'rir': cmd_rir,
    'sweep': cmd_sweep,
    'nyquist': cmd_nyquist,
    'verify': cmd_verify,
    'homogenize': cmd_homogenize,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main application entry point; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args.verbose)
        settings = _settings(args)
        logger.debug("settings: %s", settings.as_dict())
        return COMMANDS[args.command](args, settings)
    except CycrirError as exc:
        payload = error_payload(exc)
    except Exception as exc:
        logger.debug("unexpected failure", exc_info=True)
        payload = error_payload(exc)
    print(json.dumps(payload), file=sys.stderr)
    return int(payload["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
