"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 hypothesis/budget failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .embedding import EmbeddedGraph, HypothesisNotWitnessed, SlabParameters, select_scales, verify_isomorphism
from .engine import crossing_estimate, origin_boundary_estimate
from .harness import load_config, run_pipeline
from .sequences import ProbabilitySequence
from .thresholds import BracketError, CalibrationTable, LatticeFamily, ThresholdSettings
from .windows import (
    ConfigError,
    grid_crossing_window,
    grid_radial_window,
    long_range_crossing_window,
    long_range_radial_window,
    slab_crossing_window,
    slab_radial_window,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="trunclab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pipe = sub.add_parser("pipeline", help="run the full truncation pipeline")
    pipe.add_argument("--config", required=True)
    pipe.add_argument("--out", required=True)

    est = sub.add_parser("estimate", help="one crossing or reach estimate, as a CSV row")
    est.add_argument("--family", choices=["z2", "zd", "slab"], required=True)
    est.add_argument("--p", type=float, required=True)
    est.add_argument("--L", type=int, required=True)
    est.add_argument("--N", type=int, default=1, help="truncation level for z2 long-range")
    est.add_argument("--d", type=int, default=3, help="dimension for zd/slab families")
    est.add_argument("--K", type=int, default=1, help="thickness for the slab family")
    est.add_argument("--trials", type=int, default=10_000)
    est.add_argument("--seed", type=int, default=1)
    est.add_argument("--event", choices=["crossing", "theta"], default="crossing")

    pc = sub.add_parser("pc", help="(re)compute a critical-threshold calibration row")
    pc.add_argument("--family", choices=["z2", "zd", "slab"], required=True)
    pc.add_argument("--d", type=int, default=3)
    pc.add_argument("--K", type=int, default=1)
    pc.add_argument("--L-schedule", default="8,16,32")
    pc.add_argument("--tol", type=float, default=0.015)
    pc.add_argument("--trials", type=int, default=3000)
    pc.add_argument("--seed", type=int, default=1)
    pc.add_argument("--calib", default=None, help="calibration CSV to update")

    ver = sub.add_parser("verify-embedding", help="brute-force check of the slab embedding")
    ver.add_argument("--config", required=True)
    ver.add_argument("--json", action="store_true", dest="as_json")

    sc = sub.add_parser("scales", help="print the selected scales and truncation level")
    sc.add_argument("--config", required=True)
    return parser


def _estimate_command(args) -> int:
    seq = ProbabilitySequence.constant(args.p).truncate(args.N)
    if args.event == "crossing":
        if args.family == "z2":
            window = long_range_crossing_window(seq, args.L)
        elif args.family == "zd":
            window = grid_crossing_window(args.d, args.p, args.L)
        else:
            window = slab_crossing_window(args.d, args.K, args.p, args.L)
        estimate = crossing_estimate(window, args.trials, args.seed)
    else:
        if args.family == "z2":
            window = long_range_radial_window(seq, args.L)
        elif args.family == "zd":
            window = grid_radial_window(args.d, args.p, args.L)
        else:
            window = slab_radial_window(args.d, args.K, args.p, args.L)
        estimate = origin_boundary_estimate(window, args.trials, args.seed)
    params = f"p={args.p};L={args.L};N={args.N}"
    if args.family != "z2":
        params += f";d={args.d}"
    if args.family == "slab":
        params += f";K={args.K}"
    print(
        f"{args.family},{params},{args.event},{estimate.value!r},{estimate.half_width!r},"
        f"{estimate.trials},{estimate.seed}"
    )
    return 0


def _pc_command(args) -> int:
    from .thresholds import estimate_pc

    family = LatticeFamily(args.family, args.d, args.K)
    settings = ThresholdSettings(
        l_schedule=tuple(int(x) for x in args.L_schedule.replace(",", " ").split()),
        bracket_tol=args.tol,
        trials_per_probe=args.trials,
    )
    try:
        estimate = estimate_pc(family, settings, args.seed)
    except BracketError as exc:
        print(f"bracket failure: {exc}", file=sys.stderr)
        return 3
    if args.calib:
        from .thresholds import CalibrationRow

        table = CalibrationTable(args.calib)
        table.put(CalibrationRow.from_estimate(estimate))
    row = estimate.to_dict()
    row.pop("probes")
    print(json.dumps(row, sort_keys=True))
    return 0


def _embedding_inputs(config):
    if config.embedding_dimension is None or config.embedding_thickness is None:
        raise ConfigError("this command needs an [embedding] section with dimension and thickness")
    params = SlabParameters(config.embedding_dimension, config.embedding_thickness)
    scales = select_scales(
        config.sequence, config.certificate.epsilon, params, config.scale_search_limit
    )
    return params, scales


def _verify_command(args) -> int:
    config = load_config(args.config)
    try:
        params, scales = _embedding_inputs(config)
    except HypothesisNotWitnessed as exc:
        print(f"scale selection failed: {exc}", file=sys.stderr)
        return 3
    graph = EmbeddedGraph(params, scales)
    report = verify_isomorphism(
        graph,
        config.verify_coarse,
        config.verify_vertical,
        seq=config.sequence,
        epsilon=config.certificate.epsilon,
    )
    if args.as_json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"scales: {list(scales.scales)}  truncation: {scales.top}")
        for name, ok in report.checks.items():
            print(f"  {name}: {'pass' if ok else 'FAIL'}")
        if report.counterexample:
            print(f"  counterexample: {report.counterexample}")
        print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 2


def _scales_command(args) -> int:
    config = load_config(args.config)
    try:
        _, scales = _embedding_inputs(config)
    except HypothesisNotWitnessed as exc:
        print(f"scale selection failed: {exc}", file=sys.stderr)
        return 3
    for index, value in enumerate(scales.scales, start=1):
        print(f"n_{index} = {value}")
    print(f"N = {scales.top}")
    return 0


def _pipeline_command(args) -> int:
    config = load_config(args.config)
    report = run_pipeline(config, args.out)
    status = "PASS" if report.passed else f"FAIL ({report.failure_stage})"
    print(f"pipeline: {status}")
    if report.scales:
        print(f"  scales: {report.scales}  truncation: {report.truncation}")
    if report.slab and "dimension" in report.slab:
        print(f"  slab: dimension={report.slab['dimension']} thickness={report.slab['thickness']}")
    for row in report.theta:
        print(
            f"  reach r={row['radius']}: embedded {row['embedded']['value']:.4f} "
            f"full {row['full']['value']:.4f}"
        )
    if report.error:
        print(f"  error: {report.error}")
    print(f"  report: {args.out}/report.json")
    return report.exit_code


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "pipeline":
            return _pipeline_command(args)
        if args.command == "estimate":
            return _estimate_command(args)
        if args.command == "pc":
            return _pc_command(args)
        if args.command == "verify-embedding":
            return _verify_command(args)
        if args.command == "scales":
            return _scales_command(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
