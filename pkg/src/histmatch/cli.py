"""Command-line interface.

Subcommands: ``ingest`` (event CSV -> two histogram CSVs), ``match`` (two
histogram CSVs -> matching CSV + JSON summary), ``anonymize`` (histogram CSV
-> released CSV + partition JSON), ``synth`` (generate synthetic histogram
sets with ground truth), ``experiment`` (run a JSON-configured protocol).

Exit code 0 on success; on failure a machine-readable JSON error object is
written to stderr and the exit code is nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from . import io as hio
from .anonymize import information_loss, microaggregate
from .core import (
    HistogramSet,
    aggregate_locations,
    filter_active_users,
    histograms_by_user,
    quantize_geo,
    split_by_period,
)
from .errors import HistmatchError
from .harness import ExperimentConfig, run_experiment
from .matcher import (
    build_instance,
    match_bruteforce,
    match_cardinality,
    match_greedy,
    match_min_weight,
)
from .metrics import MetricKind
from .synth import GENERATOR_NAME, OverlapSpec, PopulationSpec, generate_pair, sample_population


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message)
        raise SystemExit(2)


def _cmd_ingest(args) -> int:
    log = hio.read_event_log(args.events)
    if args.geo_grid is not None:
        origin = _parse_latlon(args.geo_origin)
        records = []
        for rec in log.records:
            lat, lon = _parse_latlon(rec.location)
            key = quantize_geo(lat, lon, args.geo_grid, origin)
            records.append(rec.__class__(user=rec.user, timestamp=rec.timestamp, location=key))
        log = log.__class__(records=tuple(records))
    first, second = split_by_period(log, args.boundary)
    active = filter_active_users(first, second)
    left = histograms_by_user(first, labeled=False, users=active)
    right = histograms_by_user(second, labeled=True, users=active)
    if args.aggregate_table:
        table = hio.read_aggregation_table(args.aggregate_table)
        left = HistogramSet(
            tuple((o, aggregate_locations(h, table)) for o, h in left.entries), left.labeled
        )
        right = HistogramSet(
            tuple((o, aggregate_locations(h, table)) for o, h in right.entries), right.labeled
        )
    hio.write_histogram_set(left, args.out_left)
    hio.write_histogram_set(right, args.out_right)
    print(json.dumps({
        "records": len(log),
        "active_users": len(active),
        "left": args.out_left,
        "right": args.out_right,
    }))
    return 0


def _parse_latlon(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise HistmatchError(f"expected 'lat,lon', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise HistmatchError(f"expected numeric 'lat,lon', got {text!r}") from None


def _cmd_match(args) -> int:
    left = hio.read_histogram_set(args.left, labeled=False)
    right = hio.read_histogram_set(args.right, labeled=True)
    metric = MetricKind.from_token(args.metric)
    t0 = time.perf_counter()
    instance = build_instance(left, right, metric, prune=args.prune)
    t1 = time.perf_counter()

    spec = args.algorithm.lower()
    if spec == "a1":
        result = match_min_weight(instance)
    elif spec.startswith("a2:"):
        result = match_cardinality(instance, int(spec.split(":", 1)[1]))
    elif spec == "greedy":
        result = match_greedy(instance)
    elif spec == "brute":
        result = match_bruteforce(instance)
    elif spec.startswith("brute:"):
        result = match_bruteforce(instance, int(spec.split(":", 1)[1]))
    else:
        _emit_error("usage", f"unknown algorithm {args.algorithm!r}; use a1, a2:<r>, greedy or brute")
        return 2
    t2 = time.perf_counter()

    runtime_ms = {"weights": 1000.0 * (t1 - t0), "solve": 1000.0 * (t2 - t1)}
    hio.write_match_result(result, instance, args.out_pairs)
    summary = hio.match_summary(result, runtime_ms)
    if args.out_summary:
        hio.write_match_summary(result, runtime_ms, args.out_summary)
    print(json.dumps(summary))
    return 0


def _cmd_anonymize(args) -> int:
    histograms = hio.read_histogram_set(args.input, labeled=False)
    partition, released = microaggregate(histograms, args.k)
    loss = information_loss(partition, histograms)
    hio.write_histogram_set(released, args.out_released)
    if args.out_partition:
        hio.write_partition(partition, loss, args.out_partition)
    print(json.dumps({"k": partition.k_achieved, "g": partition.g, "L": loss}))
    return 0


def _cmd_synth(args) -> int:
    n_left = args.n_left or args.users
    n_right = args.n_right or args.users
    r = args.overlap if args.overlap is not None else min(n_left, n_right)
    overlap = OverlapSpec(n_left=n_left, n_right=n_right, r=r)
    population = max(args.population or 0, overlap.population_needed)
    spec = PopulationSpec(
        n_users=population,
        alphabet_size=args.alphabet,
        concentration=args.alpha,
        seed=args.seed,
    )
    distributions = sample_population(spec)
    left, right, truth = generate_pair(distributions, args.t1, args.t2, overlap, seed=args.seed)
    hio.write_histogram_set(left, args.out_left)
    hio.write_histogram_set(right, args.out_right)
    if args.out_truth:
        hio.write_truth(truth, args.out_truth)
    meta = {
        "population": spec.n_users,
        "alphabet_size": spec.alphabet_size,
        "concentration": spec.concentration,
        "seed": args.seed,
        "t1": args.t1,
        "t2": args.t2,
        "n_left": n_left,
        "n_right": n_right,
        "overlap": r,
        "generator": GENERATOR_NAME,
    }
    if args.out_meta:
        with open(args.out_meta, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
    print(json.dumps(meta))
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    report = run_experiment(config, out_dir=args.out_dir)
    print(json.dumps({"rows": len(report.rows), "out_dir": args.out_dir}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="histmatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="event CSV -> per-period histogram CSVs")
    p.add_argument("--events", required=True)
    p.add_argument("--boundary", type=int, required=True, help="epoch-second period split")
    p.add_argument("--out-left", required=True)
    p.add_argument("--out-right", required=True)
    p.add_argument("--geo-grid", type=float, default=None, metavar="METERS",
                   help="treat the location column as 'lat,lon' and quantize to a grid")
    p.add_argument("--geo-origin", default="0,0", metavar="LAT,LON")
    p.add_argument("--aggregate-table", default=None)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("match", help="match two histogram CSVs")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--metric", default="proposed", choices=[k.value for k in MetricKind])
    p.add_argument("--algorithm", default="a1", help="a1 | a2:<r> | greedy | brute[:r]")
    p.add_argument("--prune", action="store_true")
    p.add_argument("--out-pairs", required=True)
    p.add_argument("--out-summary", default=None)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("anonymize", help="micro-aggregate a histogram CSV to k-anonymity")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out-released", required=True)
    p.add_argument("--out-partition", default=None)
    p.set_defaults(func=_cmd_anonymize)

    p = sub.add_parser("synth", help="generate synthetic histogram sets with ground truth")
    p.add_argument("--users", type=int, default=100)
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--alphabet", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--t1", type=int, default=500)
    p.add_argument("--t2", type=int, default=500)
    p.add_argument("--n-left", type=int, default=None)
    p.add_argument("--n-right", type=int, default=None)
    p.add_argument("--overlap", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-left", required=True)
    p.add_argument("--out-right", required=True)
    p.add_argument("--out-truth", default=None)
    p.add_argument("--out-meta", default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("experiment", help="run a JSON-configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except HistmatchError as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    except FileNotFoundError as exc:
        _emit_error("FileNotFound", str(exc))
        return 1
    except ValueError as exc:
        _emit_error("ValueError", str(exc))
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
