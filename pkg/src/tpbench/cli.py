"""Command-line pipeline: synth, extract, perturb, attack, sweep, selftest.

Exit codes: 0 success, 1 usage error, 2 data error. The stages share the
feature-CSV interchange format, so `sweep` can be reproduced by chaining
`synth` / `extract` / `perturb` / `attack` with the seeds printed in the
sweep report.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from tpbench import attackers
from tpbench.attackers import SplitSpec
from tpbench.features import (
    EmptySeriesError,
    WindowSpec,
    extract_series,
    load_features_csv,
    save_features_csv,
    stack_series,
)
from tpbench.harness import (
    ConfigError,
    TransformSpec,
    emit_report,
    load_config,
    run_experiment,
)
from tpbench.pcap import PcapFormatError, load_pcap
from tpbench.seeding import derive_seed
from tpbench.selftest import run_selftest
from tpbench.traffic import (
    Scenario,
    builtin_profiles,
    generate_dataset,
    load_dataset,
    save_dataset,
)

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage problems; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="tpbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate and save a synthetic labeled dataset")
    p.add_argument("--scenario", default="mic_onoff",
                   choices=[s.value for s in Scenario if s is not Scenario.CUSTOM])
    p.add_argument("--traces-per-class", type=int, default=3)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory for .trace files")

    p = sub.add_parser("extract", help="trace dir or pcap file -> feature CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pcap", help="single classic pcap file")
    src.add_argument("--traces", help="directory of .trace files (from synth)")
    p.add_argument("--label", help="class label for --pcap input")
    win = p.add_mutually_exclusive_group(required=True)
    win.add_argument("--burst", type=int, help="burst window size in packets")
    win.add_argument("--timespan", type=float, help="time window in seconds")
    p.add_argument("--out", required=True)

    p = sub.add_parser("perturb", help="apply a defense transform to a feature CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mode", required=True, choices=["smooth", "awgn", "realistic"])
    p.add_argument("--window", type=int, default=51)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clamp-counts", action="store_true",
                   help="floor count features at 0 after noise injection")
    p.add_argument("--out", required=True)

    p = sub.add_parser("attack", help="train one classifier on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--classifier", required=True, choices=list(attackers.CLASSIFIER_KINDS))
    p.add_argument("--params", default="{}", help="hyperparameters as a JSON object")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0,
                   help="cell seed; split/training seeds are derived from it")
    p.add_argument("--save-model", help="optional path for the trained model JSON")

    p = sub.add_parser("sweep", help="run the full experiment grid from a config")
    p.add_argument("--config", required=True)

    sub.add_parser("selftest", help="run the built-in invariant battery")
    return parser


def _cmd_synth(args) -> int:
    scenario = Scenario(args.scenario)
    profiles = builtin_profiles(scenario)
    traces = generate_dataset(
        profiles, args.traces_per_class, args.duration, args.seed, scenario
    )
    paths = save_dataset(traces, args.out)
    manifest = {
        "scenario": scenario.value,
        "seed": args.seed,
        "traces_per_class": args.traces_per_class,
        "duration": args.duration,
        "labels": sorted({t.label for t in traces}),
    }
    (Path(args.out) / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(paths)} traces to {args.out}")
    return 0


def _cmd_extract(args) -> int:
    spec = WindowSpec.burst(args.burst) if args.burst else WindowSpec.time_span(args.timespan)
    if args.pcap:
        if not args.label:
            raise ValueError("--label is required with --pcap")
        traces = [load_pcap(args.pcap, args.label)]
    else:
        traces = load_dataset(args.traces)
    series = [extract_series(t, spec) for t in traces]
    save_features_csv(series, args.out)
    total = sum(len(s) for s in series)
    print(f"wrote {total} windows from {len(series)} traces to {args.out}")
    return 0


def _cmd_perturb(args) -> int:
    series_list = load_features_csv(args.infile)
    tspec = TransformSpec(
        mode=args.mode,
        window=args.window,
        degree=args.degree,
        nu=args.nu,
        clamp_counts=args.clamp_counts,
    )
    # transform the stacked dataset (like the sweep does), then split the
    # matrix back into the original per-trace series
    X, _y = stack_series(series_list)
    Xt = tspec.apply(X, args.seed)
    out = []
    offset = 0
    for series in series_list:
        n = len(series)
        out.append(series.with_values(Xt[offset : offset + n], transform=tspec.key()))
        offset += n
    save_features_csv(out, args.out)
    print(f"wrote {offset} transformed windows to {args.out}")
    return 0


def _cmd_attack(args) -> int:
    series_list = load_features_csv(args.features)
    X, y = stack_series(series_list)
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise ValueError(f"--params: {exc.msg}") from exc
    if "hidden" in params:
        params["hidden"] = tuple(params["hidden"])
    train_idx, test_idx = attackers.split(
        y, SplitSpec(args.train_fraction, derive_seed(args.seed, "split"))
    )
    if args.classifier in ("forest", "mlp"):
        params.setdefault("seed", derive_seed(args.seed, "train"))
    model = attackers.train(args.classifier, X[train_idx], y[train_idx], **params)
    accuracy = attackers.evaluate(model, X[test_idx], y[test_idx])
    if args.save_model:
        attackers.save_model(model, args.save_model)
    print(
        f"classifier={args.classifier} accuracy={accuracy!r} "
        f"n_train={train_idx.size} n_test={test_idx.size}"
    )
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    report = run_experiment(config)
    paths = emit_report(report, config.output_dir)
    ok = len(report.ok_rows())
    skipped = len(report.skipped_rows())
    print(f"wrote {paths[0]} ({ok} cells, {skipped} skipped)")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage error (1) or --help (0)
        return int(exc.code or 0)
    handlers = {
        "synth": _cmd_synth,
        "extract": _cmd_extract,
        "perturb": _cmd_perturb,
        "attack": _cmd_attack,
        "sweep": _cmd_sweep,
    }
    try:
        if args.command == "selftest":
            return 0 if run_selftest() else DATA_ERROR
        return handlers[args.command](args)
    except (ConfigError, PcapFormatError, EmptySeriesError) as exc:
        print(f"tpbench {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR
    except (ValueError, OSError) as exc:
        print(f"tpbench {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
