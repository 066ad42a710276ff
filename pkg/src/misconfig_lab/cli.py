"""Command line entry point: ``misconfig-lab <command> [options]``.

Exit codes: 0 success, 2 bad input (infeasible parameters, missing or
malformed files), 3 training diverged, 4 no misconfiguration detected.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import Diverged, InfeasibleParams, MisconfigLabError, ParseError
from .faults import Dataset, FaultClass, make_dataset
from .graph import PRESETS, zoo_documents

log = logging.getLogger("misconfig_lab")

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_CLEAN = 0, 2, 3, 4


def _atomic_write(path, text: str) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
    return hashlib.sha256(text.encode()).hexdigest()


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _zoo_for(preset: str, zoo_dir):
    return zoo_documents(zoo_dir) if preset == "real-world" else None


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{p} does not exist")
    return p


def _hyperparams(args):
    from .neuro.params import FULL_SCALE_HYPERPARAMS, Hyperparams

    hp = FULL_SCALE_HYPERPARAMS if getattr(args, "preset", "desk") == "full" else Hyperparams()
    over = {}
    for flag, name in (("hidden_dim", "hidden_dim"), ("heads", "heads"), ("layers", "layers"),
                       ("batch_size", "batch_size"), ("lr", "learning_rate"),
                       ("weight_decay", "weight_decay"), ("epochs", "epochs"),
                       ("dropout", "dropout_rate")):
        val = getattr(args, flag, None)
        if val is not None:
            over[name] = val
    if getattr(args, "variant", None):
        over["variant"] = args.variant
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "per_type_softmax", False):
        over["per_type_softmax"] = True
    return hp.replace(**over)


# -- commands ---------------------------------------------------------------


def cmd_gen(args) -> int:
    zoo = _zoo_for(args.preset, args.zoo_dir)
    ds = make_dataset(PRESETS[args.preset], args.n, seed=args.seed, level=args.level, zoo=zoo)
    ds.header["preset"] = args.preset
    out = Path(args.out or f"{args.preset}-{args.n}-s{args.seed}.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    digest = ds.save(out)
    manifest = {
        "format": "misconfig-lab/manifest",
        "version": 1,
        "dataset": out.name,
        "sha256": digest,
        "n_samples": len(ds),
        "preset": args.preset,
        "seed": args.seed,
        "level": args.level,
        "class_histogram": {f"f{k}": v for k, v in ds.class_histogram.items()},
    }
    _atomic_write(out.with_name(out.name + ".manifest.json"), json.dumps(manifest, indent=2, sort_keys=True))
    print(json.dumps({"dataset": str(out), "sha256": digest, "n_samples": len(ds)}))
    return EXIT_OK


def cmd_train(args) -> int:
    from .experiments import clean_pool
    from .neuro.train import DatasetSource, InjectionStream, train

    hp = _hyperparams(args)
    if args.data:
        source = DatasetSource(Dataset.load(_require(args.data)).samples)
    elif args.stream:
        source = InjectionStream(clean_pool(args.topology, args.n, args.data_seed,
                                            _zoo_for(args.topology, args.zoo_dir)))
    else:
        zoo = _zoo_for(args.topology, args.zoo_dir)
        source = DatasetSource(make_dataset(PRESETS[args.topology], args.n, seed=args.data_seed,
                                            zoo=zoo).samples)

    def progress(row):
        log.info("epoch %d samples=%d loss=%.4f acc=%.3f", row["epoch"], row["samples_seen"],
                 row["loss"], row["acc"])

    params, report = train(source, hp, max_samples=args.max_samples, callback=progress)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params.save(out / "checkpoint.json")
    report.save_csv(out / "report.csv")
    summary = {
        "variant": hp.variant,
        "samples_seen": report.rows[-1]["samples_seen"] if report.rows else 0,
        "final_loss": report.rows[-1]["loss"] if report.rows else None,
        "final_acc": report.rows[-1]["acc"] if report.rows else None,
        "params_checksum": report.checksum,
        "report_checksum": report.digest(),
        "n_parameters": params.n_parameters,
    }
    _atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .experiments import test_sets
    from .neuro.params import ModelParams
    from .neuro.train import evaluate

    params = ModelParams.load(_require(args.checkpoint))
    sets = {}
    for spec in args.data or []:
        name, _, path = spec.rpartition("=")
        sets[name or Path(path).stem] = Dataset.load(_require(path)).samples
    if args.generate:
        sets.update(test_sets(args.generate, args.seed, args.zoo_dir))
    if not sets:
        raise InfeasibleParams("nothing to evaluate: pass --data NAME=PATH or --generate N")
    metrics = {
        "format": "misconfig-lab/metrics",
        "version": 1,
        "variant": params.hp.variant,
        "datasets": {name: evaluate(params, s).to_dict() for name, s in sets.items()},
    }
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        _atomic_write(args.out, text)
    print(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    from .experiments import compare_variants

    hp = _hyperparams(args)
    seeds = list(range(args.seeds)) if args.seed_list is None else args.seed_list
    window = min(args.window, args.budget)
    res = compare_variants(args.variants, seeds, args.budget, args.pool, window,
                           args.threshold, hp, args.data_seed)
    curves = []
    for r in res.runs:
        for n, acc in r.report.moving_average(window, args.stride):
            curves.append([r.variant, r.seed, n, repr(acc)])
    summary = []
    for v in args.variants:
        per_seed = [r.samples_to_target for r in res.by_variant(v)]
        med = res.median_samples_to_target(v, censor=True)
        summary.append([v, ";".join("" if s is None else str(s) for s in per_seed),
                        "" if med is None else repr(med), int(res.reached(v))])
    out = Path(args.out)
    _atomic_write(out / "curves.csv",
                  _csv_text(["variant", "seed", "samples_seen", "moving_avg_acc"], curves))
    _atomic_write(out / "summary.csv",
                  _csv_text(["variant", "samples_to_80pct_per_seed", "samples_to_80pct_median",
                             "reached"], summary))
    for row in summary:
        print(f"{row[0]}: samples_to_80pct median={row[2] or 'n/a'} per-seed=[{row[1]}]")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .experiments import bench_scaling

    res = bench_scaling(tuple(args.factors), args.reps, args.seed, min_time=args.min_time)
    cols = ["algorithm", "scale_factor", "repetition", "n_nodes", "n_edges", "network_scale",
            "n_violations", "ops", "seconds"]
    text = _csv_text(cols, [[r[c] if c != "seconds" else repr(r[c]) for c in cols] for r in res.rows])
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    print(json.dumps({"exponents": res.exponents}, sort_keys=True))
    return EXIT_OK


def cmd_rb(args) -> int:
    from .rules import WeightTable
    from .scenario import Scenario, diagnose, make_scenario

    if args.scenario:
        sc = Scenario.load(_require(args.scenario))
    else:
        fault = FaultClass(int(args.fault.lower().lstrip("f"))) if args.fault != "none" else FaultClass.F0
        sc = make_scenario(args.topology, args.seed, fault, args.delta,
                           _zoo_for(args.topology, args.zoo_dir))
    if args.save_scenario:
        sc.save(args.save_scenario)
    weights = WeightTable.load(_require(args.weights)) if args.weights else None
    result = diagnose(sc, weights)
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK if result["f_check"] else EXIT_CLEAN


# -- parser -----------------------------------------------------------------


def _add_model_flags(p):
    p.add_argument("--preset", choices=("desk", "full"), default="desk",
                   help="hyperparameter preset (desk: h=32, H=4, lr=1e-3)")
    p.add_argument("--hidden-dim", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--per-type-softmax", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="misconfig-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--log-level", default="WARNING")
    ap.add_argument("--zoo-dir", default=None,
                    help="directory of Zoo .graphml files (default: $MISCONFIG_LAB_ZOO_DIR, "
                         "then the bundled copies)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled dataset as JSON Lines")
    p.add_argument("--preset", choices=sorted(PRESETS), default="baseline")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", choices=("feature", "config"), default="feature")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--variant", default="etagatv2")
    _add_model_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", help="training dataset (JSONL); generated when omitted")
    p.add_argument("--topology", choices=sorted(PRESETS), default="baseline")
    p.add_argument("--n", type=int, default=1024, help="samples (or pool graphs with --stream)")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--stream", action="store_true",
                   help="re-inject a random fault into pool graphs for every consumed sample")
    p.add_argument("--max-samples", type=int)
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one or more datasets")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", action="append", metavar="NAME=PATH")
    p.add_argument("--generate", type=int, metavar="N",
                   help="also evaluate on fresh baseline/larger-scale/real-world sets of N samples")
    p.add_argument("--seed", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="sample-efficiency comparison of the four variants")
    p.add_argument("--variants", nargs="+", default=["gat", "gatv2", "etagat", "etagatv2"])
    _add_model_flags(p)
    p.add_argument("--seeds", type=int, default=3, help="number of seeds (0..N-1)")
    p.add_argument("--seed-list", type=int, nargs="+")
    p.add_argument("--budget", type=int, default=20000, help="consumed samples per run")
    p.add_argument("--pool", type=int, default=1024, help="clean graphs in the injection pool")
    p.add_argument("--window", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--data-seed", type=int, default=7)
    p.add_argument("--out", default="compare")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="runtime scaling of GNN inference and rule-based diagnosis")
    p.add_argument("--factors", type=int, nargs="+", default=[1, 2, 4])
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-time", type=float, default=0.2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("rb", help="check specifications and run rule-based diagnosis")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--topology", choices=sorted(PRESETS), default="baseline")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fault", default="f1", help="f1..f7 or none")
    p.add_argument("--delta", type=int)
    p.add_argument("--weights", help="weight table JSON")
    p.add_argument("--save-scenario")
    p.set_defaults(func=cmd_rb)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Diverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InfeasibleParams, ParseError, FileNotFoundError, ValueError, KeyError,
            MisconfigLabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
