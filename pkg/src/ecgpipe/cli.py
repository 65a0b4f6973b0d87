"""
Command-line entry point.

Every subcommand accepts ``--seed``, ``--config`` (a JSON object whose keys
are option names, e.g. ``{"test_fraction": 0.2}``; explicit flags win),
``--verbose`` and ``--jobs``. Exit status: 0 success, 1 runtime error,
2 usage error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .dataset import DatasetManifest, SplitSpec, build_manifest, check_manifest, read_id_list
from .errors import EcgError
from .filters import BandpassSpec, design_bandpass
from .metrics import format_confusion, format_table
from .qrs import DetectorConfig, detect_qrs, qrs_features
from .raster import RasterConfig, heat_grid, rasterize, write_png
from .records import import_csv, read_record, write_record

log = logging.getLogger("ecgpipe")


class UsageError(Exception):
    pass


def _dump(obj, out):
    text = json.dumps(obj, indent=2) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")


def _train_config(args):
    from .nn import TrainConfig
    kw = dict(seed=args.seed)
    for name in ("max_epochs", "batch_size", "lr_initial", "lr_floor",
                 "early_stopping_patience", "plateau_patience"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    return TrainConfig(**kw)


# -- subcommands -----------------------------------------------------------

def cmd_detect(args):
    _require(args, "input")
    record = read_record(args.input)
    cfg = DetectorConfig.for_rate(record.sampling_hz)
    if args.window is not None:
        cfg = cfg.with_window(args.window)
    ann = detect_qrs(record, args.lead, cfg)
    out = {"record_id": record.record_id, **ann.to_dict(),
           "features": qrs_features(ann, record.sampling_hz).to_dict()}
    _dump(out, args.out)


def cmd_rasterize(args):
    _require(args, "input", "out")
    record = read_record(args.input)
    write_png(rasterize(record, RasterConfig(supersample=args.supersample)), args.out)


def cmd_filter(args):
    coeffs = design_bandpass(BandpassSpec(args.fs, args.lowcut, args.highcut, args.order))
    _dump(coeffs.to_dict(), args.out)


def cmd_import_csv(args):
    _require(args, "input", "out", "fs")
    record = import_csv(args.input, args.fs, label=args.label, record_id=args.record_id)
    if args.gain is not None:
        from dataclasses import replace
        record = replace(record, gain=args.gain)
    write_record(record, args.out)


def cmd_dataset(args):
    action = args.action
    if action == "build":
        _require(args, "data_dir", "out")
        manifest = build_manifest(args.data_dir, seed=args.seed)
    else:
        _require(args, "manifest", "out")
        manifest = DatasetManifest.load(args.manifest)
        if action == "balance":
            manifest = manifest.balanced(seed=args.seed)
        elif action == "split":
            spec = SplitSpec(args.test_fraction, args.folds, args.seed)
            manifest = manifest.split(spec)
            check_manifest(manifest)
        elif action == "exclude":
            _require(args, "ids")
            manifest = manifest.exclude(read_id_list(args.ids))
    manifest.save(args.out)
    counts = {}
    for e in manifest.active:
        counts[e.label.value] = counts.get(e.label.value, 0) + 1
    log.info("%s: %d active entries %s", action, len(manifest.active), counts)


def cmd_train(args):
    from .nn import save_checkpoint, write_history
    from .pipeline import RecordStore, fit
    _require(args, "arch", "manifest", "data_dir", "out")
    manifest = DatasetManifest.load(args.manifest)
    k = manifest.n_folds
    if k < 2:
        raise UsageError("train: manifest has no folds; run 'dataset split' first")
    val_fold = k - 1 if args.val_fold is None else args.val_fold
    store = RecordStore(args.data_dir)
    train_ids = manifest.ids(split="train_val", exclude_folds={val_fold})
    val_ids = manifest.ids(split="train_val", folds={val_fold})
    cfg = _train_config(args)
    state, history, _ = fit(args.arch, store.many(train_ids), store.many(val_ids), cfg,
                            with_qrs=args.with_qrs_features, length=args.length,
                            arch_overrides=_arch_overrides(args))
    last = history[-1] if history else {}
    save_checkpoint(state, args.out, cfg, metrics=last,
                    extra={"val_fold": val_fold, "manifest": str(args.manifest)})
    if args.history:
        write_history(history, args.history)


def _arch_overrides(args):
    out = {}
    if getattr(args, "filters", None):
        out["filters"] = args.filters
    return out


def cmd_eval(args):
    from .nn import load_checkpoint
    from .pipeline import RecordStore, evaluate_records
    _require(args, "ckpt", "manifest", "data_dir", "out")
    state = load_checkpoint(args.ckpt)
    manifest = DatasetManifest.load(args.manifest)
    if args.split == "test":
        ids = manifest.ids(split="test")
    else:
        ids = manifest.ids(split="train_val")
    if not ids:
        raise UsageError(f"eval: manifest has no records in split {args.split!r}")
    report, _, _ = evaluate_records(state, RecordStore(args.data_dir).many(ids))
    out = {"system": args.name or state.arch.kind, "split": args.split, "n_records": len(ids),
           **report.to_dict()}
    _dump(out, args.out)


def cmd_cv(args):
    from .pipeline import cross_validate
    _require(args, "arch", "manifest", "data_dir", "out")
    manifest = DatasetManifest.load(args.manifest)
    reports, agg = cross_validate(manifest, args.arch, _train_config(args), args.data_dir,
                                  with_qrs=args.with_qrs_features, length=args.length,
                                  arch_overrides=_arch_overrides(args), jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, rep in enumerate(reports):
        _dump({"system": args.arch, "fold": k, **rep.to_dict()}, out / f"fold_{k}.json")
    summary = {"system": args.arch, "aggregate": agg,
               "folds": [rep.to_dict() for rep in reports]}
    _dump(summary, out / "summary.json")
    table = format_table([(args.arch, agg["accuracy"]["mean"], agg["macro_f1"]["mean"])])
    (out / "table.txt").write_text(table + "\n")


def _report_rows(data):
    if "aggregate" in data:
        agg = data["aggregate"]
        return [(data.get("system", "?"), agg["accuracy"]["mean"], agg["macro_f1"]["mean"])]
    return [(data.get("system", "?"), data["accuracy"], data["macro_f1"])]


def cmd_report(args):
    import numpy as np
    from .metrics import ConfusionMatrix
    _require(args, "input")
    data = json.loads(Path(args.input).read_text())
    if args.format == "json":
        _dump(data, args.out)
        return
    if "confusion" in data:
        cm = ConfusionMatrix(np.asarray(data["confusion"]["counts"], dtype=np.int64),
                             tuple(data["confusion"]["class_names"]))
    else:
        cm = None
    if args.format == "png":
        _require(args, "out")
        if cm is None:
            raise UsageError("report: input has no confusion matrix to draw")
        write_png(heat_grid(cm.counts), args.out)
        return
    text = format_table(_report_rows(data))
    if cm is not None:
        text += "\n\n" + format_confusion(cm)
    if args.out in (None, "-"):
        print(text)
    else:
        Path(args.out).write_text(text + "\n")


# -- parser ----------------------------------------------------------------

def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--verbose", "-v", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (results unchanged)")
    return p


def _train_options(p):
    p.add_argument("--arch", choices=("cnn1d", "cnn1d_gru", "gru", "gru_lstm", "lstm", "cnn2d"))
    p.add_argument("--manifest")
    p.add_argument("--data-dir")
    p.add_argument("--with-qrs-features", action="store_true")
    p.add_argument("--length", type=int, default=5000, help="samples per lead fed to 1D models")
    p.add_argument("--filters", type=int, help="override filters per conv block")
    p.add_argument("--max-epochs", "--epochs", dest="max_epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr-initial", type=float)
    p.add_argument("--lr-floor", type=float)
    p.add_argument("--plateau-patience", type=int)
    p.add_argument("--early-stopping-patience", type=int)


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="ecgpipe", description=__doc__.strip().split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    leaves = []

    p = sub.add_parser("detect", parents=[common], help="QRS detection on one lead")
    p.add_argument("--in", dest="input")
    p.add_argument("--lead", default="II")
    p.add_argument("--window", type=int, help="integration window in samples (default 5)")
    p.add_argument("--out", help="output JSON (default stdout)")
    p.set_defaults(func=cmd_detect)
    leaves.append(p)

    p = sub.add_parser("rasterize", parents=[common], help="render a record to PNG")
    p.add_argument("--in", dest="input")
    p.add_argument("--out")
    p.add_argument("--supersample", type=int, default=4)
    p.set_defaults(func=cmd_rasterize)
    leaves.append(p)

    p = sub.add_parser("filter", parents=[common], help="dump bandpass coefficients")
    p.add_argument("--fs", type=float, default=500.0)
    p.add_argument("--lowcut", type=float, default=5.0)
    p.add_argument("--highcut", type=float, default=15.0)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_filter)
    leaves.append(p)

    p = sub.add_parser("import-csv", parents=[common], help="convert a CSV to a native record")
    p.add_argument("--in", dest="input")
    p.add_argument("--out", help="output stem (writes .json and .raw)")
    p.add_argument("--fs", type=float)
    p.add_argument("--label")
    p.add_argument("--record-id")
    p.add_argument("--gain", type=float)
    p.set_defaults(func=cmd_import_csv)
    leaves.append(p)

    p = sub.add_parser("dataset", help="manifest management")
    dsub = p.add_subparsers(dest="action", metavar="ACTION")
    dsub.required = True
    for action, helptext in (("build", "inventory a data directory"),
                             ("balance", "equalise class counts"),
                             ("split", "test split and folds"),
                             ("exclude", "mark noisy records")):
        d = dsub.add_parser(action, parents=[common], help=helptext)
        d.add_argument("--out")
        if action == "build":
            d.add_argument("--data-dir")
        else:
            d.add_argument("--manifest")
        if action == "split":
            d.add_argument("--test-fraction", type=float, default=0.20)
            d.add_argument("--folds", type=int, default=10)
        if action == "exclude":
            d.add_argument("--ids", help="text file of record ids, one per line")
        d.set_defaults(func=cmd_dataset, command="dataset")
        leaves.append(d)

    p = sub.add_parser("train", parents=[common], help="train a classifier")
    _train_options(p)
    p.add_argument("--val-fold", type=int, help="fold used for validation (default: last)")
    p.add_argument("--history", help="per-epoch CSV")
    p.add_argument("--out", help="checkpoint stem")
    p.set_defaults(func=cmd_train)
    leaves.append(p)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--ckpt")
    p.add_argument("--manifest")
    p.add_argument("--data-dir")
    p.add_argument("--split", choices=("test", "train_val"), default="test")
    p.add_argument("--name", help="system name in the report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    leaves.append(p)

    p = sub.add_parser("cv", parents=[common], help="k-fold cross-validation")
    _train_options(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_cv)
    leaves.append(p)

    p = sub.add_parser("report", parents=[common], help="render a report")
    p.add_argument("--in", dest="input")
    p.add_argument("--format", choices=("table", "json", "png"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    leaves.append(p)

    return parser, leaves


def _config_defaults(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        data = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {known.config} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    try:
        defaults = _config_defaults(argv)
        for leaf in leaves:
            known = {a.dest for a in leaf._actions}
            leaf.set_defaults(**{k: v for k, v in defaults.items() if k in known})
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ecgpipe: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"ecgpipe: error: {exc}", file=sys.stderr)
        return 2
    except (EcgError, OSError) as exc:
        print(f"ecgpipe: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
