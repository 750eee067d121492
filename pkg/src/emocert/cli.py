"""Command-line pipeline: fixture -> split -> augment -> train -> evaluate ->
metrics -> certify.

Exit codes: 0 success (for ``certify``: success AND every dimension passes),
1 operation failure, 2 usage error.  All randomness flows from ``--seed``
(default 0); reruns with identical inputs and seed produce byte-identical
primary outputs (pin the report timestamp with ``--pin-timestamp``).
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import nullcontext
from pathlib import Path

from emocert import __version__
from emocert.rng import Rng, derive_seed


def _threads_ctx(threads: int | None):
    if threads is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def _progress_printer(enabled: bool):
    if not enabled:
        return None

    def emit(stats):
        line = {
            "event": "epoch",
            "epoch": stats.epoch,
            "train_loss": stats.train_loss,
            "train_acc": stats.train_acc,
            "val_loss": stats.val_loss,
            "val_acc": stats.val_acc,
            "lr": stats.lr,
        }
        print(json.dumps(line), file=sys.stderr, flush=True)

    return emit


def _parse_fractions(text: str) -> dict[str, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("fractions must be three comma-separated values")
    values = []
    for part in parts:
        part = part.strip()
        if "/" in part:
            num, den = part.split("/", 1)
            values.append(float(num) / float(den))
        else:
            values.append(float(part))
    return {"train": values[0], "val": values[1], "test": values[2]}


# -- subcommand implementations --------------------------------------------

def _cmd_fixture_gen(args) -> int:
    from emocert.data.fixtures import FixtureConfig, generate_fixture
    from emocert.data.manifest import save_manifest

    mix = None
    if args.mix is not None:
        mix = json.loads(Path(args.mix).read_text(encoding="utf-8"))
    kwargs = dict(
        n_per_class=args.n_per_class,
        seed=args.seed,
        noise_sigma=args.noise_sigma,
        bias_attribute=args.bias_attribute,
        bias_group=args.bias_group,
        bias_extra_sigma=args.bias_extra_sigma,
    )
    if mix is not None:
        kwargs["demographic_mix"] = mix
    config = FixtureConfig(**kwargs)
    manifest = generate_fixture(config, args.out_dir)
    save_manifest(manifest, args.manifest)
    print(f"wrote {len(manifest)} samples to {args.out_dir}, manifest {args.manifest}")
    return 0


def _cmd_dataset_analyze(args) -> int:
    from emocert.data.manifest import load_manifest
    from emocert.data.ops import analyze_dataset

    report = analyze_dataset(load_manifest(args.manifest))
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_dataset_rebalance(args) -> int:
    from emocert.data.manifest import load_manifest, save_manifest
    from emocert.data.ops import rebalance_class

    manifest = load_manifest(args.manifest)
    rng = Rng(derive_seed(args.seed, "rebalance"))
    out = rebalance_class(manifest, emotion=args.emotion,
                          keep_fraction=args.keep_fraction, rng=rng)
    save_manifest(out, args.out)
    print(f"kept {len(out)} of {len(manifest)} samples -> {args.out}")
    return 0


def _cmd_dataset_split(args) -> int:
    from emocert.data.manifest import load_manifest, save_manifest
    from emocert.data.ops import split_dataset

    manifest = load_manifest(args.manifest)
    rng = Rng(derive_seed(args.seed, "split"))
    out = split_dataset(manifest, args.fractions, rng)
    save_manifest(out, args.out)
    counts = {}
    for s in out.samples:
        counts[s.split] = counts.get(s.split, 0) + 1
    print(f"split {counts} -> {args.out}")
    return 0


def _cmd_dataset_augment(args) -> int:
    from emocert.augment import expand_dataset
    from emocert.data.manifest import load_manifest, save_manifest

    manifest = load_manifest(args.manifest)
    expanded = expand_dataset(manifest, args.images_dir, out_dir=args.out_dir, seed=args.seed)
    save_manifest(expanded, args.out)
    print(f"expanded {len(manifest)} originals to {len(expanded)} samples -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    from emocert.data.manifest import load_manifest
    from emocert.inference import load_array_dataset
    from emocert.nn.serialization import save_model
    from emocert.nn.training import (
        class_weights_from_labels,
        default_train_config,
        history_to_csv,
        train,
    )

    manifest = load_manifest(args.manifest)
    train_set = load_array_dataset(manifest, args.images_dir, split="train")
    val_set = load_array_dataset(manifest, args.images_dir, split="val")
    overrides = {"seed": args.seed}
    if args.max_epochs is not None:
        overrides["max_epochs"] = args.max_epochs
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.patience is not None:
        overrides["patience"] = args.patience
    if args.epoch_size is not None:
        overrides["epoch_size"] = args.epoch_size
    weights = class_weights_from_labels(train_set.labels) if args.arch == "enhanced" else None
    config = default_train_config(args.arch, class_weights=weights, **overrides)
    with _threads_ctx(args.threads):
        result = train(config, train_set, val_set, progress=_progress_printer(args.progress))
    save_model(result.spec, result.params, args.model)
    if args.history:
        Path(args.history).write_text(history_to_csv(result.history), encoding="utf-8")
    best = max(result.history, key=lambda h: h.val_acc)
    print(
        f"trained {args.arch} for {len(result.history)} epoch(s); "
        f"best val_acc {best.val_acc:.4f} (epoch {best.epoch}); model -> {args.model}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    from emocert.data.manifest import load_manifest
    from emocert.inference import predict_records
    from emocert.metrics import write_records
    from emocert.nn.serialization import load_model

    spec, params = load_model(args.model)
    manifest = load_manifest(args.manifest)
    with _threads_ctx(args.threads):
        records, skipped = predict_records(
            spec, params, manifest, args.images_dir, split=args.split
        )
    write_records(records, args.out)
    msg = f"wrote {len(records)} prediction records -> {args.out}"
    if skipped:
        msg += f" ({len(skipped)} unreadable image(s) skipped)"
    print(msg)
    return 0


def _cmd_metrics(args) -> int:
    from emocert.certify import file_digest
    from emocert.metrics import bundle, confusion_to_csv, read_records

    records = read_records(args.predictions)
    train_accuracy = args.train_accuracy
    if train_accuracy is None and args.history:
        rows = Path(args.history).read_text(encoding="utf-8").splitlines()
        header = rows[0].split(",")
        best = min(
            (line.split(",") for line in rows[1:] if line),
            key=lambda f: float(f[header.index("val_loss")]),
        )
        train_accuracy = float(best[header.index("train_acc")])
    result = bundle(records, train_accuracy=train_accuracy, min_group_n=args.min_group_n)
    doc = {
        "schema": "metrics/1",
        "inputs": {"predictions": file_digest(args.predictions)},
        "metrics": result.to_dict(),
    }
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.confusion_csv:
        Path(args.confusion_csv).write_text(confusion_to_csv(result.confusion), encoding="utf-8")
    print(f"accuracy {result.accuracy:.4f}, metrics -> {args.out}")
    return 0


def _cmd_certify(args) -> int:
    from emocert.certify import (
        default_profile,
        dimension_verdicts,
        evaluate,
        file_digest,
        load_profile,
        render_report,
    )
    from emocert.metrics import MetricsBundle

    doc = json.loads(Path(args.metrics).read_text(encoding="utf-8"))
    metrics = MetricsBundle.from_dict(doc["metrics"] if "metrics" in doc else doc)
    digests = dict(doc.get("inputs", {}))
    digests["metrics"] = file_digest(args.metrics)
    if args.profile:
        profile = load_profile(args.profile)
        digests["profile"] = file_digest(args.profile)
    else:
        profile = default_profile()
    results = evaluate(profile, metrics)
    report = render_report(
        results,
        profile,
        metrics,
        fmt=args.format,
        toolkit_version=__version__,
        input_digests=digests,
        timestamp=args.pin_timestamp,
    )
    if args.out:
        Path(args.out).write_bytes(report)
    else:
        sys.stdout.buffer.write(report)
    verdicts = dimension_verdicts(results)
    for dim, verdict in verdicts.items():
        print(f"{dim}: {verdict}", file=sys.stderr)
    return 0 if all(v == "pass" for v in verdicts.values()) else 1


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emocert",
        description=(
            "Train, evaluate and self-certify compact facial-emotion CNNs with "
            "reliability and fairness reporting."
        ),
    )
    parser.add_argument("--version", action="version", version=f"emocert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fixture = sub.add_parser("fixture", help="synthetic dataset fixtures")
    fixture_sub = fixture.add_subparsers(dest="subcommand", required=True)
    gen = fixture_sub.add_parser("gen", help="generate a synthetic labelled image set")
    gen.add_argument("--out-dir", required=True, help="directory for PGM images")
    gen.add_argument("--manifest", required=True, help="output manifest path")
    gen.add_argument("--n-per-class", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise-sigma", type=float, default=8.0)
    gen.add_argument("--mix", help="JSON file overriding the demographic mix")
    gen.add_argument("--bias-attribute", choices=("gender", "race", "age_group"))
    gen.add_argument("--bias-group", help="demographic group receiving extra noise")
    gen.add_argument("--bias-extra-sigma", type=float, default=0.0)
    gen.set_defaults(func=_cmd_fixture_gen)

    dataset = sub.add_parser("dataset", help="manifest operations")
    dataset_sub = dataset.add_subparsers(dest="subcommand", required=True)

    analyze = dataset_sub.add_parser("analyze", help="composition report")
    analyze.add_argument("--manifest", required=True)
    analyze.add_argument("--out", help="write the JSON report here instead of stdout")
    analyze.set_defaults(func=_cmd_dataset_analyze)

    rebalance = dataset_sub.add_parser("rebalance", help="downsample one class's originals")
    rebalance.add_argument("--manifest", required=True)
    rebalance.add_argument("--emotion", default="calm")
    rebalance.add_argument("--keep-fraction", type=float, default=0.5)
    rebalance.add_argument("--seed", type=int, default=0)
    rebalance.add_argument("--out", required=True)
    rebalance.set_defaults(func=_cmd_dataset_rebalance)

    split = dataset_sub.add_parser("split", help="assign stratified train/val/test tags")
    split.add_argument("--manifest", required=True)
    split.add_argument("--fractions", type=_parse_fractions, default="0.8,0.1,0.1",
                       help="train,val,test; decimals or fractions like 5/7,1/7,1/7")
    split.add_argument("--seed", type=int, default=0)
    split.add_argument("--out", required=True)
    split.set_defaults(func=_cmd_dataset_split)

    augment = dataset_sub.add_parser("augment", help="11x deployment-condition expansion")
    augment.add_argument("--manifest", required=True)
    augment.add_argument("--images-dir", required=True)
    augment.add_argument("--out-dir", help="write images here instead of next to the originals")
    augment.add_argument("--seed", type=int, default=0)
    augment.add_argument("--out", required=True, help="output manifest path")
    augment.set_defaults(func=_cmd_dataset_augment)

    train_p = sub.add_parser("train", help="train a model on the train/val splits")
    train_p.add_argument("--arch", choices=("baseline", "enhanced"), required=True)
    train_p.add_argument("--manifest", required=True)
    train_p.add_argument("--images-dir", required=True)
    train_p.add_argument("--model", required=True, help="output weights file")
    train_p.add_argument("--history", help="output per-epoch CSV")
    train_p.add_argument("--seed", type=int, default=0)
    train_p.add_argument("--max-epochs", type=int)
    train_p.add_argument("--batch-size", type=int)
    train_p.add_argument("--patience", type=int)
    train_p.add_argument("--epoch-size", type=int,
                         help="samples drawn per epoch (default: the train split size)")
    train_p.add_argument("--threads", type=int)
    train_p.add_argument("--progress", action="store_true",
                         help="emit machine-readable epoch lines on stderr")
    train_p.set_defaults(func=_cmd_train)

    evaluate_p = sub.add_parser("evaluate", help="predict a split into record files")
    evaluate_p.add_argument("--model", required=True)
    evaluate_p.add_argument("--manifest", required=True)
    evaluate_p.add_argument("--images-dir", required=True)
    evaluate_p.add_argument("--split", default="test",
                            choices=("train", "val", "test", "all"))
    evaluate_p.add_argument("--out", required=True)
    evaluate_p.add_argument("--threads", type=int)
    evaluate_p.set_defaults(func=_cmd_evaluate)

    metrics_p = sub.add_parser("metrics", help="metrics bundle from prediction records")
    metrics_p.add_argument("--predictions", required=True)
    metrics_p.add_argument("--out", required=True)
    metrics_p.add_argument("--train-accuracy", type=float)
    metrics_p.add_argument("--history", help="pull train accuracy of the best epoch from this CSV")
    metrics_p.add_argument("--min-group-n", type=int, default=30)
    metrics_p.add_argument("--confusion-csv", help="also export the confusion matrix as CSV")
    metrics_p.set_defaults(func=_cmd_metrics)

    certify_p = sub.add_parser("certify", help="evaluate a metrics bundle against a profile")
    certify_p.add_argument("--metrics", required=True)
    certify_p.add_argument("--profile", help="profile JSON (built-in defaults when omitted)")
    certify_p.add_argument("--out", help="report path (stdout when omitted)")
    certify_p.add_argument("--format", choices=("structured", "human_readable"),
                           default="structured")
    certify_p.add_argument("--pin-timestamp", help="fixed timestamp for byte-stable reports")
    certify_p.set_defaults(func=_cmd_certify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "split", None) == "all":
        args.split = None
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # operation failure -> exit 1 with a clear message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
