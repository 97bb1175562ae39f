"""Command-line surface: generate, train, eval, predict, gradcheck, segment.

Numeric constants come from the plain-text config file (see config.py);
flags handle paths and counts only. Every command echoes the fully resolved
configuration into its output directory so any run can be reproduced.

Exit codes: 0 success (predict: good), 1 operational error, 2 predict: bad.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
import time
from pathlib import Path

from . import dataset as ds
from .config import ConfigError, RunConfig
from .nn import evaluate, init_model, load_model, predict, save_model, train
from .nn.gradcheck import REL_TOLERANCE, run_all
from .pgm import ImageFormatError, read_pgm, read_ppm, write_pgm
from .preprocess import (STANDARD_HEIGHT, STANDARD_WIDTH, binarize,
                         resize_to_standard, segment_sheet, to_grayscale)

KIND_KEYS = ("LPE", "LSE", "LSE_VERTICAL_SOLID", "BLOT", "good")


class CliError(RuntimeError):
    pass


def _log(msg: str) -> None:
    print(msg, flush=True)


def cmd_generate(args) -> int:
    cfg = RunConfig.load(args.config)
    out_dir = Path(args.out)
    gen = cfg.generation_config(count=args.count)
    cfg.echo(out_dir)
    entries = ds.build_dataset(out_dir, cfg.master_seed, gen, log=_log)
    ds.split_dataset(entries, cfg.master_seed)
    ds.write_manifest(entries, out_dir / "manifest.jsonl")

    counts: dict[str, dict[str, int]] = {}
    for e in entries:
        kind = e.error_kind.value if e.error_kind else "good"
        counts.setdefault(kind, {})
        counts[kind][e.split] = counts[kind].get(e.split, 0) + 1
    _log(f"wrote {len(entries)} samples to {out_dir}")
    for kind in KIND_KEYS:
        if kind in counts:
            per_split = " ".join(f"{s}={n}" for s, n in sorted(counts[kind].items()))
            _log(f"  {kind}: {sum(counts[kind].values())} ({per_split})")
    _log(f"manifest: {out_dir / 'manifest.jsonl'}")
    return 0


def _load_split_tensors(manifest_path: Path, split: str):
    entries = ds.read_manifest(manifest_path)
    packed = ds.pack(entries, split, manifest_path.parent)
    if packed.count == 0:
        raise CliError(f"split {split!r} is empty in {manifest_path}")
    x, y = packed.tensors()
    return packed, x, y


def cmd_train(args) -> int:
    cfg = RunConfig.load(args.config)
    manifest_path = Path(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.echo(out_dir)

    _, train_x, train_y = _load_split_tensors(manifest_path, "train")
    _, val_x, val_y = _load_split_tensors(manifest_path, "validation")
    tc = cfg.train_config()
    model = init_model(cfg.architecture(), tc.seed)
    _log(f"training on {train_x.shape[0]} samples "
         f"(validation {val_x.shape[0]}, seed {tc.seed})")
    start = time.time()
    model, curve = train(model, train_x, train_y, val_x, val_y, tc, log=_log)
    wall = time.time() - start

    model_path = out_dir / "model.pgdm"
    save_model(model, model_path)
    with open(out_dir / "curve.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "train_loss", "val_accuracy"])
        for point in curve:
            writer.writerow([point.iteration, f"{point.train_loss:.6f}",
                             f"{point.val_accuracy:.6f}"])
    summary = {
        "final_validation_accuracy": curve[-1].val_accuracy if curve else None,
        "iterations": curve[-1].iteration if curve else 0,
        "wall_time_seconds": round(wall, 2),
        "train_samples": int(train_x.shape[0]),
        "validation_samples": int(val_x.shape[0]),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    _log(f"model: {model_path}")
    if curve:
        _log(f"final validation accuracy: {curve[-1].val_accuracy:.4f} "
             f"({wall:.1f}s)")
    return 0


def cmd_eval(args) -> int:
    cfg = RunConfig.load(args.config)
    manifest_path = Path(args.manifest)
    dump_dir = Path(args.dump_dir)
    dump_dir.mkdir(parents=True, exist_ok=True)
    cfg.echo(dump_dir)

    model = load_model(args.model)
    entries = ds.read_manifest(manifest_path)
    packed, x, y = _load_split_tensors(manifest_path, args.split)
    metrics = evaluate(model, x, y, ids=packed.ids, batch=cfg.minibatch)

    by_id = {e.id: e for e in entries}
    split_entries = [by_id[int(i)] for i in packed.ids]
    kind_total: dict[str, int] = {k: 0 for k in KIND_KEYS}
    kind_wrong: dict[str, int] = {k: 0 for k in KIND_KEYS}
    wrong_ids = set(metrics.misclassified)
    for e in split_entries:
        kind = e.error_kind.value if e.error_kind else "good"
        kind_total[kind] += 1
        if e.id in wrong_ids:
            kind_wrong[kind] += 1
    per_kind = {k: {"count": kind_total[k], "misclassified": kind_wrong[k],
                    "accuracy": (round(1 - kind_wrong[k] / kind_total[k], 4)
                                 if kind_total[k] else None)}
                for k in KIND_KEYS}

    dumped = []
    with open(dump_dir / "misclassified.jsonl", "w") as f:
        for sample_id in metrics.misclassified:
            e = by_id[sample_id]
            target = dump_dir / Path(e.path).name
            shutil.copyfile(manifest_path.parent / e.path, target)
            f.write(e.to_json() + "\n")
            dumped.append(target.name)

    report = {
        "split": args.split,
        **metrics.as_dict(),
        "per_kind": per_kind,
        "dumped": dumped,
    }
    out_path = dump_dir / "metrics.json"
    out_path.write_text(json.dumps(report, indent=2) + "\n")
    _log(f"accuracy: {metrics.accuracy:.4f} on {packed.count} samples "
         f"({len(dumped)} misclassified dumped)")
    _log(f"metrics: {out_path}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    img = read_pgm(args.image)
    if not img.is_binary():
        img = binarize(img)  # normalizes scanner polarity to ink=255
    if (img.height, img.width) != (STANDARD_HEIGHT, STANDARD_WIDTH):
        img = resize_to_standard(img)
    label, probs = predict(model, img)
    print(f"{label}  {probs[0]:.6f} {probs[1]:.6f}")
    return 0 if label == "good" else 2


def cmd_gradcheck(args) -> int:
    reports, elapsed = run_all()
    failed = [r for r in reports if not r.passed]
    for r in reports:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.layer:22s} worst rel err {r.worst_rel_error:.3e} "
              f"({r.configs} configs)  {status}")
    print(f"tolerance {REL_TOLERANCE:g}, total {elapsed:.1f}s")
    if failed:
        print("failed layers: " + ", ".join(r.layer for r in failed))
        return 1
    return 0


def cmd_segment(args) -> int:
    cfg = RunConfig.load(args.config)
    sheet_path = Path(args.sheet)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.echo(out_dir)

    if sheet_path.suffix.lower() == ".ppm":
        gray = to_grayscale(read_ppm(sheet_path))
    else:
        gray = read_pgm(sheet_path)
    binary = gray if gray.is_binary() else binarize(gray)
    boxes = segment_sheet(
        binary, row_noise_tolerance=cfg.row_noise_tolerance,
        min_row_gap=cfg.min_row_gap, min_col_gap=cfg.min_col_gap,
        padding=cfg.box_padding)

    stem = sheet_path.stem
    box_records = []
    for i, box in enumerate(boxes):
        write_pgm(box.crop(binary), out_dir / f"{stem}_{i}.pgm")
        box_records.append({"row0": box.row0, "col0": box.col0,
                            "row1": box.row1, "col1": box.col1})
    (out_dir / f"{stem}_boxes.json").write_text(
        json.dumps(box_records, indent=2) + "\n")
    _log(f"{len(boxes)} segments from {sheet_path} -> {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="printguard",
        description="Synthetic print-error corpus generation, CNN training, "
                    "and segment classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build the labeled corpus")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=None,
                   help="total samples (scales the composition proportionally)")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train the classifier on a manifest")
    p.add_argument("--config", default=None)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a manifest split")
    p.add_argument("--config", default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test",
                   choices=["train", "test", "validation"])
    p.add_argument("--dump-dir", required=True,
                   help="directory for metrics.json and misclassified samples")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="classify one PGM segment")
    p.add_argument("--model", required=True)
    p.add_argument("image")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference layer verification")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("segment", help="cut a sheet into word segments")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("sheet", help="PGM (grayscale) or PPM (RGB) sheet raster")
    p.set_defaults(fn=cmd_segment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ConfigError, ImageFormatError, ds.DatasetError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
