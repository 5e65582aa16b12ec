"""Command-line entry point: ``hdrmax <subcommand>``.

Manifests are JSON, either a bare list of entries or an object with
``entries`` and an optional ``config`` block holding transform settings.
Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, HdrmaxError
from .fr import CLASSICAL_GROUPS, FEATURE_GROUP_ORDER, fr_feature_row
from .framio import load_video, write_y4m
from .nss import CSV_FEATURE_COLUMNS, SCALE_MODES, video_features
from .regress import (
    DEFAULT_C,
    DEFAULT_EPSILON,
    DEFAULT_GAMMA,
    N_FOLDS,
    Grid,
    SvrModel,
    evaluate,
    make_splits,
    predict,
    train_svr,
)
from .testkit import KINDS, PATTERNS, iter_suite
from .transform import TransformConfig

log = logging.getLogger("hdrmax")

NR_PROVENANCE = ("delta", "patch_size", "noise_sigma", "seed", "status")
FR_PROVENANCE = ("delta", "patch_size", "status")
NON_FEATURE_COLUMNS = {"video_id", "content_id", "mos", *NR_PROVENANCE}


def _fmt(v) -> str:
    # repr round-trips floats exactly, keeping reruns byte-identical
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def load_manifest(path):
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    entries, config = (doc, {}) if isinstance(doc, list) else (doc.get("entries"), doc.get("config") or {})
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: manifest needs a list of entries")
    seen = set()
    for k, e in enumerate(entries):
        for key in ("video_id", "path"):
            if key not in e:
                raise ConfigError(f"{path}: entry {k} lacks {key!r}")
        if e["video_id"] in seen:
            raise ConfigError(f"{path}: duplicate video_id {e['video_id']!r}")
        seen.add(e["video_id"])
        for key in ("path", "ref_path"):
            if e.get(key) and not Path(e[key]).is_absolute():
                e[key] = str(path.parent / e[key])
    return entries, config


def resolve_config(args, manifest_config=None) -> TransformConfig:
    """flag > config file > manifest config > defaults."""
    merged = dict(manifest_config or {})
    if getattr(args, "config", None):
        with open(args.config) as fh:
            merged.update(json.load(fh))
    cfg = TransformConfig.from_dict(merged).with_overrides(
        patch_size=args.patch_size, delta=args.delta, noise_sigma=args.noise_sigma, seed=args.seed)
    if getattr(args, "no_noise", False):
        cfg = cfg.with_overrides(noise_enabled=False)
    return cfg


def _load(entry, which="path"):
    return load_video(entry[which], entry.get("width"), entry.get("height"), entry.get("pixfmt"))


def _nr_job(job):
    entry, cfg, scale_mode = job
    try:
        return video_features(_load(entry), cfg, scale_mode=scale_mode), "ok"
    except (HdrmaxError, OSError, ValueError) as exc:
        return None, f"error: {type(exc).__name__}: {exc}"


def _fr_job(job):
    entry, cfg, groups = job
    try:
        if not entry.get("ref_path"):
            raise ConfigError("entry has no ref_path")
        return fr_feature_row(_load(entry, "ref_path"), _load(entry), cfg, groups), "ok"
    except (HdrmaxError, OSError, ValueError) as exc:
        return None, f"error: {type(exc).__name__}: {exc}"


def _run_jobs(fn, jobs, n_workers):
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, jobs))  # map keeps manifest order


def read_table(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def _write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _report_failures(ids, statuses):
    bad = [(v, s) for v, s in zip(ids, statuses) if s != "ok"]
    for v, s in bad:
        log.error("%s: %s", v, s)
    return 0 if not bad else 1


def cmd_extract_nr(args) -> int:
    entries, mcfg = load_manifest(args.manifest)
    cfg = resolve_config(args, mcfg)
    results = _run_jobs(_nr_job, [(e, cfg, args.scale_mode) for e in entries], args.jobs)
    extra_cols, extra = [], {}
    if args.extra_features:
        header, rows = read_table(args.extra_features)
        extra_cols = [c for c in header if c != "video_id"]
        clash = set(extra_cols) & (set(CSV_FEATURE_COLUMNS) | set(NR_PROVENANCE))
        if clash:
            raise DataError(f"extra feature columns clash with built-in names: {sorted(clash)}")
        extra = {r["video_id"]: r for r in rows}
    out, statuses = [], []
    for e, (feats, status) in zip(entries, results):
        vid = e["video_id"]
        if status == "ok" and extra and vid not in extra:
            status = "error: no row in extra features"
        feats_out = list(feats) if status == "ok" else [""] * len(CSV_FEATURE_COLUMNS)
        ext = [extra[vid][c] for c in extra_cols] if status == "ok" and extra else [""] * len(extra_cols)
        out.append([vid, *feats_out, *ext, cfg.delta, cfg.patch_size, cfg.effective_sigma, cfg.seed, status])
        statuses.append(status)
    _write_table(args.out, ["video_id", *CSV_FEATURE_COLUMNS, *extra_cols, *NR_PROVENANCE], out)
    return _report_failures([e["video_id"] for e in entries], statuses)


def cmd_extract_fr(args) -> int:
    entries, mcfg = load_manifest(args.manifest)
    cfg = resolve_config(args, mcfg).with_overrides(noise_enabled=False)
    groups = tuple(g.strip() for g in args.features.split(",") if g.strip())
    unknown = set(groups) - set(FEATURE_GROUP_ORDER)
    if unknown:
        raise ConfigError(f"unknown --features groups: {sorted(unknown)}")
    cols = [c for g in FEATURE_GROUP_ORDER if g in groups for c in CLASSICAL_GROUPS[g]]
    results = _run_jobs(_fr_job, [(e, cfg, groups) for e in entries], args.jobs)
    out, statuses = [], []
    for e, (row, status) in zip(entries, results):
        vals = [row[c] for c in cols] if status == "ok" else [""] * len(cols)
        out.append([e["video_id"], *vals, cfg.delta, cfg.patch_size, status])
        statuses.append(status)
    _write_table(args.out, ["video_id", *cols, *FR_PROVENANCE], out)
    return _report_failures([e["video_id"] for e in entries], statuses)


def load_features(path) -> tuple[list[str], dict]:
    """video_id -> feature vector, from every column that isn't an id or provenance."""
    header, rows = read_table(path)
    if "video_id" not in header:
        raise DataError(f"{path}: no video_id column")
    cols = [c for c in header if c not in NON_FEATURE_COLUMNS]
    feats = {}
    for r in rows:
        if r.get("status", "ok") != "ok":
            raise DataError(f"{path}: video {r['video_id']!r} has status {r['status']!r}")
        try:
            feats[r["video_id"]] = np.array([float(r[c]) for c in cols])
        except ValueError as exc:
            raise DataError(f"{path}: video {r['video_id']!r}: {exc}") from None
    return cols, feats


def load_scores(path) -> tuple[dict, dict]:
    _, rows = read_table(path)
    try:
        mos = {r["video_id"]: float(r["mos"]) for r in rows}
        content = {r["video_id"]: r.get("content_id") or r["video_id"] for r in rows}
    except KeyError as exc:
        raise DataError(f"{path}: missing column {exc}") from None
    return mos, content


def _grid(args) -> Grid:
    return Grid(C=tuple(args.C), gamma=tuple(args.gamma), epsilon=args.epsilon, folds=args.folds)


def cmd_train(args) -> int:
    _, feats = load_features(args.features)
    mos, _ = load_scores(args.scores)
    missing = [v for v in mos if v not in feats]
    if missing:
        raise DataError(f"no features for video {missing[0]!r}")
    ids = list(mos)
    model = train_svr(np.array([feats[v] for v in ids]), np.array([mos[v] for v in ids]), _grid(args))
    model.save(args.out)
    log.info("trained: C=%g gamma=%g support=%d", model.C, model.gamma, len(model.dual_coef))
    return 0


def cmd_predict(args) -> int:
    model = SvrModel.load(args.model)
    _, feats = load_features(args.features)
    ids = list(feats)
    pred = predict(model, np.array([feats[v] for v in ids])) if ids else []
    _write_table(args.out, ["video_id", "predicted"], [[v, float(p)] for v, p in zip(ids, pred)])
    return 0


def cmd_evaluate(args) -> int:
    _, feats = load_features(args.features)
    mos, content = load_scores(args.scores)
    plan = make_splits(sorted(set(content.values())), args.ratio, args.splits, args.seed)
    report = evaluate(plan, feats, mos, content, _grid(args), logistic=args.logistic)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_dict(), fh, indent=1)
    print(report.summary())
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    (out / "videos").mkdir(parents=True, exist_ok=True)
    entries, scores = [], []
    pristine = {}
    suite = iter_suite(args.width, args.height, args.frames, args.bit_depth, args.seed,
                       patterns=args.patterns, kinds=args.kinds, variants=args.variants)
    for e, video in suite:
        rel = f"videos/{e.video_id}.y4m"
        write_y4m(out / rel, video)
        item = {"video_id": e.video_id, "content_id": e.content_id, "path": rel,
                "pattern": e.pattern, "kind": e.kind, "level": e.level, "severity": e.severity}
        if e.kind == "pristine":
            pristine[e.content_id] = rel
        item["ref_path"] = pristine[e.content_id]  # a pristine source is its own reference
        entries.append(item)
        scores.append([e.video_id, e.content_id, e.mos])
    with open(out / "manifest.json", "w") as fh:
        json.dump({"entries": entries}, fh, indent=1)
    _write_table(out / "scores.csv", ["video_id", "content_id", "mos"], scores)
    log.info("wrote %d videos to %s", len(entries), out)
    return 0


def _csv_list(kind, choices):
    def parse(s):
        vals = tuple(v.strip() for v in s.split(",") if v.strip())
        bad = [v for v in vals if v not in choices]
        if bad:
            raise argparse.ArgumentTypeError(f"unknown {kind}: {', '.join(bad)}")
        return vals
    return parse


def _floats(s):
    return [float(v) for v in s.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdrmax", description="HDRMAX video quality features and SVR evaluation")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def transform_flags(sp):
        sp.add_argument("--config", help="JSON transform config (flags override it)")
        sp.add_argument("--patch-size", type=int)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--noise-sigma", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    def grid_flags(sp):
        sp.add_argument("--C", type=_floats, default=list(DEFAULT_C), help="comma-separated C values")
        sp.add_argument("--gamma", type=_floats, default=list(DEFAULT_GAMMA), help="comma-separated kernel gammas")
        sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
        sp.add_argument("--folds", type=int, default=N_FOLDS)

    sp = sub.add_parser("extract-nr", help="72 NR features per video")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    transform_flags(sp)
    sp.add_argument("--no-noise", action="store_true")
    sp.add_argument("--scale-mode", choices=SCALE_MODES, default=SCALE_MODES[0])
    sp.add_argument("--extra-features", help="CSV keyed by video_id to column-join")
    sp.set_defaults(func=cmd_extract_nr)

    sp = sub.add_parser("extract-fr", help="full-reference features per (ref, dist) pair")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    transform_flags(sp)
    sp.add_argument("--features", default=",".join(FEATURE_GROUP_ORDER),
                    help="subset of psnr,ssim,msssim,hdrmax")
    sp.set_defaults(func=cmd_extract_fr)

    sp = sub.add_parser("train", help="grid-searched SVR on a feature CSV")
    sp.add_argument("--features", required=True)
    sp.add_argument("--scores", required=True)
    sp.add_argument("--out", required=True)
    grid_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="score a feature CSV with a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="median SRCC/PLCC over content-separated splits")
    sp.add_argument("--features", required=True)
    sp.add_argument("--scores", required=True)
    sp.add_argument("--out", help="write the per-split report as JSON")
    sp.add_argument("--splits", type=int, default=100)
    sp.add_argument("--ratio", type=float, default=0.8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--logistic", action="store_true", help="PLCC after a 4-parameter logistic fit")
    grid_flags(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("synth", help="write the synthetic distortion suite as Y4M")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--width", type=int, default=256)
    sp.add_argument("--height", type=int, default=256)
    sp.add_argument("--frames", type=int, default=30)
    sp.add_argument("--bit-depth", type=int, choices=(8, 10), default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--variants", type=int, default=1, help="seeded contents per pattern")
    sp.add_argument("--patterns", type=_csv_list("pattern", PATTERNS), default=PATTERNS)
    sp.add_argument("--kinds", type=_csv_list("kind", KINDS), default=KINDS)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (HdrmaxError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
