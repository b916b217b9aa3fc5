"""Command-line surface for the spotting pipeline.

Subcommands: ``synth`` (generate a synthetic corpus), ``prepare-tiles``
(training tiles + manifest), ``anchors`` (cluster prior sizes),
``detect`` (tile > backend > decode > merge > detections JSON),
``eval`` (detections vs ground truth), and ``selftest`` (oracle
round-trip check of the whole pipeline).

Every run writes ``config_used.json`` next to its outputs; feeding that
file back via ``--config`` reproduces the run.  JSON artifacts are
deterministic: keys are sorted and floats carry 6 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import backends, raster, synth
from .anchors import AnchorSet, cluster_anchors, load_anchors, save_anchors
from .geometry import BBox
from .head import Detection, HeadConfig
from .manifest import Manifest, load_manifest, save_manifest
from .merge import MergeConfig
from .metrics import EvalScene, evaluate
from .spotter import SymbolSpotter
from .tiling import Annotation, AugmentConfig, TilingConfig, extract_training_tiles

DEFAULT_ANCHORS = ((16.0, 16.0), (32.0, 32.0), (64.0, 64.0), (96.0, 96.0), (128.0, 128.0))


# ---------------------------------------------------------------------------
# Deterministic JSON


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def dump_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_round_floats(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Config resolution (flag > config file > default)


def _load_config(path):
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc


def _pick(flag, section: dict, key: str, default):
    if flag is not None:
        return flag
    return section.get(key, default)


def _tiling_from(ns, doc) -> TilingConfig:
    sec = doc.get("tiling") or {}
    return TilingConfig(
        alpha=float(_pick(getattr(ns, "alpha", None), sec, "alpha", 1.0)),
        net_size=int(_pick(getattr(ns, "net_size", None), sec, "net_size", 227)),
        stride=int(_pick(getattr(ns, "stride", None), sec, "stride", 50)),
        pad_value=int(sec.get("pad_value", 255)),
    )


def _merge_from(ns, doc) -> MergeConfig:
    sec = doc.get("merge") or {}
    return MergeConfig(
        overlap_threshold=float(_pick(getattr(ns, "overlap_threshold", None), sec, "overlap_threshold", 0.10)),
        score_tie_epsilon=float(sec.get("score_tie_epsilon", 0.05)),
        per_class=bool(sec.get("per_class", True)),
    )


def _oracle_from(ns, doc, seed: int) -> backends.OracleConfig:
    sec = doc.get("oracle") or {}
    return backends.OracleConfig(
        drop_prob=float(_pick(getattr(ns, "drop_prob", None), sec, "drop_prob", 0.0)),
        jitter_sigma=float(_pick(getattr(ns, "jitter_sigma", None), sec, "jitter_sigma", 0.0)),
        score_low=float(sec.get("score_low", 0.6)),
        score_high=float(sec.get("score_high", 0.95)),
        false_positive_rate=float(_pick(getattr(ns, "fp_rate", None), sec, "false_positive_rate", 0.0)),
        seed=int(_pick(getattr(ns, "seed", None), sec, "seed", seed)),
    )


def _head_from(ns, doc, tiling: TilingConfig, num_classes: int) -> HeadConfig:
    sec = doc.get("head") or {}
    anchors_path = _pick(getattr(ns, "anchors_file", None), doc.get("paths") or {}, "anchors_file", None)
    if anchors_path:
        anchors = load_anchors(anchors_path)
    elif sec.get("anchors"):
        anchors = AnchorSet(tuple((float(w), float(h)) for w, h in sec["anchors"]))
    else:
        anchors = AnchorSet(DEFAULT_ANCHORS)
    return HeadConfig(
        anchors=anchors,
        num_classes=num_classes,
        grid_h=int(sec.get("grid_h", 7)),
        grid_w=int(sec.get("grid_w", 7)),
        net_size=tiling.net_size,
    )


def _seed_from(ns, doc) -> int:
    return int(_pick(getattr(ns, "seed", None), doc, "seed", 0))


def _path_from(ns, doc, flag_name: str, key: str, required: bool = True):
    value = _pick(getattr(ns, flag_name, None), doc.get("paths") or {}, key, None)
    if required and not value:
        raise ValueError(f"missing required path: pass --{flag_name.replace('_', '-')} or set paths.{key} in the config")
    return value


def _echo(out_dir, payload) -> None:
    dump_json(os.path.join(out_dir, "config_used.json"), payload)


def _tiling_dict(cfg: TilingConfig) -> dict:
    return {"alpha": cfg.alpha, "net_size": cfg.net_size, "stride": cfg.stride, "pad_value": cfg.pad_value}


def _merge_dict(cfg: MergeConfig) -> dict:
    return {
        "overlap_threshold": cfg.overlap_threshold,
        "score_tie_epsilon": cfg.score_tie_epsilon,
        "per_class": cfg.per_class,
    }


def _oracle_dict(cfg: backends.OracleConfig) -> dict:
    return {
        "drop_prob": cfg.drop_prob,
        "jitter_sigma": cfg.jitter_sigma,
        "score_low": cfg.score_low,
        "score_high": cfg.score_high,
        "false_positive_rate": cfg.false_positive_rate,
        "seed": cfg.seed,
    }


def _head_dict(cfg: HeadConfig) -> dict:
    return {
        "grid_h": cfg.grid_h,
        "grid_w": cfg.grid_w,
        "net_size": cfg.net_size,
        "num_classes": cfg.num_classes,
        "anchors": [[w, h] for w, h in cfg.anchors.priors],
    }


def _stem(name: str) -> str:
    return os.path.splitext(os.path.basename(name))[0]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(ns) -> int:
    doc = _load_config(ns.config)
    sec = doc.get("synth") or {}
    seed = _seed_from(ns, doc)
    out_dir = _path_from(ns, doc, "out", "out")
    plans = int(_pick(ns.plans, sec, "plans", 4))
    width = int(_pick(ns.width, sec, "width", 768))
    height = int(_pick(ns.height, sec, "height", 768))
    noise = int(_pick(ns.noise_level, sec, "noise_level", 0))
    depth = int(_pick(ns.depth, sec, "room_split_depth", 3))
    density = tuple(int(v) for v in _pick(None, sec, "symbol_density", (1, 3)))
    classes = tuple(_pick(None, sec, "classes", synth.SYMBOL_CLASSES))

    os.makedirs(out_dir, exist_ok=True)
    manifest = Manifest(classes=list(synth.SYMBOL_CLASSES))
    for i in range(plans):
        spec = synth.PlanSpec(
            width=width,
            height=height,
            seed=seed + i,
            room_split_depth=depth,
            symbol_density=density,
            class_set=classes,
            noise_level=noise,
        )
        image, anns = synth.generate_plan(spec)
        name = f"plan_{i:03d}.pgm"
        raster.save(os.path.join(out_dir, name), image)
        for ann in anns:
            manifest.add(name, ann)
    save_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    _echo(
        out_dir,
        {
            "command": "synth",
            "seed": seed,
            "paths": {"out": out_dir},
            "synth": {
                "plans": plans,
                "width": width,
                "height": height,
                "noise_level": noise,
                "room_split_depth": depth,
                "symbol_density": list(density),
                "classes": list(classes),
            },
        },
    )
    print(f"wrote {plans} plans and {len(manifest.annotations)} annotations to {out_dir}")
    return 0


def cmd_prepare_tiles(ns) -> int:
    doc = _load_config(ns.config)
    seed = _seed_from(ns, doc)
    tiling = _tiling_from(ns, doc)
    manifest_path = _path_from(ns, doc, "manifest", "manifest")
    images_dir = _path_from(ns, doc, "images", "images")
    out_dir = _path_from(ns, doc, "out", "out")
    sec = doc.get("augment") or {}
    augment = AugmentConfig(
        hflip=bool(_pick(ns.hflip or None, sec, "hflip", False)),
        vflip=bool(_pick(ns.vflip or None, sec, "vflip", False)),
        rot90=bool(_pick(ns.rot90 or None, sec, "rot90", False)),
        scale_jitter=float(_pick(ns.scale_jitter, sec, "scale_jitter", 0.0)),
    )

    os.makedirs(out_dir, exist_ok=True)
    source = load_manifest(manifest_path)
    tile_manifest = Manifest(classes=list(source.classes))
    n_tiles = 0
    for image_name, anns in sorted(source.by_image().items()):
        plan = raster.load(os.path.join(images_dir, image_name))
        tiles = extract_training_tiles(plan, anns, tiling, augment=augment, seed=seed)
        for tile in tiles:
            key = backends.tile_id(_stem(image_name), tile.frame)
            if tile.tag:
                key = f"{key}_{tile.tag}"
            tile_name = f"{key}.pgm"
            raster.save(os.path.join(out_dir, tile_name), tile.image)
            for ann in tile.annotations:
                tile_manifest.add(tile_name, ann)
            n_tiles += 1
    save_manifest(os.path.join(out_dir, "manifest.json"), tile_manifest)
    _echo(
        out_dir,
        {
            "command": "prepare-tiles",
            "seed": seed,
            "tiling": _tiling_dict(tiling),
            "augment": {
                "hflip": augment.hflip,
                "vflip": augment.vflip,
                "rot90": augment.rot90,
                "scale_jitter": augment.scale_jitter,
            },
            "paths": {"manifest": manifest_path, "images": images_dir, "out": out_dir},
        },
    )
    print(f"wrote {n_tiles} training tiles to {out_dir}")
    return 0


def cmd_anchors(ns) -> int:
    doc = _load_config(ns.config)
    seed = _seed_from(ns, doc)
    tiling = _tiling_from(ns, doc)
    manifest_path = _path_from(ns, doc, "manifest", "manifest")
    out_path = _path_from(ns, doc, "out", "anchors_file")
    k = int(_pick(ns.num_anchors, doc.get("anchors") or {}, "k", 10))

    source = load_manifest(manifest_path)
    scale = tiling.side / tiling.net_size
    sizes = [(ann.box.w / scale, ann.box.h / scale) for _, ann in source.annotations if not ann.ignore]
    anchors = cluster_anchors(sizes, k=k, seed=seed)
    out_dir = os.path.dirname(os.path.abspath(out_path)) or "."
    os.makedirs(out_dir, exist_ok=True)
    save_anchors(out_path, anchors)
    _echo(
        out_dir,
        {
            "command": "anchors",
            "seed": seed,
            "tiling": _tiling_dict(tiling),
            "anchors": {"k": k},
            "paths": {"manifest": manifest_path, "anchors_file": out_path},
        },
    )
    print(f"wrote {len(anchors)} anchors to {out_path}")
    return 0


def _burn_boxes(image, dets) -> "raster.GrayImage":
    out = image
    for det in dets:
        out = raster.draw_rect_outline(
            out, int(round(det.box.x)), int(round(det.box.y)), int(round(det.box.w)), int(round(det.box.h))
        )
    return out


def cmd_detect(ns) -> int:
    doc = _load_config(ns.config)
    seed = _seed_from(ns, doc)
    tiling = _tiling_from(ns, doc)
    merge_cfg = _merge_from(ns, doc)
    manifest_path = _path_from(ns, doc, "manifest", "manifest")
    images_dir = _path_from(ns, doc, "images", "images")
    out_dir = _path_from(ns, doc, "out", "out")
    tensors_dir = _path_from(ns, doc, "tensors", "tensors", required=False)
    score_threshold = float(_pick(ns.score_threshold, doc, "score_threshold", 0.25))
    jobs = int(_pick(ns.jobs, doc, "jobs", 1))

    source = load_manifest(manifest_path)
    head_cfg = _head_from(ns, doc, tiling, num_classes=len(source.classes))
    oracle_cfg = None
    if tensors_dir:
        backend = backends.FileBackend(tensors_dir, head_cfg)
    else:
        oracle_cfg = _oracle_from(ns, doc, seed)
        backend = backends.OracleBackend(head_cfg, oracle_cfg)
    spotter = SymbolSpotter(
        backend=backend, tiling=tiling, merge=merge_cfg, score_threshold=score_threshold, n_jobs=jobs
    )

    os.makedirs(out_dir, exist_ok=True)
    records = []
    n_images = 0
    for image_name, anns in sorted(source.by_image().items()):
        plan = raster.load(os.path.join(images_dir, image_name))
        dets = spotter.predict(plan, anns, _stem(image_name), source.classes)
        n_images += 1
        for det in dets:
            records.append(
                {
                    "image": image_name,
                    "class_id": det.class_id,
                    "class_name": det.class_name,
                    "x": det.box.x,
                    "y": det.box.y,
                    "w": det.box.w,
                    "h": det.box.h,
                    "score": det.score,
                }
            )
        if ns.annotate:
            annotated_dir = os.path.join(out_dir, "annotated")
            os.makedirs(annotated_dir, exist_ok=True)
            annotated_name = _stem(image_name) + ".pgm"
            raster.save(os.path.join(annotated_dir, annotated_name), _burn_boxes(plan, dets))
    dump_json(os.path.join(out_dir, "detections.json"), records)
    _echo(
        out_dir,
        {
            "command": "detect",
            "seed": seed,
            "jobs": jobs,
            "score_threshold": score_threshold,
            "tiling": _tiling_dict(tiling),
            "merge": _merge_dict(merge_cfg),
            "head": _head_dict(head_cfg),
            "oracle": _oracle_dict(oracle_cfg) if oracle_cfg else None,
            "paths": {
                "manifest": manifest_path,
                "images": images_dir,
                "out": out_dir,
                "tensors": tensors_dir,
            },
        },
    )
    print(f"wrote {len(records)} detections over {n_images} plans to {out_dir}")
    return 0


def _load_detections(path):
    with open(path, "r", encoding="utf-8") as fh:
        records = json.load(fh)
    if not isinstance(records, list):
        raise ValueError(f"{path}: detections file must hold a JSON list")
    by_image: dict[str, list[Detection]] = {}
    for rec in records:
        det = Detection(
            class_id=int(rec["class_id"]),
            box=BBox(float(rec["x"]), float(rec["y"]), float(rec["w"]), float(rec["h"])),
            score=float(rec["score"]),
            class_name=str(rec.get("class_name", "")),
        )
        by_image.setdefault(str(rec["image"]), []).append(det)
    return by_image


def cmd_eval(ns) -> int:
    doc = _load_config(ns.config)
    manifest_path = _path_from(ns, doc, "manifest", "manifest")
    images_dir = _path_from(ns, doc, "images", "images")
    detections_path = _path_from(ns, doc, "detections", "detections")
    out_dir = _path_from(ns, doc, "out", "out")

    source = load_manifest(manifest_path)
    dets_by_image = _load_detections(detections_path)
    truths_by_image = source.by_image()
    scenes = []
    for image_name in sorted(set(dets_by_image) | set(truths_by_image)):
        plan = raster.load(os.path.join(images_dir, image_name))
        scenes.append(
            EvalScene(
                detections=tuple(dets_by_image.get(image_name, [])),
                truths=tuple(truths_by_image.get(image_name, [])),
                width=plan.width,
                height=plan.height,
            )
        )
    report = evaluate(scenes, source.classes)

    os.makedirs(out_dir, exist_ok=True)
    dump_json(os.path.join(out_dir, "report.json"), report.to_dict())
    table = report.to_table()
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    _echo(
        out_dir,
        {
            "command": "eval",
            "paths": {
                "manifest": manifest_path,
                "images": images_dir,
                "detections": detections_path,
                "out": out_dir,
            },
        },
    )
    print(table, end="")
    return 0


def cmd_selftest(ns) -> int:
    out_dir = ns.out
    seed = ns.seed if ns.seed is not None else 0
    os.makedirs(out_dir, exist_ok=True)
    corpus = os.path.join(out_dir, "corpus")
    detect_out = os.path.join(out_dir, "detect")
    eval_out = os.path.join(out_dir, "eval")

    synth_ns = argparse.Namespace(
        config=None, seed=seed, out=corpus, plans=3, width=640, height=640,
        noise_level=0, depth=2,
    )
    cmd_synth(synth_ns)
    detect_ns = argparse.Namespace(
        config=None, seed=seed, manifest=os.path.join(corpus, "manifest.json"),
        images=corpus, out=detect_out, tensors=None, score_threshold=None,
        jobs=None, alpha=None, net_size=None, stride=None, overlap_threshold=None,
        drop_prob=None, jitter_sigma=None, fp_rate=None, anchors_file=None, annotate=False,
    )
    cmd_detect(detect_ns)
    eval_ns = argparse.Namespace(
        config=None, manifest=os.path.join(corpus, "manifest.json"), images=corpus,
        detections=os.path.join(detect_out, "detections.json"), out=eval_out,
    )
    cmd_eval(eval_ns)

    # Round-trip checks: the noiseless oracle must reproduce the ground
    # truth exactly, with duplicates collapsed by the merge step.
    source = load_manifest(os.path.join(corpus, "manifest.json"))
    head_cfg = _head_from(argparse.Namespace(anchors_file=None), {}, TilingConfig(), len(source.classes))
    backend = backends.OracleBackend(head_cfg, backends.OracleConfig(seed=seed))
    spotter = SymbolSpotter(backend=backend)
    failures = 0

    def check(label: str, ok: bool) -> None:
        nonlocal failures
        print(f"selftest: {label}: {'ok' if ok else 'FAIL'}")
        if not ok:
            failures += 1

    for image_name, anns in sorted(source.by_image().items()):
        plan = raster.load(os.path.join(corpus, image_name))
        pre = spotter.detect_tiles(plan, anns, _stem(image_name), source.classes)
        post = spotter.predict(plan, anns, _stem(image_name), source.classes)
        check(f"{image_name} duplicates before merge ({len(pre)} > {len(anns)})", len(pre) > len(anns))
        check(f"{image_name} merged count matches truth ({len(post)} == {len(anns)})", len(post) == len(anns))

    with open(os.path.join(eval_out, "report.json"), "r", encoding="utf-8") as fh:
        report = json.load(fh)
    agg = report["aggregate"]
    check("AP50 == 1", agg["ap50"] == 1.0)
    check("AP75 == 1", agg["ap75"] == 1.0)
    check("mAP == 1", agg["map"] == 1.0)
    check("instance F == 1", report["instance"]["f_score"] == 1.0)
    check("pixel F == 1", report["pixel"]["f_score"] == 1.0)

    if failures:
        print(f"selftest: {failures} check(s) failed", file=sys.stderr)
        return 1
    print("selftest: all checks passed")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(p) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, default=None, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planspot", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic plan corpus with ground truth")
    _add_common(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--plans", type=int, default=None, help="number of plans")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--noise-level", dest="noise_level", type=int, default=None, choices=(0, 1, 2, 3))
    p.add_argument("--depth", type=int, default=None, help="room split depth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare-tiles", help="extract annotated training tiles")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--images")
    p.add_argument("--out")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--net-size", dest="net_size", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--hflip", action="store_true")
    p.add_argument("--vflip", action="store_true")
    p.add_argument("--rot90", action="store_true")
    p.add_argument("--scale-jitter", dest="scale_jitter", type=float, default=None)
    p.set_defaults(func=cmd_prepare_tiles)

    p = sub.add_parser("anchors", help="cluster symbol sizes into prior anchors")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--out", help="anchor JSON file to write")
    p.add_argument("-k", "--num-anchors", dest="num_anchors", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--net-size", dest="net_size", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("detect", help="run the tiling pipeline over plans")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--images")
    p.add_argument("--out")
    p.add_argument("--tensors", help="directory of .rawpred tensors (file backend); omit for the oracle")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--net-size", dest="net_size", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--overlap-threshold", dest="overlap_threshold", type=float, default=None)
    p.add_argument("--score-threshold", dest="score_threshold", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None, help="tiles processed concurrently")
    p.add_argument("--anchors-file", dest="anchors_file", default=None)
    p.add_argument("--drop-prob", dest="drop_prob", type=float, default=None)
    p.add_argument("--jitter-sigma", dest="jitter_sigma", type=float, default=None)
    p.add_argument("--fp-rate", dest="fp_rate", type=float, default=None)
    p.add_argument("--annotate", action="store_true", help="write plans with detection boxes burned in")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against a manifest")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--images")
    p.add_argument("--detections")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", help="oracle round-trip check of the full pipeline")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except Exception as exc:
        print(f"planspot {ns.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
