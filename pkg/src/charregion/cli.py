"""Command-line driver.

Exit codes: 0 success, 2 malformed input, 3 output cannot be written.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .config import load_config
from .errors import FormatError, InvalidParameter
from .evaluate import evaluate_dataset
from .formats import ImageAnnotation, Record
from .labelgen import make_gaussian_template, render_link_gt, render_word_maps
from .overlay import save_overlay
from .postproc import Thresholds, detect
from .weaksup import WordAnnotation, build_pseudo_gt

log = logging.getLogger("charregion")

EXIT_FORMAT = 2
EXIT_OUTPUT = 3


class OutputError(Exception):
    pass


def _pool_map(fn, items, workers):
    """Ordered map; results come back in input order for any worker count."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _prepare_out_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write(fn, path, *args, **kwargs):
    try:
        fn(path, *args, **kwargs)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _read_annotations(directory):
    directory = Path(directory)
    if directory.is_file():
        return [formats.read_annotation(directory)]
    if not directory.is_dir():
        raise FormatError("no such annotation file or directory", str(directory))
    return [formats.read_annotation(p) for p in sorted(directory.glob("*.json"))]


def _require_canvas(ann):
    if ann.width is None or ann.height is None:
        raise FormatError("'width' and 'height' are required here", f"{ann.name}.json")


# --- labelgen ---------------------------------------------------------------

def _labelgen_job(job):
    ann, cfg, with_link = job
    template = make_gaussian_template(cfg.template_side, cfg.sigma_ratio)
    words = [r.chars for r in ann.records if r.chars]
    region, affinity, skipped = render_word_maps(words, template, ann.width, ann.height)
    link = None
    if with_link:
        polys = [r.points for r in ann.records if not r.is_quad]
        link = render_link_gt(polys, ann.width, ann.height, cfg.link_width_ratio)
    return region, affinity, link, skipped, sum(len(w) for w in words)


def cmd_labelgen(args, cfg):
    anns = _read_annotations(args.annotations)
    for ann in anns:
        _require_canvas(ann)
        for i, r in enumerate(ann.records):
            if r.is_quad and not r.dont_care and not r.chars:
                raise FormatError("character boxes ('chars') are required for label generation",
                                  f"{ann.name}.json:words[{i}]")
    out = _prepare_out_dir(args.out_dir)
    results = _pool_map(_labelgen_job, [(a, cfg, args.link) for a in anns], cfg.workers)
    for ann, (region, affinity, link, skipped, n_chars) in zip(anns, results):
        _write(formats.write_score_map, out / f"{ann.name}.region.csm", region)
        _write(formats.write_score_map, out / f"{ann.name}.affinity.csm", affinity)
        if link is not None:
            _write(formats.write_score_map, out / f"{ann.name}.link.csm", link)
        log.info("%s: %d chars, %d degenerate boxes skipped", ann.name, n_chars, skipped)
    return 0


# --- pseudo-gt --------------------------------------------------------------

def _pseudo_words(ann):
    words = []
    for i, r in enumerate(ann.records):
        where = f"{ann.name}.json:words[{i}]"
        if not r.is_quad:
            raise FormatError("pseudo-GT needs quad word annotations", where)
        if not r.dont_care and not (r.transcription and r.transcription.strip()):
            raise FormatError("a transcription is required unless dont_care is set", where)
        words.append(WordAnnotation(r.points, r.transcription, r.dont_care))
    return words


def _pseudo_job(job):
    ann, words, region_pred, crops, cfg = job
    template = make_gaussian_template(cfg.template_side, cfg.sigma_ratio)
    gt = build_pseudo_gt(words, ann.width, ann.height, region_pred=region_pred, crops=crops,
                         template=template, crop_height=cfg.crop_height,
                         marker_threshold=cfg.marker_threshold, region_floor=cfg.region_floor)
    manifest = []
    for i, (w, r) in enumerate(zip(words, gt.results)):
        manifest.append({
            "image": ann.name,
            "word": i,
            "dont_care": w.dont_care,
            "l": w.length,
            "l_c": r.split_count,
            "s_conf": r.raw_confidence,
            "fallback": r.fallback,
            "confidence": r.confidence,
        })
    return gt.region, gt.affinity, gt.confidence, manifest


def cmd_pseudo_gt(args, cfg):
    anns = _read_annotations(args.annotations)
    pred_dir = Path(args.predictions)
    jobs = []
    for ann in anns:
        _require_canvas(ann)
        words = _pseudo_words(ann)
        crops = [None] * len(words)
        for i in range(len(words)):
            p = pred_dir / f"{ann.name}.word{i}.csm"
            if p.exists():
                crops[i] = formats.read_score_map(p)
        full = pred_dir / f"{ann.name}.region.csm"
        region_pred = formats.read_score_map(full) if full.exists() else None
        missing = [i for i, (w, c) in enumerate(zip(words, crops)) if c is None and not w.dont_care]
        if missing and region_pred is None:
            raise FormatError(f"no prediction for words {missing}: need {full.name} or per-word crops",
                              str(pred_dir))
        if region_pred is not None and region_pred.shape != (ann.height, ann.width):
            raise FormatError(f"prediction is {region_pred.shape[1]}x{region_pred.shape[0]}, "
                              f"annotation says {ann.width}x{ann.height}", str(full))
        jobs.append((ann, words, region_pred, crops, cfg))

    out = _prepare_out_dir(args.out_dir)
    results = _pool_map(_pseudo_job, jobs, cfg.workers)
    manifest = []
    for ann, (region, affinity, conf, entries) in zip(anns, results):
        _write(formats.write_score_map, out / f"{ann.name}.region.csm", region)
        _write(formats.write_score_map, out / f"{ann.name}.affinity.csm", affinity)
        _write(formats.write_score_map, out / f"{ann.name}.confidence.csm", conf)
        manifest.extend(entries)
        n_fb = sum(e["fallback"] for e in entries)
        log.info("%s: %d words, %d fallback", ann.name, len(entries), n_fb)
    text = json.dumps({"words": manifest}, indent=1) + "\n"
    _write(lambda p, t: Path(p).write_text(t), out / "manifest.json", text)
    return 0


# --- detect -----------------------------------------------------------------

def _detect_job(job):
    name, S_r, S_a, cfg = job
    t = Thresholds(cfg.tau_r, cfg.tau_a)
    dets = detect(S_r, S_a, t, mode=cfg.mode, merge_lines=cfg.merge_lines,
                  min_component_px=cfg.min_component_px, expand_ratio=cfg.box_expand_ratio,
                  outer_extend_ratio=cfg.outer_extend_ratio, gap_ratio=cfg.gap_ratio)
    return [np.asarray(d) for d in dets]


def cmd_detect(args, cfg):
    maps_dir = Path(args.maps)
    if not maps_dir.is_dir():
        raise FormatError("no such score-map directory", str(maps_dir))
    second = "link" if args.use_link else "affinity"
    jobs = []
    for region_path in sorted(maps_dir.glob("*.region.csm")):
        name = region_path.name[: -len(".region.csm")]
        other = maps_dir / f"{name}.{second}.csm"
        if not other.exists():
            raise FormatError(f"missing {other.name}", str(maps_dir))
        S_r = formats.read_score_map(region_path)
        S_a = formats.read_score_map(other)
        if S_r.shape != S_a.shape:
            raise FormatError("region and affinity maps differ in size", str(other))
        jobs.append((name, S_r, S_a, cfg))

    out = _prepare_out_dir(args.out_dir)
    results = _pool_map(_detect_job, jobs, cfg.workers)
    for (name, S_r, S_a, _), dets in zip(jobs, results):
        h, w = S_r.shape
        ann = ImageAnnotation(name, w, h, [Record(d) for d in dets])
        _write(formats.write_annotation, out / f"{name}.json", ann, ndigits=3)
        if args.overlay:
            _write(save_overlay, out / f"{name}.png", S_r, S_a, dets)
        log.info("%s: %d detections", name, len(dets))
    return 0


# --- eval -------------------------------------------------------------------

def cmd_eval(args, cfg):
    gts = {a.name: a for a in _read_annotations(args.gt)}
    dets = {a.name: a for a in _read_annotations(args.det)}
    if Path(args.gt).is_file() and Path(args.det).is_file():
        (g,), (d,) = gts.values(), dets.values()
        dets = {g.name: d}
    per_image = {}
    for name, g in gts.items():
        d = dets.get(name)
        per_image[name] = ([(r.points, r.dont_care) for r in g.records],
                           [r.points for r in d.records] if d else [])
    extra = sorted(set(dets) - set(gts))
    if extra:
        raise FormatError(f"detections for images without ground truth: {extra}", str(args.det))
    summary = evaluate_dataset(per_image, cfg.iou_threshold)
    text = json.dumps(summary, indent=1) + "\n"
    if args.out:
        _write(lambda p, t: Path(p).write_text(t), args.out, text)
    sys.stdout.write(text)
    log.info("recall %.4f precision %.4f hmean %.4f", summary["recall"], summary["precision"],
             summary["hmean"])
    return 0


# --- synth ------------------------------------------------------------------

def cmd_synth(args, cfg):
    from .synth import arc_scene, random_scene

    out = _prepare_out_dir(args.out_dir)
    rng = np.random.default_rng(args.seed)
    for i in range(args.count):
        scene = arc_scene() if args.arc else random_scene(rng)
        records = []
        for w in scene.words:
            pts = w.polygon if (args.arc and w.polygon is not None) else w.quad
            records.append(Record(pts, w.transcription, False, chars=w.chars))
        ann = ImageAnnotation(f"synth_{i:04d}", scene.width, scene.height, records)
        _write(formats.write_annotation, out / f"{ann.name}.json", ann, ndigits=4)
    log.info("wrote %d synthetic annotations to %s", args.count, out)
    return 0


def cmd_dump_config(args, cfg):
    sys.stdout.write(cfg.to_text())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="charregion",
                                description="Character-region heatmap labels, pseudo-GT and detection.")
    p.add_argument("--config", help="key = value config file (default: $CHARREGION_CONFIG)")
    p.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    p.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command")

    def workers(sp):
        sp.add_argument("--workers", type=int, help="parallel worker processes")

    sp = sub.add_parser("labelgen", help="render region/affinity ground truth from character boxes")
    sp.add_argument("annotations", help="annotation .json file or directory")
    sp.add_argument("out_dir")
    sp.add_argument("--sigma-ratio", type=float)
    sp.add_argument("--template-side", type=int)
    sp.add_argument("--link", action="store_true", help="also render link-score lines from polygons")
    sp.add_argument("--link-width-ratio", type=float)
    workers(sp)
    sp.set_defaults(func=cmd_labelgen)

    sp = sub.add_parser("pseudo-gt", help="pseudo ground truth from word annotations and predictions")
    sp.add_argument("annotations")
    sp.add_argument("predictions", help="directory with <image>.region.csm or <image>.word<k>.csm")
    sp.add_argument("out_dir")
    sp.add_argument("--crop-height", type=int)
    sp.add_argument("--marker-threshold", type=float)
    sp.add_argument("--region-floor", type=float)
    sp.add_argument("--sigma-ratio", type=float)
    sp.add_argument("--template-side", type=int)
    workers(sp)
    sp.set_defaults(func=cmd_pseudo_gt)

    sp = sub.add_parser("detect", help="turn score maps into word boxes or polygons")
    sp.add_argument("maps", help="directory with <image>.region.csm and <image>.affinity.csm")
    sp.add_argument("out_dir")
    sp.add_argument("--tau-r", type=float)
    sp.add_argument("--tau-a", type=float)
    sp.add_argument("--mode", choices=("quad", "poly"))
    sp.add_argument("--merge-lines", action="store_const", const=True)
    sp.add_argument("--gap-ratio", type=float)
    sp.add_argument("--min-component-px", type=int)
    sp.add_argument("--box-expand-ratio", type=float)
    sp.add_argument("--outer-extend-ratio", type=float)
    sp.add_argument("--use-link", action="store_true", help="read <image>.link.csm instead of affinity")
    sp.add_argument("--overlay", action="store_true", help="also write <image>.png")
    workers(sp)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("eval", help="word-level IoU recall/precision/h-mean")
    sp.add_argument("gt")
    sp.add_argument("det")
    sp.add_argument("--iou", dest="iou_threshold", type=float)
    sp.add_argument("--out", help="also write the JSON summary here")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("synth", help="write synthetic annotations with character boxes")
    sp.add_argument("out_dir")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--arc", action="store_true", help="one curved word per image, polygon annotations")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("dump-config", help="print the effective config")
    sp.set_defaults(func=cmd_dump_config)
    return p


_OVERRIDES = ("sigma_ratio", "template_side", "link_width_ratio", "crop_height", "marker_threshold",
              "region_floor", "tau_r", "tau_a", "mode", "merge_lines", "gap_ratio", "min_component_px",
              "box_expand_ratio", "outer_extend_ratio", "iou_threshold", "workers")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        cfg = load_config(args.config)
        cfg = cfg.override(**{k: getattr(args, k, None) for k in _OVERRIDES})
        if args.dump_config:
            return cmd_dump_config(args, cfg)
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_FORMAT
        return args.func(args, cfg)
    except (FormatError, InvalidParameter) as exc:
        log.error("error: %s", exc)
        return EXIT_FORMAT
    except OutputError as exc:
        log.error("error: %s", exc)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
