"""Command-line entry point: ``comptrack {track,eval,synth,ablate}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from comptrack import motio
from comptrack.config import RunConfig
from comptrack.metrics import MetricsError, evaluate, format_table, write_csv
from comptrack.motio import DataError
from comptrack.pipeline import run_sequence

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

logger = logging.getLogger("comptrack")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        cfg.set(key.strip(), value)
    if getattr(args, "ct_stage", None):
        cfg.set("ct.stage", args.ct_stage)
    if getattr(args, "ct", None):
        cfg.run.ct_enabled = args.ct == "on"
    cfg.validate()
    return cfg


def _track_one(seq_dir, det_path, frames_dir, out_path, cfg: RunConfig, ct_enabled=None):
    seq_dir = Path(seq_dir)
    meta = motio.read_seqinfo(seq_dir / "seqinfo.ini")
    det_path = Path(det_path) if det_path else seq_dir / "det" / "det.txt"
    dets = motio.read_detections(det_path)
    emb_path = det_path.with_name("emb.txt")
    embeddings = motio.read_embeddings(emb_path) if emb_path.exists() else None
    loader = None
    if frames_dir:
        loader = lambda f: motio.load_frame(frames_dir, f)  # noqa: E731
    results, stats = run_sequence(dets, meta.seq_length, cfg, ct_enabled, loader,
                                  (meta.im_width, meta.im_height), embeddings, meta.name)
    gt_path = seq_dir / "gt" / "gt.txt"
    if gt_path.exists():
        stats.gt_boxes = sum(len(v) for v in motio.read_gt(gt_path).values())
    if out_path:
        motio.write_results(out_path, results)
    return results, stats


def _track_job(job):
    return _track_one(*job)[1]


def cmd_track(args) -> int:
    cfg = _load_config(args)
    frames = args.frames or cfg.io.frames_dir or None
    out = args.out or cfg.io.out_path or None
    det = args.det or cfg.io.det_path or None
    if len(args.seq_dir) == 1:
        _, stats = _track_one(args.seq_dir[0], det, frames, out, cfg)
        print(stats.summary())
        all_stats = [stats]
    else:
        if det or frames:
            raise UsageError("--det/--frames apply to a single sequence; multiple sequences use their own det/ and img1/")
        if not out:
            raise UsageError("--out must name a directory when tracking several sequences")
        jobs = []
        for seq in args.seq_dir:
            meta = motio.read_seqinfo(Path(seq) / "seqinfo.ini")
            jobs.append((seq, None, str(Path(seq) / meta.image_dir), str(Path(out) / f"{meta.name}.txt"), cfg))
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            all_stats = list(pool.map(_track_job, jobs))
        for s in all_stats:
            print(s.summary())
            print()
    if args.stats:
        _write_stats(args.stats, all_stats)
    return EXIT_OK


def _write_stats(path, stats):
    rows = [s.as_row() for s in stats]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _num_frames(args, gt_path) -> int | None:
    if args.seqinfo:
        return motio.read_seqinfo(args.seqinfo).seq_length
    guess = Path(gt_path).parent.parent / "seqinfo.ini"
    if guess.exists():
        return motio.read_seqinfo(guess).seq_length
    return None


def cmd_eval(args) -> int:
    gt = motio.read_gt(args.gt)
    results = motio.read_results(args.results)
    report = evaluate(gt, results, args.iou, _num_frames(args, args.gt))
    name = Path(args.results).stem
    print(format_table([(name, report)]))
    if args.csv:
        write_csv(args.csv, [(name, report)])
    return EXIT_OK


def cmd_synth(args) -> int:
    from comptrack.synthgen import generate, load_scenario

    spec = load_scenario(args.spec)
    seq = generate(spec)
    out = seq.write(args.out_dir)
    # self-check: everything written must read back
    motio.read_seqinfo(out / "seqinfo.ini")
    motio.read_gt(out / "gt" / "gt.txt")
    motio.read_detections(out / "det" / "det.txt")
    if motio.load_frame(out / seq.meta.image_dir, 1) is None:
        raise DataError(f"frame 1 missing under {out}")
    print(f"wrote {spec.frames} frames, {len(spec.objects)} objects to {out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    from comptrack.plots import plot_ablation, plot_compensation

    cfg = _load_config(args)
    seq_dir = Path(args.seq_dir)
    meta = motio.read_seqinfo(seq_dir / "seqinfo.ini")
    frames = args.frames or str(seq_dir / meta.image_dir)
    gt = motio.read_gt(seq_dir / "gt" / "gt.txt")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows, stats = [], []
    for label, enabled, stage in (("baseline", False, cfg.ct.stage), ("mc", True, "mc"), ("mc+os", True, "mc+os")):
        cfg.ct.stage = stage
        results, s = _track_one(seq_dir, args.det, frames, out_dir / f"{label.replace('+', '_')}.txt", cfg, enabled)
        s.name = label
        rows.append((label, evaluate(gt, results, num_frames=meta.seq_length)))
        stats.append(s)

    print(format_table(rows))
    write_csv(out_dir / "metrics.csv", rows)
    _write_stats(out_dir / "stats.csv", stats)
    plot_ablation(rows, out_dir / "ablation.png")
    plot_compensation(stats, out_dir / "compensation.png")
    print(f"reports written to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="comptrack", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config value, e.g. ct.C_F=20 (repeatable)")
        sp.add_argument("--ct-stage", choices=["mc", "mc-only", "mc+os"])
        sp.add_argument("--det", help="detections file (default SEQ/det/det.txt)")
        sp.add_argument("--frames", help="frame image directory; without it appearance checks follow the missing-image policy")

    t = sub.add_parser("track", help="run the tracker on one or more MOT sequences")
    t.add_argument("seq_dir", nargs="+")
    common(t)
    t.add_argument("--ct", choices=["on", "off"])
    t.add_argument("--out", help="results file (or directory for several sequences)")
    t.add_argument("--stats", help="write compensation statistics as CSV")
    t.add_argument("--jobs", type=int, default=None, help="parallel workers for several sequences")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="CLEAR MOT / IDF1 evaluation of a results file")
    e.add_argument("gt")
    e.add_argument("results")
    e.add_argument("--csv", help="also write the report as CSV")
    e.add_argument("--seqinfo", help="seqinfo.ini giving the sequence length")
    e.add_argument("--iou", type=float, default=0.5)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate a synthetic MOT sequence from a scenario file")
    s.add_argument("spec")
    s.add_argument("out_dir")
    s.set_defaults(func=cmd_synth)

    a = sub.add_parser("ablate", help="baseline vs MC vs MC+OS with metrics, stats and figures")
    a.add_argument("seq_dir")
    a.add_argument("out_dir")
    common(a)
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"comptrack: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MetricsError, OSError, ValueError) as e:
        print(f"comptrack: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
