"""CLEAR MOT and identity (IDF1) metrics over per-frame box dictionaries.

Ground truth and hypotheses are ``{frame: [(id, BBox, ...), ...]}``; any
trailing tuple fields (visibility, confidence) are ignored.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import asdict, dataclass, fields

import numpy as np

from comptrack import assignment
from comptrack.geometry import iou, iou_matrix


class MetricsError(ValueError):
    pass


@dataclass
class MetricsReport:
    MOTA: float
    MOTP: float
    IDF1: float
    MT: int
    ML: int
    MT_pct: float
    ML_pct: float
    FP: int
    FN: int
    IDSW: int
    Frag: int
    FAF: float
    IDTP: int = 0
    IDFP: int = 0
    IDFN: int = 0
    num_gt: int = 0
    num_gt_ids: int = 0
    num_frames: int = 0

    def as_dict(self) -> dict:
        return asdict(self)

    def to_csv(self, name: str = "") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = [f.name for f in fields(self)]
        w.writerow(["name"] + cols)
        w.writerow([name] + [_cell(getattr(self, c)) for c in cols])
        return buf.getvalue()


def _cell(v):
    return f"{v:.6f}" if isinstance(v, float) else v


DISPLAY = [("MOTA", "{:.1%}"), ("IDF1", "{:.1%}"), ("MOTP", "{:.3f}"), ("MT", "{}"), ("ML", "{}"),
           ("FP", "{}"), ("FN", "{}"), ("IDSW", "{}"), ("Frag", "{}"), ("FAF", "{:.3f}")]


def format_table(rows: list[tuple[str, MetricsReport]]) -> str:
    """Aligned plain-text table, one row per named report."""
    header = ["name"] + [k for k, _ in DISPLAY]
    body = [[name] + [fmt.format(getattr(r, k)) for k, fmt in DISPLAY] for name, r in rows]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(header, widths))]
    lines += ["  ".join(str(c).rjust(w) for c, w in zip(row, widths)) for row in body]
    return "\n".join(lines)


def write_csv(path, rows: list[tuple[str, MetricsReport]]) -> None:
    cols = [f.name for f in fields(MetricsReport)]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["name"] + cols)
        for name, r in rows:
            w.writerow([name] + [_cell(getattr(r, c)) for c in cols])


def _frames(gt, results, num_frames):
    if not any(gt.values()):
        raise MetricsError("ground truth is empty, MOTA is undefined")
    last_gt = max(f for f, rows in gt.items() if rows)
    n = num_frames if num_frames is not None else last_gt
    if last_gt > n:
        raise MetricsError(f"ground truth has frame {last_gt} beyond the sequence length {n}")
    res_frames = [f for f, rows in results.items() if rows]
    if res_frames and max(res_frames) > n:
        raise MetricsError(f"results have frame {max(res_frames)} beyond the sequence length {n}")
    return n


def evaluate_clear(gt, results, iou_gate: float = 0.5, num_frames: int | None = None) -> dict:
    """CLEAR MOT counts with match continuity.

    A ground-truth object keeps the hypothesis it was last matched to when
    that hypothesis is present and still overlaps by at least ``iou_gate``;
    the rest is matched by minimum-cost assignment on ``1 - IoU``.
    """
    n_frames = _frames(gt, results, num_frames)
    last_match: dict[int, int] = {}
    history: dict[int, list[bool]] = defaultdict(list)
    fp = fn = idsw = n_gt = 0
    iou_sum = 0.0
    n_match = 0

    for frame in range(1, n_frames + 1):
        gts = {row[0]: row[1] for row in gt.get(frame, [])}
        hyps = {row[0]: row[1] for row in results.get(frame, [])}
        n_gt += len(gts)
        pairs: dict[int, int] = {}
        used = set()
        for gid, hid in last_match.items():
            if gid in gts and hid in hyps and hid not in used:
                if iou(gts[gid], hyps[hid]) >= iou_gate:
                    pairs[gid] = hid
                    used.add(hid)

        rest_g = [g for g in gts if g not in pairs]
        rest_h = [h for h in hyps if h not in used]
        if rest_g and rest_h:
            cost = 1.0 - iou_matrix([gts[g] for g in rest_g], [hyps[h] for h in rest_h])
            matches, _, _ = assignment.solve(cost, 1.0 - iou_gate)
            for r, c in matches:
                gid, hid = rest_g[r], rest_h[c]
                if gid in last_match and last_match[gid] != hid:
                    idsw += 1
                pairs[gid] = hid

        for gid, hid in pairs.items():
            last_match[gid] = hid
            iou_sum += iou(gts[gid], hyps[hid])
        n_match += len(pairs)
        fp += len(hyps) - len(pairs)
        fn += len(gts) - len(pairs)
        for gid in gts:
            history[gid].append(gid in pairs)

    frag = mt = ml = 0
    for flags in history.values():
        tracked = np.asarray(flags)
        ratio = tracked.mean()
        if ratio >= 0.8:
            mt += 1
        if ratio <= 0.2:
            ml += 1
        idx = np.flatnonzero(tracked)
        if len(idx):
            span = tracked[idx[0]:idx[-1] + 1]
            # interruptions: tracked -> untracked inside the tracked span
            frag += int(np.sum(span[:-1] & ~span[1:]))

    return dict(
        MOTA=1.0 - (fn + fp + idsw) / n_gt,
        MOTP=iou_sum / n_match if n_match else 0.0,
        FP=fp, FN=fn, IDSW=idsw, Frag=frag, MT=mt, ML=ml,
        num_gt=n_gt, num_gt_ids=len(history), num_frames=n_frames,
        FAF=fp / n_frames, num_matches=n_match,
    )


def evaluate_id(gt, results, iou_gate: float = 0.5, num_frames: int | None = None) -> dict:
    """Identity-level precision/recall via a one-to-one GT-to-hypothesis trajectory matching."""
    n_frames = _frames(gt, results, num_frames)
    gt_len: dict[int, int] = defaultdict(int)
    hyp_len: dict[int, int] = defaultdict(int)
    overlap: dict[tuple[int, int], int] = defaultdict(int)
    for frame in range(1, n_frames + 1):
        g_rows = gt.get(frame, [])
        h_rows = results.get(frame, [])
        for row in g_rows:
            gt_len[row[0]] += 1
        for row in h_rows:
            hyp_len[row[0]] += 1
        if g_rows and h_rows:
            m = iou_matrix([r[1] for r in g_rows], [r[1] for r in h_rows]) >= iou_gate
            for i, j in zip(*np.nonzero(m)):
                overlap[(g_rows[i][0], h_rows[j][0])] += 1

    total_gt = sum(gt_len.values())
    total_hyp = sum(hyp_len.values())
    idtp = 0
    if overlap:
        gids = sorted(gt_len)
        hids = sorted(hyp_len)
        gi = {g: i for i, g in enumerate(gids)}
        hi = {h: j for j, h in enumerate(hids)}
        agree = np.zeros((len(gids), len(hids)))
        for (g, h), c in overlap.items():
            agree[gi[g], hi[h]] = c
        rows, cols = assignment.min_cost_assignment(agree.max() - agree)
        idtp = int(agree[rows, cols].sum())
    idfn = total_gt - idtp
    idfp = total_hyp - idtp
    denom = 2 * idtp + idfp + idfn
    return dict(IDF1=2 * idtp / denom if denom else 0.0, IDTP=idtp, IDFP=idfp, IDFN=idfn)


def evaluate(gt, results, iou_gate: float = 0.5, num_frames: int | None = None) -> MetricsReport:
    clear = evaluate_clear(gt, results, iou_gate, num_frames)
    ident = evaluate_id(gt, results, iou_gate, num_frames)
    n_ids = clear["num_gt_ids"]
    return MetricsReport(
        MOTA=clear["MOTA"], MOTP=clear["MOTP"], IDF1=ident["IDF1"],
        MT=clear["MT"], ML=clear["ML"],
        MT_pct=clear["MT"] / n_ids if n_ids else 0.0,
        ML_pct=clear["ML"] / n_ids if n_ids else 0.0,
        FP=clear["FP"], FN=clear["FN"], IDSW=clear["IDSW"], Frag=clear["Frag"],
        FAF=clear["FAF"], IDTP=ident["IDTP"], IDFP=ident["IDFP"], IDFN=ident["IDFN"],
        num_gt=clear["num_gt"], num_gt_ids=n_ids, num_frames=clear["num_frames"],
    )
