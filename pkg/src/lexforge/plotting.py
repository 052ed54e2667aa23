"""Report figures.

Every ``plot_*`` function writes ``<stem>.png`` and a tab-separated
``<stem>.tsv`` holding the plotted numbers, and returns both paths.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _figure(width=6.0, height=None):
    if height is None:
        height = width * 0.618
    return plt.subplots(figsize=(width, height))


def _save(fig, out_dir: str | os.PathLike, stem: str, header: list[str], rows: list[list]):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    png, tsv = out / f"{stem}.png", out / f"{stem}.tsv"
    # no Software tag: repeated runs must produce identical PNG bytes
    fig.savefig(png, metadata={"Software": None})
    plt.close(fig)
    with open(tsv, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return png, tsv


def plot_corpus_stats(stats_json: dict, out_dir, stem="corpus_stats"):
    rows = [[k, v["doc_count"], v["byte_size"]] for k, v in stats_json.items() if k != "TOTAL"]
    rows.sort(key=lambda r: -r[2])
    with plt.rc_context(_RC):
        fig, ax = _figure(6.5, max(2.0, 0.28 * len(rows) + 1))
        ax.barh([r[0] for r in rows][::-1], [r[2] / 1e6 for r in rows][::-1], color="0.35")
        ax.set_xlabel("size (MB)")
        ax.set_title("Corpus size by sub-domain")
        return _save(fig, out_dir, stem, ["group", "doc_count", "byte_size"], rows)


def plot_dedup_clusters(report_json: dict, out_dir, stem="dedup_clusters"):
    sizes: dict[int, int] = {}
    for c in report_json["clusters"]:
        n = 1 + len(c["removed"])
        sizes[n] = sizes.get(n, 0) + 1
    rows = [[k, sizes[k]] for k in sorted(sizes)]
    with plt.rc_context(_RC):
        fig, ax = _figure()
        ax.bar([str(r[0]) for r in rows], [r[1] for r in rows], color="0.35")
        ax.set_xlabel("cluster size (documents)")
        ax.set_ylabel("clusters")
        ax.set_title(f"Near-duplicate clusters ({report_json['docs_removed']} removed "
                     f"of {report_json['docs_in']})")
        return _save(fig, out_dir, stem, ["cluster_size", "clusters"], rows)


def plot_fragmentation(per_line: list[int], out_dir, stem="fragmentation"):
    hist: dict[int, int] = {}
    for n in per_line:
        hist[n] = hist.get(n, 0) + 1
    rows = [[k, hist[k]] for k in sorted(hist)]
    mean = sum(per_line) / len(per_line) if per_line else 0.0
    with plt.rc_context(_RC):
        fig, ax = _figure()
        ax.bar([r[0] for r in rows], [r[1] for r in rows], width=0.9, color="0.35")
        ax.axvline(mean, color="C3", lw=1, ls="--", label=f"mean {mean:.2f}")
        ax.set_xlabel("subwords per line")
        ax.set_ylabel("lines")
        ax.legend()
        return _save(fig, out_dir, stem, ["subwords", "lines"], rows)


def plot_cloze(report_json: dict, out_dir, stem="cloze_accuracy"):
    rows = [
        ["top1", report_json["top1"], *report_json["ci_top1"]],
        ["top3", report_json["top3"], *report_json["ci_top3"]],
    ]
    with plt.rc_context(_RC):
        fig, ax = _figure(4.0)
        xs = range(len(rows))
        vals = [100 * r[1] for r in rows]
        err = [[100 * (r[1] - r[2]) for r in rows], [100 * (r[3] - r[1]) for r in rows]]
        ax.bar(xs, vals, yerr=err, capsize=4, color=["0.35", "0.65"])
        ax.set_xticks(list(xs), ["Top-1", "Top-3"])
        ax.set_ylabel("accuracy (%)")
        ax.set_ylim(0, 100)
        ax.set_title(f"Cloze accuracy, N={report_json['n']} ({int(100 * report_json['config']['level'])}% CI)")
        for x, v in zip(xs, vals):
            ax.text(x, 2, f"{v:.2f}", ha="center", color="white")
        return _save(fig, out_dir, stem, ["metric", "accuracy", "ci_lo", "ci_hi"], rows)


def plot_segmentation(report_json: dict, out_dir, stem="segmentation"):
    per_label = report_json["boundary"]["per_label"]
    labels = sorted(per_label, key=lambda k: -per_label[k]["f1"])
    rows = [[k, per_label[k]["precision"], per_label[k]["recall"], per_label[k]["f1"]]
            for k in labels]
    col = report_json["collapsed_per_segment"]
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
        width = 0.27
        for j, (name, color) in enumerate([("precision", "0.25"), ("recall", "0.55"), ("f1", "C3")]):
            ax1.bar([i + (j - 1) * width for i in range(len(labels))],
                    [100 * per_label[k][name] for k in labels], width, label=name, color=color)
        ax1.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
        ax1.set_ylabel("%")
        ax1.set_title("B-tag precision / recall / F1")
        ax1.legend(fontsize=7)
        segs = sorted(col)
        ax2.bar(segs, [100 * col[s]["f1"] for s in segs], color="0.35")
        ax2.set_xticks(range(len(segs)), segs, rotation=45, ha="right")
        ax2.set_title("Collapsed (B+I) F1 per segment")
        rows += [[f"collapsed:{s}", col[s]["precision"], col[s]["recall"], col[s]["f1"]] for s in segs]
        return _save(fig, out_dir, stem, ["label", "precision", "recall", "f1"], rows)


def plot_masking(summary: dict, out_dir, stem="masking"):
    strat = summary["strategy_counts"]
    n = max(1, summary["examples"])
    weights = summary["config"]["strategy_weights"]
    rows = [[s, strat[s], strat[s] / n, weights[s]] for s in strat]
    with plt.rc_context(_RC):
        fig, ax = _figure(4.5)
        xs = range(len(rows))
        ax.bar(xs, [r[2] for r in rows], color="0.35", label="observed")
        ax.scatter(xs, [r[3] for r in rows], color="C3", zorder=3, label="configured")
        ax.set_xticks(list(xs), [r[0] for r in rows])
        ax.set_ylabel("fraction of examples")
        ax.legend()
        return _save(fig, out_dir, stem, ["strategy", "examples", "observed", "configured"], rows)
