"""Render figures from deunet outputs (needs matplotlib, not a package dependency).

    python tools/plot.py metrics runs/latest/metrics.jsonl -o loss.png
    python tools/plot.py sweep sweep.csv -o sweep.png
"""

import argparse
import json
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from deunet.sweep import read_sweep  # noqa: E402


def plot_metrics(path, out):
    by_fold = defaultdict(list)
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            by_fold[rec.get("fold")].append(rec)
    has_census = any("census" in r for recs in by_fold.values() for r in recs)
    fig, axes = plt.subplots(1, 2 if has_census else 1, figsize=(11 if has_census else 6, 4), squeeze=False)
    ax = axes[0, 0]
    for fold, recs in sorted(by_fold.items(), key=lambda kv: -1 if kv[0] is None else kv[0]):
        tag = "" if fold is None else f" fold {fold}"
        epochs = [r["epoch"] for r in recs]
        ax.semilogy(epochs, [r["train_loss"] for r in recs], label="train" + tag)
        if "eval_loss" in recs[0]:
            ax.semilogy(epochs, [r["eval_loss"] for r in recs], "--", label="eval" + tag)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    if has_census:
        recs = next(iter(by_fold.values()))
        names = [k for k in recs[0]["census"] if any(r["census"][k] for r in recs)]
        ax = axes[0, 1]
        epochs = [r["epoch"] for r in recs]
        ax.stackplot(epochs, *[[r["census"][k] for r in recs] for k in names], labels=names, step="post")
        ax.set_xlabel("epoch")
        ax.set_ylabel("neurons per regime")
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out, dpi=120)


def plot_sweep(path, out):
    t, cols = read_sweep(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, y in cols.items():
        ax.plot(t, y, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("y(t)")
    if len(cols) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=120)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("kind", choices=["metrics", "sweep"])
    parser.add_argument("path")
    parser.add_argument("-o", "--out", default="plot.png")
    args = parser.parse_args()
    (plot_metrics if args.kind == "metrics" else plot_sweep)(args.path, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
