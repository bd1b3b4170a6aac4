#!/usr/bin/env python3
"""Render the generated CSV datasets as PNG figures.

Expects the files written by make_datasets.py; run that first.
"""

import argparse
import csv
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


def plot_session(out_dir):
    _, rows = read_csv(out_dir / "session.csv")
    t = np.array([float(r[0]) for r in rows])
    qber = np.array([float(r[1]) for r in rows])
    sifted = np.array([int(r[2]) for r in rows])
    decoy = np.array([r[3] == "decoy" for r in rows])

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(t, 100 * qber, ".-")
    ax1.axhline(100 * qber.mean(), color="tab:blue", alpha=0.5, label="average")
    ax1.set_ylabel("QBER (%)")
    ax1.legend()
    ax2.bar(t[~decoy], sifted[~decoy], width=8, label="signal")
    ax2.bar(t[decoy], sifted[decoy], width=8, color="tab:pink", label="decoy")
    ax2.set_xlabel("time (s)")
    ax2.set_ylabel("sifted bits / 10 s")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "session.png", dpi=150)


def plot_tomography(out_dir):
    _, rows = read_csv(out_dir / "tomography.csv")
    matrix = np.array([[float(x) for x in r[1:]] for r in rows])
    labels = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 6))
    im = ax.imshow(matrix, vmin=0, vmax=1, cmap="viridis")
    ax.set_xticks(range(12), labels, rotation=90, fontsize=7)
    ax.set_yticks(range(12), labels, fontsize=7)
    ax.set_xlabel("measured outcome")
    ax.set_ylabel("prepared state")
    fig.colorbar(im, shrink=0.8)
    fig.tight_layout()
    fig.savefig(out_dir / "tomography.png", dpi=150)


def plot_keyrates(out_dir):
    fig, ax = plt.subplots(figsize=(7, 5))
    styles = {
        ("decoy", 4): ("tab:red", "ququart, decoy"),
        ("decoy", 2): ("black", "qubit, decoy"),
        ("wcp_no_decoy", 4): ("tab:blue", "ququart, no decoy"),
        ("wcp_no_decoy", 2): ("tab:cyan", "qubit, no decoy"),
    }
    for (mode, dim), (color, label) in styles.items():
        path = out_dir / f"keyrate_{mode}_n{dim}.csv"
        if not path.exists():
            continue
        _, rows = read_csv(path)
        d = np.array([float(r[0]) for r in rows])
        r = np.array([float(r[1]) for r in rows])
        keep = r > 0
        ax.semilogy(d[keep], r[keep], color=color, label=label)
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("secret rate (bits/pulse)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_dir / "keyrate.png", dpi=150)


def plot_mi_curves(out_dir):
    _, rows = read_csv(out_dir / "mi_curves.csv")
    data = {}
    for n, d, iab, iae in rows:
        data.setdefault(int(n), []).append((float(d), float(iab), float(iae)))
    fig, ax = plt.subplots(figsize=(7, 5))
    for n, points in sorted(data.items()):
        arr = np.array(points)
        (line,) = ax.plot(arr[:, 0], arr[:, 1], label=f"N={n} Alice-Bob")
        ax.plot(arr[:, 0], arr[:, 2], "--", color=line.get_color(), label=f"N={n} Alice-Eve")
    ax.set_xlabel("disturbance D")
    ax.set_ylabel("mutual information (bits)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_dir / "mi_curves.png", dpi=150)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out")
    args = ap.parse_args()
    out_dir = pathlib.Path(args.out_dir)
    if not (out_dir / "session.csv").exists():
        print("run scripts/make_datasets.py first", file=sys.stderr)
        return 1
    plot_session(out_dir)
    plot_tomography(out_dir)
    plot_keyrates(out_dir)
    plot_mi_curves(out_dir)
    print(f"figures written to {out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
