#!/usr/bin/env python3
"""Plot secondary throughput against primary arrival rate from a sweep CSV.

usage: plot_sweep.py fig1.csv [out.png]
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    src = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else src.rsplit(".", 1)[0] + ".png"
    df = pd.read_csv(src, comment="#")
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, rows in df.groupby("variant", sort=False):
        ax.plot(rows["lambda_p"], rows["mu_s"], marker=".", label=variant)
    ax.set_xlabel("primary arrival rate (packets/slot)")
    ax.set_ylabel("secondary throughput (packets/slot)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
