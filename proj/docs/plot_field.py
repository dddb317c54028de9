"""Plot a field CSV written by the hjb tool (x1,x2,mask,value)."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="e.g. out/fields/u.csv")
    ap.add_argument("-o", "--out", default="field.png")
    ap.add_argument("--ball-only", action="store_true", help="hide the extension ring")
    args = ap.parse_args()

    df = pd.read_csv(args.csv)
    n = int(round(np.sqrt(len(df))))
    keep = ["Interior", "Boundary"] if args.ball_only else ["Interior", "Boundary", "ExtensionRing"]
    z = np.where(df["mask"].isin(keep), df["value"], np.nan).reshape(n, n)
    x1 = df["x1"].to_numpy().reshape(n, n)
    x2 = df["x2"].to_numpy().reshape(n, n)

    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.pcolormesh(x1, x2, z, shading="nearest", cmap="viridis")
    ax.add_patch(plt.Circle((0, 0), 1.0, fill=False, color="w", lw=0.8))
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
