"""Plot CSV output written by ``chfem run``.

    python scripts/plot_profiles.py out/fig7-rational            # profiles
    python scripts/plot_profiles.py out/fig1-... --invariants    # E_i(t)

Writes a PNG next to the CSV files unless ``--show`` is given.
"""

import argparse
import re
from pathlib import Path

import matplotlib

from chfem.cli import read_csv


def _time(path):
    key = re.match(r"profile_t(.+)\.csv", path.name).group(1)
    return float(key.replace("m", "-"))


def plot_profiles(ax, run_dir, field, xlim):
    files = sorted(run_dir.glob("profile_t*.csv"), key=_time)
    if not files:
        raise SystemExit(f"no profile_t*.csv in {run_dir}")
    for f in files:
        d = read_csv(f)
        if field not in d:
            continue
        ax.plot(d["x"], d[field], lw=0.9, label=f"t = {_time(f):g}")
    ax.set_xlabel("x")
    ax.set_ylabel(field)
    if xlim:
        ax.set_xlim(*xlim)
    ax.legend(fontsize=8)


def plot_invariants(ax, run_dir):
    d = read_csv(run_dir / "invariants.csv")
    for name in ("E0", "E1", "E2"):
        ax.plot(d["t"][1:], d[name][1:], lw=0.9, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("log10 relative drift")
    ax.legend(fontsize=8)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("run_dir", type=Path)
    p.add_argument("--field", default="u", choices=["u", "m"])
    p.add_argument("--invariants", action="store_true", help="plot invariants.csv instead")
    p.add_argument("--xlim", type=float, nargs=2, default=None)
    p.add_argument("--show", action="store_true")
    args = p.parse_args(argv)
    if not args.show:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4))
    if args.invariants:
        plot_invariants(ax, args.run_dir)
        name = "invariants.png"
    else:
        plot_profiles(ax, args.run_dir, args.field, args.xlim)
        name = f"profiles_{args.field}.png"
    ax.set_title(args.run_dir.name)
    fig.tight_layout()
    if args.show:
        plt.show()
    else:
        fig.savefig(args.run_dir / name, dpi=150)
        print(args.run_dir / name)


if __name__ == "__main__":
    main()
