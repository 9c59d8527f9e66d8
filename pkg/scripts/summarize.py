"""Print the headline numbers of every result directory under OUT (default: out/)."""

import json
import sys
from pathlib import Path

from chfem.cli import read_csv


def summarize(run_dir):
    lines = []
    if (run_dir / "rates.csv").exists():
        d = read_csv(run_dir / "rates.csv")
        cols = [c for c in d if c.endswith("_error") or c.endswith("_rate")]
        lines.append("  N      " + "  ".join(f"{c:>14s}" for c in cols))
        for i, n in enumerate(d["N"]):
            lines.append(f"  {int(n):<6d} " + "  ".join(f"{d[c][i]:14.4e}" for c in cols))
    if (run_dir / "stability.csv").exists():
        d = read_csv(run_dir / "stability.csv")
        lines.append(f"  max courant {d['max_courant'][0]:.3f} ({d['status'][0]})")
    if (run_dir / "indicators.csv").exists():
        d = read_csv(run_dir / "indicators.csv")
        lines.append("  t={:g} E_amp={:.4e} E_phase={:.4e} E_speed={:.4e} E_shape={:.4e}".format(
            d["t"][-1], d["E_amp"][-1], d["E_phase"][-1], d["E_speed"][-1], d["E_shape"][-1]))
    if (run_dir / "summary.json").exists():
        s = json.loads((run_dir / "summary.json").read_text())
        if "E_phase_mean" in s:
            lines.append(f"  mean E_phase over the window {s['E_phase_mean']:.4e}")
        if s.get("status") != "ok":
            lines.append(f"  status {s.get('status')}")
    if (run_dir / "invariants.csv").exists():
        d = read_csv(run_dir / "invariants.csv")
        worst = ", ".join(f"{k}<=1e{max(d[k][1:]):.2f}" for k in ("E0", "E1", "E2"))
        lines.append(f"  invariant drifts {worst}")
    return lines


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "out")
    for run_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        lines = summarize(run_dir)
        if lines:
            print(run_dir.name)
            print("\n".join(lines))


if __name__ == "__main__":
    main()
