"""
Command line runner.

    chfem run|converge|stability --config FILE [--out DIR] [--levels K] [--quiet]

Exit codes: 0 success, 2 configuration error, 3 instability abort.
``CHFEM_THREADS`` caps the number of worker processes used by sweeps.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, to_ini
from .diagnostics import (DiagnosticsError, indicators, invariants, locate_peak, log_drift,
                          norm_error, convergence_rates, peak_mode)
from .spline_core import eval_spline
from .time_integration import InstabilityError, evolve, l1_norm, stability_probe

log = logging.getLogger("chfem")

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE = 0, 2, 3


def fmt(v):
    """CSV number format: scientific notation, 10 significant digits."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return f"{v:.9e}"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def read_csv(path):
    """Header and float columns of a CSV written by this module."""
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = {}
    for j, name in enumerate(header):
        col = [r[j] for r in rows[1:]]
        try:
            data[name] = np.array([float(v) for v in col])
        except ValueError:
            data[name] = col
    return data


def workers():
    n = os.cpu_count() or 1
    cap = os.environ.get("CHFEM_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def _time_key(t):
    return f"{t:g}".replace("-", "m")


# ---------------------------------------------------------------------------
# run


def checkpoint_times(cfg):
    run, d = cfg.run, cfg.diagnostics
    times = set(run.checkpoints) | set(d.dump_times) | set(d.shape_times)
    if d.record_every:
        n = int(math.floor(run.T / d.record_every + 1e-9))
        times |= {i * d.record_every for i in range(n + 1)}
    if d.phase_window:
        dt, _ = run.step()
        lo, hi = d.phase_window
        times |= set(np.arange(math.ceil(lo / dt - 1e-9), math.floor(hi / dt + 1e-9) + 1) * dt)
    if d.indicators:
        times |= {t - d.tau for t in times if t - d.tau >= 0}
    return tuple(sorted(t for t in times if 0 <= t <= run.T))


def sample_grid(space, per_element):
    bp = space.breakpoints
    s = np.arange(per_element) / per_element
    x = (bp[:-1, None] + np.diff(bp)[:, None] * s[None, :]).ravel()
    return np.append(x, bp[-1]) if not space.periodic else x


def run_experiment(cfg, out, quiet=False):
    """Run one simulation and write its CSV files; returns a summary dict."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    run, d = cfg.run, cfg.diagnostics
    run = replace(run, checkpoints=checkpoint_times(cfg))
    built = run.build()
    space = built[0]
    exact = run.exact() if run.scheme != "ibvp" else None
    dt, nsteps = run.step()
    dump = {round(t / dt) if nsteps else 0: t for t in d.dump_times}
    xs = sample_grid(space, d.points_per_element)
    traj_rows, inv_rows, ind_rows = [], [], []
    peaks = {}
    ref = {}
    shape_steps = {round(t / dt) if nsteps else 0 for t in d.shape_times}
    mode = peak_mode(space, exact) if exact is not None else None

    def hook(st):
        n = round(st.t / dt) if nsteps else 0
        g = space.grid
        u0, u1 = g.values(st.u, 0), g.values(st.u, 1)
        l2 = math.sqrt(float(np.sum(u0 * u0 * g.w)))
        h1 = math.sqrt(float(np.sum((u0 * u0 + u1 * u1) * g.w)))
        traj_rows.append((st.t, l2, h1, l1_norm(space, st.u)))
        if d.invariants and run.scheme != "ibvp":
            H = invariants(st, run.k)
            if not ref:
                ref["H"] = H
            E = [log_drift(a, b) if st.t > 0 else float("nan") for a, b in zip(H, ref["H"])]
            inv_rows.append((st.t, *H, *E))
        if d.indicators and exact is not None:
            prev = peaks.get(round((st.t - d.tau) / dt)) if nsteps else None
            try:
                rec = indicators(space, st.u, exact, st.t, d.tau, prev, mode,
                                 shape=n in shape_steps)
            except DiagnosticsError as exc:
                log.warning("indicators at t=%g failed: %s", st.t, exc)
            else:
                peaks[n] = rec.x_star
                ind_rows.append((rec.t, rec.x_star, rec.E_amp, rec.E_phase, rec.E_speed,
                                 rec.E_shape))
        if n in dump:
            cols = [xs, eval_spline(space, st.u, xs)]
            head = ["x", "u"]
            if st.m is not None and (d.dump_m or run.scheme != "standard"):
                cols.append(eval_spline(space, st.m, xs))
                head.append("m")
            write_csv(out / f"profile_t{_time_key(dump[n])}.csv", head, zip(*cols))
        return None

    summary = {"name": cfg.name, "status": "ok", "dt": dt, "nsteps": nsteps,
               "h": float(np.max(space.elem_h)), "dim": space.dim}
    try:
        evolve(run, hooks={"diag": hook}, keep_states=False, built=built)
    except InstabilityError as exc:
        summary.update(status="unstable", failed_step=exc.step, failed_t=exc.t)
        log.error("%s", exc)
    write_csv(out / "trajectory.csv", ["t", "u_l2", "u_h1", "u_l1"], traj_rows)
    if inv_rows:
        write_csv(out / "invariants.csv", ["t", "H0", "H1", "H2", "E0", "E1", "E2"], inv_rows)
    if d.indicators and exact is not None:
        write_csv(out / "indicators.csv",
                  ["t", "x_star", "E_amp", "E_phase", "E_speed", "E_shape"], ind_rows)
        if d.phase_window and ind_rows:
            lo, hi = d.phase_window
            ph = [r[3] for r in ind_rows if lo - 1e-9 <= r[0] <= hi + 1e-9]
            summary["E_phase_mean"] = float(np.mean(ph)) if ph else float("nan")
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "config.ini", "w", encoding="utf-8") as fh:
        fh.write(to_ini(cfg))
    if not quiet:
        print(f"{cfg.name}: {summary['status']} ({nsteps} steps, dt={dt:.6g}) -> {out}")
    return summary


# ---------------------------------------------------------------------------
# converge


def _level(args):
    run, norms, normalized, fields_ = args
    traj = evolve(run, keep_states=False)
    st = traj.final
    exact = run.exact()
    if exact is None:
        raise ConfigError("convergence study needs an exact solution", "[run] profile")
    T = st.t
    out = {}
    for fld in fields_:
        if fld == "m" and st.m is None:
            raise ConfigError("field m requires a system scheme", "[converge] fields")
        if hasattr(exact, "u_handle"):
            ref = exact.u_handle(T) if fld == "u" else exact.m_handle(T)
        else:
            if fld != "u":
                raise ConfigError("only u has an exact travelling-wave reference",
                                  "[converge] fields")
            ref = exact.at(T)
        coef = st.u if fld == "u" else st.m
        for nrm in norms:
            out[(fld, nrm)] = norm_error(st.space, coef, ref, nrm, normalized)
    return traj.nsteps, out


def converge_experiment(cfg, out, levels=None, quiet=False):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    c = cfg.converge
    Ns = list(c.levels) or [cfg.run.N]
    if levels:
        Ns = Ns[:levels]
    jobs = []
    for i, N in enumerate(Ns):
        run = replace(cfg.run, N=N, checkpoints=())
        h = (run.domain[1] - run.domain[0]) / N
        if c.steps:
            run = replace(run, dt=run.T / c.steps[i], courant=None)
        elif c.dt_over_h:
            run = replace(run, dt=c.dt_over_h * h, courant=None)
        jobs.append((run, c.norms, c.normalized, c.fields))
    nw = min(workers(), len(jobs))
    if nw > 1:
        with ProcessPoolExecutor(nw) as ex:
            results = list(ex.map(_level, jobs))
    else:
        results = [_level(j) for j in jobs]
    hs = [(cfg.run.domain[1] - cfg.run.domain[0]) / N for N in Ns]
    keys = [(f, n) for f in c.fields for n in c.norms]
    rates = {}
    for k in keys:
        errs = [res[1][k] for res in results]
        rates[k] = [float("nan")] + (list(convergence_rates(errs, hs)) if len(errs) > 1 else [])
    header = ["N", "M", "h"]
    for f, n in keys:
        header += [f"{f}_{n}_error", f"{f}_{n}_rate"]
    rows = []
    for i, N in enumerate(Ns):
        row = [N, results[i][0], hs[i]]
        for k in keys:
            row += [results[i][1][k], rates[k][i]]
        rows.append(row)
    write_csv(out / "rates.csv", header, rows)
    with open(out / "config.ini", "w", encoding="utf-8") as fh:
        fh.write(to_ini(cfg))
    if not quiet:
        print(f"{cfg.name}: {len(Ns)} levels -> {out / 'rates.csv'}")
    return rows


# ---------------------------------------------------------------------------
# stability


def _is_stable(run):
    try:
        evolve(run, keep_states=False)
    except InstabilityError:
        return False
    return True


def stability_experiment(cfg, out, quiet=False):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.stability.grid
    if not grid:
        raise ConfigError("empty courant grid", "[stability] grid")
    template = replace(cfg.run, checkpoints=())
    known = {}
    nw = min(workers(), len(grid))
    if nw > 1:
        runs = [replace(template, courant=c, dt=None) for c in grid]
        with ProcessPoolExecutor(nw) as ex:
            known = dict(zip(grid, ex.map(_is_stable, runs)))

    def is_stable(run):
        if run.courant in known:
            return known[run.courant]
        return _is_stable(run)

    res = stability_probe(template, grid, cfg.stability.resolution, is_stable)
    params = ";".join(f"{k}={v}" for k, v in sorted(cfg.run.profile_params.items()))
    write_csv(out / "stability.csv",
              ["scheme", "r", "profile", "params", "max_courant", "status", "trials"],
              [(cfg.run.scheme, cfg.run.r, cfg.run.profile, params, res.courant, res.status,
                len(res.trials))])
    with open(out / "config.ini", "w", encoding="utf-8") as fh:
        fh.write(to_ini(cfg))
    if not quiet:
        print(f"{cfg.name}: max courant {res.courant:.4f} ({res.status})")
    return res


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="chfem", description="Spline Galerkin experiments")
    p.add_argument("command", choices=["run", "converge", "stability"])
    p.add_argument("--config", required=True, help="experiment INI file")
    p.add_argument("--out", default=None, help="output directory (default: out/<name>)")
    p.add_argument("--levels", type=int, default=None, help="use only the first K levels")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or os.path.join("out", cfg.name)
    try:
        if args.command == "run":
            summary = run_experiment(cfg, out, args.quiet)
            return EXIT_UNSTABLE if summary["status"] != "ok" else EXIT_OK
        if args.command == "converge":
            converge_experiment(cfg, out, args.levels, args.quiet)
            return EXIT_OK
        stability_experiment(cfg, out, args.quiet)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    sys.exit(main())
