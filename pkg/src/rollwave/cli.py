"""Command-line front end: ``rollwave <command> --config FILE``.

Every run writes ``resolved_config.json`` next to its results.  Data files
carry no timestamps and are written in a fixed order, so identical configs
give byte-identical outputs, serial or parallel.

Exit codes: 0 success, 1 usage or config error, 2 regime or precondition
violation, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import config as cfgmod
from .core import PhysicalParams, WaveKey
from .errors import ConfigError, RollwaveError

COMMANDS = ("dressler", "profile", "stability", "evans", "bloch", "whitham2", "validate")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rollwave", description="Roll-wave modulation and stability studies.")
    p.add_argument("--version", action="version", version=f"rollwave {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument("--dry-run", action="store_true", help="print resolved config and cost only")
    return p


def _workers(args) -> int:
    env = os.environ.get("ROLLWAVE_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"ROLLWAVE_THREADS must be an integer, got {env!r}") from exc
    else:
        n = args.parallel
    if n < 1:
        raise ConfigError("parallelism must be at least 1")
    return n


def _pmap(fn, items, workers: int) -> list:
    """Order-preserving map, in worker processes when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# output helpers


class Output:
    def __init__(self, directory: str, fmt: str):
        self.dir = directory
        self.fmt = fmt
        self.files: list[str] = []
        os.makedirs(directory, exist_ok=True)

    def _path(self, name):
        path = os.path.join(self.dir, name)
        self.files.append(path)
        return path

    def json(self, name: str, obj) -> str:
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(cfgmod.dumps(_plain(obj)))
        return path

    def table(self, stem: str, header: list, rows) -> str:
        """Write rows as CSV or as a JSON list of records (``output.format``)."""
        rows = [[_plain(v) for v in r] for r in rows]
        if self.fmt == "json":
            return self.json(stem + ".json", [dict(zip(header, r)) for r in rows])
        path = self._path(stem + ".csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        return path


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _params(cfg) -> PhysicalParams:
    cfgmod.require(cfg, "physical", "F", "delta")
    return PhysicalParams(cfg["physical"]["F"], cfg["physical"]["delta"])


def _profile(cfg, k=None, qbar=None):
    from .profile import solve_profile
    pts = cfgmod.wave_points(cfg)
    k0, q0 = pts[0] if k is None else (k, qbar)
    num = cfg["numerics"]
    return solve_profile(_params(cfg), WaveKey(k0, q0), n=num["n"], tol=num["tol"])


# ---------------------------------------------------------------------------
# commands


def cmd_dressler(cfg, out: Output, workers: int, dry: bool):
    from .dressler import dressler_wave, hmin_threshold, _check_F
    cfgmod.require(cfg, "physical", "F")
    F = cfg["physical"]["F"]
    _check_F(F)
    d = cfg["dressler"]
    if d["h_plus"]:
        hp = d["h_plus"]
    else:
        if d["sweep"] < 1:
            raise ConfigError("dressler.sweep must be positive")
        hp = np.linspace(hmin_threshold(F), 1.0, d["sweep"] + 2)[1:-1].tolist()
    if dry:
        return {"points": len(hp)}
    rows = []
    for h in hp:
        w = dressler_wave(F, d["qbar"], h)
        rows.append([w.h_plus, w.h_minus, w.k, w.M, w.c_star])
    out.table("dressler", ["h_plus", "h_minus", "k", "M", "c_star"], rows)
    return {"rows": len(rows)}


def cmd_profile(cfg, out: Output, workers: int, dry: bool):
    from .profile import check_derivatives, kernel_ratio
    if dry:
        return {"n": cfg["numerics"]["n"]}
    p = _profile(cfg)
    with open(out._path("profile.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(p.to_json() + "\n")
    y = np.arange(p.n) / p.n
    out.table("profile", ["y", "H", "Q"], zip(y, p.H, p.Q))
    out.json("profile_report.json", {"c": p.c, "omega": p.omega, "residual": p.residual,
                                     "kernel_ratio": kernel_ratio(p),
                                     "derivative_check": check_derivatives(p)})
    return {"c": p.c}


def _stability_chunk(job):
    """One chunk of sweep points, solved by continuation from the previous one."""
    from .bloch import critical_curves, first_order_ratios
    from .evans import EvansContext, evans_expansion
    from .profile import solve_profile
    from .whitham1 import assemble, dispersion_cq
    F, delta, n, tol, pts, st, bl, radius = job
    params = PhysicalParams(F, delta)
    rows, prev = [], None
    for k, qbar in pts:
        row = {"k": k, "qbar": qbar, "c": np.nan, "hyperbolic": "", "speed1": np.nan,
               "speed2": np.nan, "speed_imag": np.nan, "root1": np.nan, "root2": np.nan,
               "gamma_spread": np.nan, "bloch_ratio1": np.nan, "bloch_ratio2": np.nan}
        errs = []
        try:
            prof = solve_profile(params, WaveKey(k, qbar), prev if prev is not None else "dressler", n, tol)
            prev = prof
            row["c"] = prof.c
        except RollwaveError as exc:
            row["errors"] = f"profile: {exc}"
            rows.append(row)
            continue
        try:
            W = assemble(prof)
            s = W.comoving_speeds()
            row["hyperbolic"] = W.hyperbolic
            row["speed1"], row["speed2"] = float(np.real(s[0])), float(np.real(s[1]))
            row["speed_imag"] = float(np.abs(np.imag(s)).max())
        except RollwaveError as exc:
            errs.append(f"whitham: {exc}")
        ref = None
        try:
            D = dispersion_cq(prof)
            row["root1"], row["root2"] = (float(np.real(r)) for r in D.roots)
            ref = D.roots / k
        except RollwaveError as exc:
            errs.append(f"dispersion: {exc}")
        try:
            rep = evans_expansion(EvansContext(prof), r=radius, npts=st["evans_npts"], radii=())
            row["gamma_spread"] = rep.spread
        except RollwaveError as exc:
            errs.append(f"evans: {exc}")
        try:
            grid = np.geomspace(bl["l_min"], bl["l_max"], bl["num"])
            cur = critical_curves(prof, grid, order=ref)
            r = first_order_ratios(cur, k)[0]
            row["bloch_ratio1"], row["bloch_ratio2"] = float(r[0].real), float(r[1].real)
        except RollwaveError as exc:
            errs.append(f"bloch: {exc}")
        row["errors"] = "; ".join(errs)
        rows.append(row)
    return rows


STABILITY_COLUMNS = ["k", "qbar", "c", "hyperbolic", "speed1", "speed2", "speed_imag", "root1",
                     "root2", "gamma_spread", "bloch_ratio1", "bloch_ratio2", "errors"]


def cmd_stability(cfg, out: Output, workers: int, dry: bool):
    params = _params(cfg)
    pts = cfgmod.wave_points(cfg)
    st = cfg["stability"]
    if st["chunk"] < 1:
        raise ConfigError("stability.chunk must be positive")
    # neighbours in (k, qbar) share a chunk; chunking does not depend on workers
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    chunks = [order[i:i + st["chunk"]] for i in range(0, len(order), st["chunk"])]
    if dry:
        return {"points": len(pts), "chunks": len(chunks)}
    num = cfg["numerics"]
    jobs = [(params.F, params.delta, num["n"], num["tol"], [pts[i] for i in ch], st, cfg["bloch"],
             cfg["evans"]["radius"])
            for ch in chunks]
    results = _pmap(_stability_chunk, jobs, workers)
    by_index = {}
    for ch, rows in zip(chunks, results):
        for i, r in zip(ch, rows):
            by_index[i] = r
    rows = [[by_index[i].get(c, "") for c in STABILITY_COLUMNS] for i in range(len(pts))]
    out.table("stability", STABILITY_COLUMNS, rows)
    return {"rows": len(rows), "flagged": sum(1 for i in by_index if by_index[i]["errors"])}


def cmd_evans(cfg, out: Output, workers: int, dry: bool):
    from .evans import EvansContext, evans_expansion
    ev = cfg["evans"]
    if dry:
        return {"monodromies": ev["npts"] * (1 + len(ev["radii"])) + 2 * ev["samples"]}
    prof = _profile(cfg)
    ctx = EvansContext(prof)
    rep = evans_expansion(ctx, r=ev["radius"], npts=ev["npts"], radii=tuple(ev["radii"]),
                          seed=ev["seed"])
    r = ev["radius"]
    lams = [r * np.exp(2j * np.pi * j / ev["samples"]) for j in range(ev["samples"])]
    rows = []
    for lam in lams:
        m = ctx.monodromy(lam)
        for sigma in (1.0 + 0j, np.exp(1j * r)):
            E = m.evans(sigma)
            rows.append([lam.real, lam.imag, sigma.real, sigma.imag, E.real, E.imag])
    out.table("evans_samples", ["re_lambda", "im_lambda", "re_sigma", "im_sigma", "re_E", "im_E"], rows)
    m0 = ctx.monodromy(0.0)
    d = rep.to_dict()
    d.update(E_0_1=abs(m0.evans(1.0)), E_0_rho=abs(m0.evans(ctx.rho)), rho=ctx.rho,
             liouville_error=m0.liouville_error)
    out.json("evans_report.json", d)
    return {"spread": rep.spread, "slope": rep.slope}


def cmd_bloch(cfg, out: Output, workers: int, dry: bool):
    from .bloch import (critical_curves, eigenvector_expansion_check, first_order_ratios,
                        jordan_structure, kernel_residuals)
    from .whitham1 import dispersion_cq
    b = cfg["bloch"]
    if dry:
        return {"l_points": b["num"]}
    prof = _profile(cfg)
    ref = dispersion_cq(prof).roots / prof.key.k
    cur = critical_curves(prof, np.geomspace(b["l_min"], b["l_max"], b["num"]), order=ref)
    ev = eigenvector_expansion_check(prof, cur)
    out.table("bloch", ["l", "re_lambda1", "im_lambda1", "re_lambda2", "im_lambda2", "d1", "d2"],
              cur.to_rows(ev.d1, ev.d2))
    j = jordan_structure(prof)
    rat = first_order_ratios(cur, prof.key.k)[0]
    out.json("bloch_report.json", {
        "kernel": kernel_residuals(prof), "sv_ratio": j.sv_ratio, "jordan_height": j.height,
        "gap": cur.gap, "biorth_error": cur.biorth_error, "first_ratios": [complex(z) for z in rat],
        "whitham_roots": [complex(z) for z in ref], "slope_d1": ev.slope1, "slope_d2": ev.slope2,
        "d0": ev.d0})
    return {"slope_d1": ev.slope1, "slope_d2": ev.slope2}


def cmd_whitham2(cfg, out: Output, workers: int, dry: bool):
    from .whitham2 import second_order_eigen
    b = cfg["bloch"]
    if dry:
        return {"l_points": b["num"]}
    prof = _profile(cfg)
    so = second_order_eigen(prof)
    l = np.geomspace(b["l_min"], b["l_max"], b["num"])
    mu = so.mu(l)
    path = out.table("mu", ["l", "re_mu1", "im_mu1", "re_mu2", "im_mu2"],
                     [[li, m[0].real, m[0].imag, m[1].real, m[1].imag] for li, m in zip(l, mu)])
    d = so.to_dict()
    d["mu_table"] = os.path.basename(path)
    out.json("whitham2.json", d)
    return {"lambda1": d["lambda1"]}


def _validate_run(job):
    from . import modsim
    fam_seed, traj, eps, T0, kw = job
    fam = modsim.ProfileFamily(fam_seed)
    return modsim.validate(fam, traj, eps, T0, **kw)


def cmd_validate(cfg, out: Output, workers: int, dry: bool):
    from . import modsim
    from .whitham1 import FluxModel, solve_whitham
    w, s = cfg["whitham"], cfg["sim"]
    eps_list = sorted(s["eps"], reverse=True)
    T0 = s["t_end"] if s["t_end"] is not None else w["Tend"]
    pts = cfgmod.wave_points(cfg)
    k_star = pts[0][0]
    plan = []
    for e in eps_list:
        waves = k_star * w["length"] / e
        cells = int(round(waves)) * s["n_per_period"]
        steps = int(np.ceil(T0 / e / (s["cfl"] * (1.0 / k_star / s["n_per_period"]) / 3.0)))
        plan.append({"eps": e, "cells": cells, "approx_steps": steps,
                     "cell_steps": cells * steps})
    if dry:
        return {"plan": plan}
    prof = _profile(cfg)
    X, k0, q0 = modsim.sinusoidal_modulation(prof.key.k, prof.key.qbar, w["length"], w["nX"],
                                             w["amp_k"], w["amp_q"])
    model = FluxModel(prof, w["box"] * prof.key.k, w["box"] * max(abs(prof.key.qbar), 1.0))
    dt = w["dt"] if w["dt"] is not None else T0 / 40
    traj = solve_whitham(model, k0, q0, T0, length=w["length"], dt=dt, cfl=w["cfl"])
    out.table("whitham_trajectory", ["T", "X", "k", "qbar"], traj.to_csv_rows())
    fam = modsim.ProfileFamily(prof)
    reports = {}
    for order in range(s["order"] + 1):
        reports[f"order{order}"] = modsim.residual_scaling(fam, traj, eps_list, order).to_dict()
    out.json("residual_scaling.json", reports)
    kw = dict(order=0, n_per_period=s["n_per_period"], max_cells=s["cells"], cfl=s["cfl"],
              limiter=s["limiter"], compare_every=s["compare_every"],
              keep_times=(T0 / max(eps_list),))
    runs = _pmap(_validate_run, [(prof, traj, e, T0, kw) for e in eps_list], workers)
    rep = modsim.summarize(eps_list, runs, T0)
    out.json("validate.json", rep.to_dict())
    out.table("validate_history", ["eps", "t", "sup_err", "naive_err"],
              [[r.eps, t, e, ne] for r in runs for t, e, ne in zip(r.times, r.errors, r.naive_errors)])
    last = runs[-1]
    if last.final is not None and s["stride"] > 0:
        st = last.final
        x = st.centers
        out.table("sim_snapshot", ["t", "x", "h", "q"],
                  [[st.t, x[i], st.h[i], st.q[i]] for i in range(0, st.n_x, s["stride"])])
    return {"slope": rep.slope, "residual_slopes": {k: v["slope"] for k, v in reports.items()}}


HANDLERS = {"dressler": cmd_dressler, "profile": cmd_profile, "stability": cmd_stability,
            "evans": cmd_evans, "bloch": cmd_bloch, "whitham2": cmd_whitham2,
            "validate": cmd_validate}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = cfgmod.load(args.config)
        if args.out:
            cfg["output"]["dir"] = args.out
        workers = _workers(args)
    except (_UsageError, ConfigError) as exc:
        print(f"rollwave: error: {exc}", file=sys.stderr)
        return 1
    echo = {"command": args.command, "version": __version__, "config": cfg}
    try:
        if args.dry_run:
            est = HANDLERS[args.command](cfg, None, workers, True)
            echo["estimate"] = est
            sys.stdout.write(cfgmod.dumps(_plain(echo)))
            return 0
        out = Output(cfg["output"]["dir"], cfg["output"]["format"])
        out.json("resolved_config.json", echo)
        summary = HANDLERS[args.command](cfg, out, workers, False)
    except RollwaveError as exc:
        print(f"rollwave: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(_plain({"command": args.command, "summary": summary,
                             "files": [os.path.basename(f) for f in out.files]})))
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
