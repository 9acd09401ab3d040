"""Command-line front end.

Every subcommand writes into one run directory: a copy of the resolved
configuration plus the artifacts of that command.  ``pipeline`` chains
stream, dispersion, continuation, spectra and crossing detection and writes
``report.json``; reruns with the same configuration give identical files
apart from ``provenance.timestamps``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import RunConfig, env_outdir, env_threads
from .dispersion import dispersion_root
from .errors import ConfigError, StokesBifError
from .hodograph import (
    BranchResult,
    PeriodGrid,
    continue_branch,
    default_step_size,
    gap_stop_rules,
    load_branch,
    save_branch,
    surface_slope,
)
from .physical import physical_form_check
from .spectra import (
    component_counts,
    default_zero_tol,
    detect_crossings,
    dn_spectrum,
    full_2d_spectrum,
    t0_margin,
)
from .vorticity import StreamSolution, VorticityModel, stream_solution
from . import wedge

log = logging.getLogger("stokesbif")

N_EIGS_CSV = 6


# ---------------------------------------------------------------- output


class RunDir:
    """Single writer for all files of one invocation."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, obj) -> Path:
        p = self.path / name
        p.write_text(json.dumps(obj, indent=2, allow_nan=True) + "\n", encoding="utf-8")
        return p

    def csv(self, name: str, header: list[str], rows) -> Path:
        p = self.path / name
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(x) for x in r])
        return p

    def text(self, name: str, text: str) -> Path:
        p = self.path / name
        p.write_text(text, encoding="utf-8")
        return p


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _jsonable(x):
    """Floats to JSON-safe values; infinities become the string ``"unbounded"``."""
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "unbounded" if x > 0 else "-unbounded"
        if math.isnan(x):
            return None
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ------------------------------------------------------------- building blocks

_STREAM_KEYS = ("omega", "R", "s", "d", "kappa", "s0", "sc", "Rc", "R0", "froude_integral")


def stream_summary(ss: StreamSolution) -> dict:
    full = ss.to_dict()
    return {k: full[k] for k in _STREAM_KEYS if k in full}


def _setup(cfg: RunConfig):
    ss = stream_solution(cfg.model, cfg.R)
    curve = dispersion_root(ss)
    g = cfg["grid"]
    grid = PeriodGrid(g["n_q"], g["n_p"], curve.Lambda0)
    zt = cfg["spectra"]["zero_tol"]
    if zt is None:
        zt = default_zero_tol(grid, curve)
    return ss, curve, grid, zt


def _branch(cfg: RunConfig, ss, curve, grid) -> BranchResult:
    c = cfg["continuation"]
    step = c["step_size"] or default_step_size(ss, c["amplitude_fraction"], c["n_steps"])
    stop = gap_stop_rules(ss, c["amplitude_fraction"], c["stagnation_fraction"], c["slope_bound"])
    return continue_branch(ss, curve, grid, c["n_steps"], step, stop)


def _branch_rows(result_points, grid):
    for bp in result_points:
        yield [bp.index, bp.t, bp.lam, bp.amplitude, bp.residual_norm, surface_slope(bp.field, grid), "|".join(bp.flags)]


BRANCH_HEADER = ["index", "t", "lambda", "amplitude", "residual_norm", "max_slope", "flags"]


def _branch_summary(result: BranchResult, file: str) -> dict:
    pts = result.points
    return {
        "file": file,
        "n_points": len(pts),
        "stop_reason": result.stop_reason,
        "lam_b": result.lam_b,
        "t_max": pts[-1].t,
        "amplitude_max": max(bp.amplitude for bp in pts),
        "lambda_range": [min(bp.lam for bp in pts), max(bp.lam for bp in pts)],
        "residual_max": max(bp.residual_norm for bp in pts),
        "flagged_points": [bp.index for bp in pts if bp.flags],
    }


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _safe_counts(args):
    bp, grid, curve, M, zt = args
    try:
        return component_counts(bp, grid, curve, M, zt), None
    except StokesBifError as exc:
        return None, f"M={M} point {bp.index}: {type(exc).__name__}: {exc}"


def _spectra_rows(points, slices):
    for bp, parts in zip(points, slices):
        for k, s in sorted(parts.items()):
            eigs = list(s.eigs[:N_EIGS_CSV]) + [""] * max(0, N_EIGS_CSV - len(s.eigs))
            yield [bp.index, bp.t, k, "" if s.tau is None else s.tau, s.n_negative, s.n_zero, *eigs]


SPECTRA_HEADER = ["index", "t", "k", "tau", "n_negative", "n_zero"] + [f"eig_{i}" for i in range(N_EIGS_CSV)]


def _route_counts(bp, grid, M, zt, routes):
    out = {}
    for r in routes:
        if r == "dn":
            s = dn_spectrum(bp, grid, None, M, zt)
        elif r == "2d":
            s = full_2d_spectrum(bp, grid, M, zt)
        else:
            s = physical_form_check(bp, grid, M, zt)
        out[r] = (s.n_negative, s.n_zero)
    return out


# ------------------------------------------------------------- commands


def cmd_stream(cfg: RunConfig, rd: RunDir) -> dict:
    ss = stream_solution(cfg.model, cfg.R)
    out = {"stream": stream_summary(ss), "profile": {"p": ss.pgrid.tolist(), "H": ss.H.tolist()}}
    rd.json("stream.json", _jsonable(out))
    return out


def cmd_dispersion(cfg: RunConfig, rd: RunDir) -> dict:
    ss = stream_solution(cfg.model, cfg.R)
    curve = dispersion_root(ss)
    out = {"stream": stream_summary(ss), "dispersion": curve.to_dict()}
    rd.csv("dispersion.csv", ["tau", "sigma"], zip(curve.tau_grid, curve.sigma_vals))
    rd.json("dispersion.json", _jsonable(out))
    return out


def cmd_continue(cfg: RunConfig, rd: RunDir) -> dict:
    ss, curve, grid, _ = _setup(cfg)
    res = _branch(cfg, ss, curve, grid)
    save_branch(rd.path / "branch.jsonl", res, ss)
    rd.csv("branch.csv", BRANCH_HEADER, _branch_rows(res.points, grid))
    out = {"branch": _branch_summary(res, "branch.jsonl")}
    rd.json("continue.json", _jsonable(out))
    return out


def _load_or_build(cfg, rd, branch_path):
    if branch_path is None:
        ss, curve, grid, zt = _setup(cfg)
        res = _branch(cfg, ss, curve, grid)
        save_branch(rd.path / "branch.jsonl", res, ss)
        return ss, curve, grid, zt, res.points
    header, points = load_branch(branch_path)
    ss = stream_solution(VorticityModel(tuple(header["omega"])), header["R"])
    curve = dispersion_root(ss)
    g = header["grid"]
    grid = PeriodGrid(g["n_q"], g["n_p"], g["Lambda0"], g["M"])
    zt = cfg["spectra"]["zero_tol"]
    if zt is None:
        zt = default_zero_tol(grid, curve)
    return ss, curve, grid, zt, points


def cmd_spectrum(cfg: RunConfig, rd: RunDir, branch_path=None, threads: int = 1) -> dict:
    ss, curve, grid, zt, points = _load_or_build(cfg, rd, branch_path)
    sp = cfg["spectra"]
    chosen = points[:: sp["stride"]]
    out = {"zero_tol": zt, "routes": []}
    for M in [1] + sp["M"]:
        res = _map(lambda bp: _route_counts(bp, grid, M, zt, sp["routes"]), chosen, threads)
        rows = []
        for bp, r in zip(chosen, res):
            rows.append([bp.index, bp.t] + [v for route in sp["routes"] for v in r[route]])
            out["routes"].append({"M": M, "index": bp.index, **{k: list(v) for k, v in r.items()}})
        hdr = ["index", "t"] + [f"{route}_{c}" for route in sp["routes"] for c in ("n_negative", "n_zero")]
        rd.csv(f"routes_M{M}.csv", hdr, rows)
    if sp["tau_samples"] > 0:
        n = sp["tau_samples"]
        taus = [curve.tau_star * j / (2 * max(n - 1, 1)) for j in range(n)]
        rows = []
        for bp in chosen:
            for tau in taus:
                s = dn_spectrum(bp, grid, tau, 1, zt)
                eigs = list(s.eigs[:N_EIGS_CSV])
                rows.append([bp.index, bp.t, tau, s.n_negative, s.n_zero, *eigs])
        rd.csv("floquet.csv", ["index", "t", "tau", "n_negative", "n_zero"] + [f"eig_{i}" for i in range(N_EIGS_CSV)], rows)
    rd.json("spectrum.json", _jsonable(out))
    return out


def _detect(points, grid, curve, M, zt, threads):
    got = _map(_safe_counts, [(bp, grid, curve, M, zt) for bp in points], threads)
    failures = [msg for _, msg in got if msg]
    ok = [(bp, s) for bp, (s, _) in zip(points, got) if s is not None]
    if len(ok) < 2:
        return [], [s for _, s in ok], [bp for bp, _ in ok], failures
    pts = [bp for bp, _ in ok]
    slices = [s for _, s in ok]
    events, slices = detect_crossings(pts, grid, curve, M, zt, slices=slices)
    return events, slices, pts, failures


def cmd_bifurcations(cfg: RunConfig, rd: RunDir, branch_path=None, threads: int = 1) -> dict:
    ss, curve, grid, zt, points = _load_or_build(cfg, rd, branch_path)
    out = {"zero_tol": zt, "events": [], "failures": []}
    for M in [1] + cfg["spectra"]["M"]:
        events, _, _, failures = _detect(points, grid, curve, M, zt, threads)
        out["events"] += [e.to_dict() for e in events]
        out["failures"] += failures
    rd.json("bifurcations.json", _jsonable(out))
    return out


def cmd_model(cfg: RunConfig, rd: RunDir) -> dict:
    mc = cfg["model"]
    model = wedge.WedgeModel.default(gamma_phase=mc["gamma_phase"])
    ks = range(mc["k_range"][0], mc["k_range"][1] + 1)
    ladder = wedge.model_eigen_ladder(model, ks)
    table = []
    for eps in mc["eps"]:
        r = wedge.corner_form_demo(model, eps, sigma=mc["sigma"], delta=mc["delta"])
        table.append(
            {
                "eps": eps,
                "window_dim": r.window_dim,
                "n_admissible": len(r.admissible),
                "n_negative": r.n_negative,
                "predicted_dim": model.kappa / math.pi * math.log(1.0 / eps),
            }
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        roots = wedge.bessel_small_roots(model.kappa)
    out = {
        "kappa": model.kappa,
        "gamma_kappa": model.gamma_kappa,
        "gamma_phase": model.gamma_phase,
        "ladder_ratio": model.ladder_ratio,
        "tau_ladder": [{"k": m.k, "tau": m.tau} for m in ladder],
        "small_roots": roots,
        "tau1": wedge.tau1_root(),
        "slope_coefficient": wedge.SLOPE_COEFF,
        "n_negative_vs_eps": table,
    }
    z = np.geomspace(1e-6, 20.0, mc["z_samples"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        K = wedge.bessel_K_imag(model.kappa, z)
    small = wedge.bessel_K_small(model.kappa, z, model.gamma_kappa)
    large = wedge.bessel_K_large(z)
    rd.csv("bessel_K.csv", ["z", "K", "K_small_z", "K_large_z"], zip(z, K, small, large))
    rd.csv(
        "corner_form.csv",
        ["eps", "window_dim", "n_admissible", "n_negative", "predicted_dim"],
        ([r[k] for k in ("eps", "window_dim", "n_admissible", "n_negative", "predicted_dim")] for r in table),
    )
    rd.json("model.json", _jsonable(out))
    return out


def cmd_pipeline(cfg: RunConfig, rd: RunDir, threads: int = 1) -> dict:
    """Stream, dispersion, branch, spectra and crossings with a single report."""
    stamps = {"started": _stamp()}
    clock = time.perf_counter()
    caught: list[str] = []
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        ss, curve, grid, zt = _setup(cfg)
        res = _branch(cfg, ss, curve, grid)
        save_branch(rd.path / "branch.jsonl", res, ss)
        rd.csv("branch.csv", BRANCH_HEADER, _branch_rows(res.points, grid))
        stamps["branch_done"] = _stamp()
        spectra, harmonic, subharmonic, failures, k0_identical = {}, [], [], [], True
        base_slices = None
        for M in [1] + cfg["spectra"]["M"]:
            events, slices, pts, fails = _detect(res.points, grid, curve, M, zt, threads)
            failures += fails
            rd.csv(f"spectra_M{M}.csv", SPECTRA_HEADER, _spectra_rows(pts, slices))
            if M == 1:
                base_slices = slices
                harmonic += [e.to_dict() for e in events]
            else:
                subharmonic += [e.to_dict() for e in events if e.kind == "subharmonic"]
                if base_slices is not None and len(base_slices) == len(slices):
                    k0_identical &= all(
                        np.array_equal(a[0].eigs, b[0].eigs) for a, b in zip(base_slices, slices)
                    )
            first = slices[0] if slices else {}
            spectra[f"M={M}"] = {
                "file": f"spectra_M{M}.csv",
                "n_points": len(pts),
                "t0_counts": {str(k): [s.n_negative, s.n_zero] for k, s in sorted(first.items())},
                "final_counts": {str(k): [s.n_negative, s.n_zero] for k, s in sorted(slices[-1].items())}
                if slices
                else {},
            }
            if M > 1 and first:
                spectra[f"M={M}"]["t0_margin_predicted"] = t0_margin(ss, curve, M)
                spectra[f"M={M}"]["t0_min_abs_subharmonic_eig"] = min(
                    float(np.min(np.abs(s.eigs))) for k, s in first.items() if k != 0
                )
        routes = cmd_spectrum(cfg, rd, rd.path / "branch.jsonl", threads)["routes"]
        disagreements = [r for r in routes if len({tuple(r[x]) for x in cfg["spectra"]["routes"]}) > 1]
        caught = sorted({f"{w.category.__name__}: {w.message}" for w in wlist})
    stamps["finished"] = _stamp()
    stamps["elapsed_seconds"] = round(time.perf_counter() - clock, 3)
    caught += [f"point {bp.index}: {', '.join(bp.flags)}" for bp in res.points if bp.flags]
    report = {
        "provenance": {
            "config_hash": cfg.digest(),
            "package": __version__,
            "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
            "timestamps": stamps,
        },
        "config": cfg.data,
        "stream": stream_summary(ss),
        "dispersion": curve.to_dict(),
        "grid": grid.to_dict(),
        "zero_tol": zt,
        "branch": _branch_summary(res, "branch.jsonl"),
        "spectra": spectra,
        "k0_matches_M1": bool(k0_identical),
        "route_checks": {"routes": cfg["spectra"]["routes"], "points": len(routes), "disagreements": disagreements},
        "events": {
            "primary": {"t": 0.0, "lambda": res.lam_b, "tau_star": curve.tau_star, "Lambda0": curve.Lambda0},
            "harmonic": harmonic,
            "subharmonic": subharmonic,
        },
        "warnings": caught,
        "failures": failures,
    }
    report = _jsonable(report)
    rd.json("report.json", report)
    return report


# ------------------------------------------------------------------- argv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


_OVERRIDES = [
    ("--omega", "omega", _floats, "vorticity coefficients c0,c1,..."),
    ("--R", "R", float, "Bernoulli constant"),
    ("--n-q", "grid.n_q", int, "q-nodes per half wavelength"),
    ("--n-p", "grid.n_p", int, "p-intervals"),
    ("--n-steps", "continuation.n_steps", int, "continuation steps"),
    ("--step-size", "continuation.step_size", float, "continuation step"),
    ("--amplitude-fraction", "continuation.amplitude_fraction", float, "amplitude cap over R - d"),
    ("--slope-bound", "continuation.slope_bound", float, "surface slope bound"),
    ("--M", "spectra.M", _ints, "odd primes, comma separated"),
    ("--zero-tol", "spectra.zero_tol", float, "zero band half width"),
    ("--stride", "spectra.stride", int, "report every n-th branch point"),
    ("--tau-samples", "spectra.tau_samples", int, "Floquet samples per reported point"),
    ("--routes", "spectra.routes", lambda s: s.split(","), "dn,2d,physical"),
    ("--eps", "model.eps", _floats, "corner cut-off radii"),
    ("--delta", "model.delta", float, "corner cutoff scale"),
    ("--sigma", "model.sigma", float, "frequency window width"),
    ("--gamma-phase", "model.gamma_phase", float, "ladder phase in (0, pi]"),
    ("--k-range", "model.k_range", _ints, "k_min,k_max"),
]

COMMANDS = ("stream", "dispersion", "continue", "spectrum", "bifurcations", "model", "pipeline")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stokesbif", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stokesbif {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("-c", "--config", help="YAML or JSON configuration file")
        sp.add_argument("-o", "--out-dir", help="parent of the run directory (default $STOKESBIF_OUTDIR or ./runs)")
        sp.add_argument("--run-name", help="run directory name (default <command>-<config hash>)")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in ("spectrum", "bifurcations"):
            sp.add_argument("--branch", help="branch.jsonl from an earlier run (default: compute it)")
        for flag, key, typ, help_ in _OVERRIDES:
            sp.add_argument(flag, dest=key, type=typ, default=None, help=help_)
    return p


def resolve_config(args) -> RunConfig:
    needs_R = args.command != "model"
    cfg = RunConfig.load(args.config, check_R=False) if args.config else RunConfig.from_mapping({}, check_R=False)
    updates = {key: getattr(args, key) for _, key, _, _ in _OVERRIDES if getattr(args, key) is not None}
    if updates:
        cfg = cfg.override(updates, check_R=False)
    if needs_R:
        cfg.check_bernoulli()
    return cfg


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    cfg = resolve_config(args)
    threads = env_threads()
    out_dir = Path(args.out_dir) if args.out_dir else env_outdir()
    rd = RunDir(out_dir / (args.run_name or f"{args.command}-{cfg.digest()[:12]}"))
    rd.text("config.yaml", cfg.to_yaml())
    if args.command == "stream":
        out = cmd_stream(cfg, rd)["stream"]
    elif args.command == "dispersion":
        out = cmd_dispersion(cfg, rd)
    elif args.command == "continue":
        out = cmd_continue(cfg, rd)
    elif args.command == "spectrum":
        out = cmd_spectrum(cfg, rd, args.branch, threads)
    elif args.command == "bifurcations":
        out = cmd_bifurcations(cfg, rd, args.branch, threads)
    elif args.command == "model":
        out = cmd_model(cfg, rd)
    else:
        rep = cmd_pipeline(cfg, rd, threads)
        out = {"run_dir": str(rd.path), "branch": rep["branch"], "events": rep["events"]}
    print(json.dumps(_jsonable(out), indent=2))
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except StokesBifError as exc:
        print(f"stokesbif: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
