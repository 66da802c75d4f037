"""Command-line entry point.

Subcommands: frame, norms, bench-inequalities, gronwall, simulate, monitor.
Configuration may come from a flat JSON map (--config); explicit flags
override file values.  Every run echoes its resolved configuration next to
its outputs, and all randomness is derived from --seed, so reruns are
bit-identical.  --threads is accepted and recorded; computations stay
sequential so CSV outputs do not depend on reduction order.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import frame as frame_mod
from . import gronwall as gw
from . import monitor as monitor_mod
from . import solver as solver_mod
from .bands import NormSpec, aniso_besov_norm, aniso_sobolev_norm
from .errors import ConfigError, ToolkitError
from .inequalities import (
    IneqReport,
    check_bernstein,
    check_duality,
    check_embedding,
    check_interpolation,
    check_product_law,
    write_reports_csv,
)
from .sampling import random_smooth_field
from .spectral import (
    SpectralField,
    curl,
    divergence,
    l2_norm,
    make_grid,
    read_field,
    write_field,
)

_GLOBAL_DEFAULTS = {"grid": 32, "seed": 0, "out": "out", "threads": 1}


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text in ("inf", "Inf"):
        return math.inf
    return text


def _parse_params(text: str | None) -> dict:
    out: dict = {}
    if not text:
        return out
    for item in text.split(","):
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"--params entries must look like k=v, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v.strip())
    return out


def _parse_beta(text: str | None, seed: int) -> np.ndarray:
    if text is None:
        rng = np.random.default_rng([seed, 0xBE7A])
        b = rng.normal(size=3)
        return b / np.linalg.norm(b)
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"--beta needs three comma-separated components, got {text!r}")
    b = np.asarray(parts)
    n = np.linalg.norm(b)
    if n == 0:
        raise ConfigError("--beta must be nonzero")
    return b / n


def _load_phi(spec: str, t_final: float) -> gw.PiecewiseLinear:
    if spec.startswith("const:"):
        return gw.PiecewiseLinear.constant(float(spec.split(":", 1)[1]), 0.0, t_final)
    times, values = [], []
    with open(spec, newline="") as fh:
        for row in csv.DictReader(fh):
            times.append(float(row["t"]))
            values.append(float(row["value"]))
    return gw.PiecewiseLinear(np.asarray(times), np.asarray(values))


def _echo_config(outdir: Path, config: dict) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "run_config.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _resolve(args: argparse.Namespace, file_cfg: dict, keys: dict) -> dict:
    """Merge precedence: hard defaults < config file < explicit flags."""
    cfg = dict(keys)
    for k, v in file_cfg.items():
        if k in cfg or k in ("subcommand",):
            if k != "subcommand":
                cfg[k] = v
        else:
            raise ConfigError(f"unknown config key {k!r}")
    for k in cfg:
        v = getattr(args, k.replace("-", "_"), None)
        if v is not None:
            cfg[k] = v
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def _cmd_frame(args, file_cfg) -> int:
    cfg = _resolve(args, file_cfg, {**_GLOBAL_DEFAULTS, "path": None, "samples": 400, "jumps": 0})
    outdir = Path(cfg["out"])
    if cfg["path"] is None or str(cfg["path"]).startswith("random"):
        path = frame_mod.random_unit_path(int(cfg["seed"]), n_samples=int(cfg["samples"]), n_jumps=int(cfg["jumps"]))
    else:
        path = frame_mod.read_unit_path_csv(cfg["path"])
    fr = frame_mod.build_frame(path)
    _echo_config(outdir, {"subcommand": "frame", **cfg})
    frame_mod.write_frame_csv(fr, outdir / "frame.csv")
    print(
        f"frame: {fr.n_samples} samples, {len(fr.segment_table)} segments, "
        f"{len(path.jump_indices)} jumps -> {outdir / 'frame.csv'}"
    )
    return 0


def _cmd_norms(args, file_cfg) -> int:
    cfg = _resolve(
        args,
        file_cfg,
        {
            **_GLOBAL_DEFAULTS,
            "field": None,
            "beta": None,
            "kind": "sobolev",
            "s1": 1.0,
            "s2": 0.5,
            "p": 2.0,
            "q1": 2.0,
            "q2": 2.0,
        },
    )
    outdir = Path(cfg["out"])
    seed = int(cfg["seed"])
    grid = make_grid(int(cfg["grid"]))
    if cfg["field"] is None or str(cfg["field"]).startswith("random"):
        f = random_smooth_field(grid, seed)
        field_id = f"random:{seed}"
    else:
        f = read_field(cfg["field"])
        field_id = str(cfg["field"])
    beta = _parse_beta(cfg["beta"], seed)
    s1, s2 = float(cfg["s1"]), float(cfg["s2"])
    p, q1, q2 = (float(cfg[k]) for k in ("p", "q1", "q2"))
    if cfg["kind"] == "sobolev":
        res = aniso_sobolev_norm(f, s1, s2, beta)
    elif cfg["kind"] == "besov":
        res = aniso_besov_norm(f, NormSpec(s1=s1, s2=s2, p=p, q1=q1, q2=q2), beta)
    else:
        raise ConfigError(f"kind must be sobolev or besov, got {cfg['kind']!r}")
    _echo_config(outdir, {"subcommand": "norms", **cfg})
    report = outdir / "norms.csv"
    with open(report, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field_id", "kind", "s1", "s2", "p", "q1", "q2", "value", "excluded_mass"])
        w.writerow(
            [field_id, cfg["kind"], repr(s1), repr(s2), repr(p), repr(q1), repr(q2), repr(res.value), repr(res.excluded_mass)]
        )
    print(f"{cfg['kind']} norm = {res.value!r} (excluded mass {res.excluded_mass!r}) -> {report}")
    return 0


_INEQ_RUNNERS = {
    "embed": lambda g, b, n, s, p: check_embedding(
        p.get("s1", 1.0), p.get("s2", 0.5), g, b, n_trials=n, seed=s
    ),
    "duality": lambda g, b, n, s, p: check_duality(
        p.get("s1", 1.0), p.get("s2", 0.5), p.get("q1", 2.0), p.get("q2", 2.0),
        g, b, n_trials=n, seed=s, single_band=bool(p.get("single_band", 0)),
    ),
    "interp": lambda g, b, n, s, p: check_interpolation(
        p.get("sigma", 0.1), p.get("eta", 0.0), g, b, n_trials=n, seed=s
    ),
    "product": lambda g, b, n, s, p: check_product_law(
        p.get("s1", 0.5), p.get("s2", 0.5), p.get("r1", 0.0), p.get("r2", 0.0),
        g, b, n_trials=n, seed=s,
    ),
    "bernstein": lambda g, b, n, s, p: check_bernstein(
        int(p.get("case", 3)), p, g, b, n_trials=n, seed=s
    ),
}


def _cmd_bench(args, file_cfg) -> int:
    cfg = _resolve(
        args,
        file_cfg,
        {**_GLOBAL_DEFAULTS, "ineq": "embed", "trials": 200, "beta": None, "params": None},
    )
    if cfg["ineq"] not in _INEQ_RUNNERS:
        raise ConfigError(f"--ineq must be one of {sorted(_INEQ_RUNNERS)}, got {cfg['ineq']!r}")
    grid = make_grid(int(cfg["grid"]))
    seed = int(cfg["seed"])
    params = _parse_params(cfg["params"]) if isinstance(cfg["params"], str) else (cfg["params"] or {})
    beta = _parse_beta(cfg["beta"], seed)
    report: IneqReport = _INEQ_RUNNERS[cfg["ineq"]](grid, beta, int(cfg["trials"]), seed, params)
    outdir = Path(cfg["out"])
    _echo_config(outdir, {"subcommand": "bench-inequalities", **cfg})
    write_reports_csv([report], outdir / "inequalities.csv")
    status = "PASS" if report.passed else "FAIL"
    print(
        f"{status} {report.inequality_id}: max ratio {report.max_ratio!r} "
        f"vs ceiling {report.ceiling!r} over {report.n_trials} trials "
        f"({report.n_discarded} discarded)"
    )
    return 0 if report.passed else 1


def _cmd_gronwall(args, file_cfg) -> int:
    cfg = _resolve(
        args,
        file_cfg,
        {
            **_GLOBAL_DEFAULTS,
            "action": "certify",
            "f0": 1.0,
            "m_coef": 1.0,
            "delta": 0.2,
            "phi": "const:1",
            "t_final": 1.0,
        },
    )
    if cfg["action"] != "certify":
        raise ConfigError(f"unknown gronwall action {cfg['action']!r}")
    phi = _load_phi(str(cfg["phi"]), float(cfg["t_final"]))
    problem = gw.GronwallProblem(
        f0=float(cfg["f0"]), M=float(cfg["m_coef"]), phi=phi, delta=float(cfg["delta"])
    )
    cert = gw.certify_bound(problem)
    outdir = Path(cfg["out"])
    _echo_config(outdir, {"subcommand": "gronwall", **cfg})
    with open(outdir / "certificate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["segment", "t0", "t1", "mass", "sigma"])
        for i in range(cert.n):
            w.writerow(
                [
                    i,
                    repr(float(cert.partition[i])),
                    repr(float(cert.partition[i + 1])),
                    repr(float(cert.segment_masses[i])),
                    repr(float(cert.sigmas[i])),
                ]
            )
    status = "PASS" if cert.passed else "FAIL"
    print(
        f"{status} certificate: n={cert.n} segments, log2_A={cert.log2_bound!r}, "
        f"max log2 f={cert.max_log2_f!r} -> {outdir / 'certificate.csv'}"
    )
    return 0 if cert.passed else 1


def _build_initial(cfg, grid) -> SpectralField:
    init = str(cfg["init"])
    if init == "abc":
        return solver_mod.abc_field(grid)
    if init == "taylor-green":
        return solver_mod.taylor_green_field(grid)
    if init == "random-seeded":
        return random_smooth_field(grid, int(cfg["seed"]), vector=True, divergence_free=True)
    if init == "file":
        if not cfg.get("init_file"):
            raise ConfigError("--init file needs --init-file")
        return read_field(cfg["init_file"], grid)
    raise ConfigError(f"unknown init {init!r}")


def _cmd_simulate(args, file_cfg) -> int:
    cfg = _resolve(
        args,
        file_cfg,
        {
            **_GLOBAL_DEFAULTS,
            "tmax": 0.1,
            "dt": 1e-3,
            "init": "abc",
            "init_file": None,
            "snapshot_every": 10,
            "nu": 1.0,
        },
    )
    grid = make_grid(int(cfg["grid"]))
    u0 = _build_initial(cfg, grid)
    n_steps = int(round(float(cfg["tmax"]) / float(cfg["dt"])))
    outdir = Path(cfg["out"])
    _echo_config(outdir, {"subcommand": "simulate", **cfg})
    state = solver_mod.FlowState(t=0.0, u=u0, nu_visc=float(cfg["nu"]))
    every = max(int(cfg["snapshot_every"]), 1)
    manifest = []
    diag_path = outdir / "diagnostics.csv"
    with open(diag_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "energy", "enstrophy", "max_div", "dissipation_accum"])
        for i, sample in enumerate(solver_mod.run(state, float(cfg["dt"]), n_steps)):
            u = sample.state.u
            w.writerow(
                [
                    repr(float(sample.state.t)),
                    repr(l2_norm(u) ** 2),
                    repr(l2_norm(curl(u)) ** 2),
                    repr(l2_norm(divergence(u))),
                    repr(sample.dissipation_accum),
                ]
            )
            if i % every == 0 or i == n_steps:
                name = f"snapshot_{i:06d}.alp1"
                write_field(u, outdir / name)
                manifest.append((i, sample.state.t, name))
    with open(outdir / "snapshots.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "file"])
        for step, t, name in manifest:
            w.writerow([step, repr(float(t)), name])
    print(
        f"simulated {n_steps} steps to t={n_steps * float(cfg['dt'])!r}; "
        f"{len(manifest)} snapshots -> {outdir}"
    )
    return 0


def _cmd_monitor(args, file_cfg) -> int:
    cfg = _resolve(
        args,
        file_cfg,
        {
            **_GLOBAL_DEFAULTS,
            "traj": None,
            "frame": None,
            "beta": None,
            "sigma": 0.1,
            "nu": 1.0,
            "residual_every": 1,
        },
    )
    if cfg["traj"] is None:
        raise ConfigError("--traj directory (simulate output) is required")
    traj_dir = Path(cfg["traj"])
    rows = list(csv.DictReader(open(traj_dir / "snapshots.csv", newline="")))
    if not rows:
        raise ConfigError(f"no snapshots listed in {traj_dir / 'snapshots.csv'}")

    if cfg["frame"] is not None:
        frame_obj = frame_mod.read_frame_csv(cfg["frame"])
    else:
        fs = frame_mod.constant_frame(_parse_beta(cfg["beta"], int(cfg["seed"])))
        frame_obj = fs

    def states():
        for row in rows:
            u = read_field(traj_dir / row["file"])
            yield solver_mod.FlowState(t=float(row["t"]), u=u, nu_visc=float(cfg["nu"]))

    log = monitor_mod.accumulate(states(), frame_obj, residual_every=max(int(cfg["residual_every"]), 1))
    outdir = Path(cfg["out"])
    _echo_config(outdir, {"subcommand": "monitor", **cfg})
    out_csv = outdir / "criterion_log.csv"
    log.write_csv(out_csv)
    est = monitor_mod.prop1_constant_estimate(log, sigma=float(cfg["sigma"]))
    print(
        f"criterion integral {log.final_integral()!r} over {len(log.nodes)} nodes; "
        f"minimal C (sigma={cfg['sigma']}) = {est.minimal_c!r} -> {out_csv}"
    )
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="aniso-lp",
        description="Direction-adapted dyadic analysis and flow monitors on the torus",
    )
    ap.add_argument("--config", help="flat JSON parameter map; flags override")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--grid", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--threads", type=int)

    p = sub.add_parser("frame", help="build a frame from a unit path CSV")
    common(p)
    p.add_argument("--path", help="unit path CSV, or 'random' for a seeded path")
    p.add_argument("--samples", type=int)
    p.add_argument("--jumps", type=int)
    p.set_defaults(func=_cmd_frame)

    p = sub.add_parser("norms", help="evaluate an anisotropic norm")
    common(p)
    p.add_argument("--field", help="ALP1 snapshot, or 'random'")
    p.add_argument("--beta")
    p.add_argument("--kind", choices=["sobolev", "besov"])
    p.add_argument("--s1", type=float)
    p.add_argument("--s2", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--q1", type=float)
    p.add_argument("--q2", type=float)
    p.set_defaults(func=_cmd_norms)

    p = sub.add_parser("bench-inequalities", help="randomized inequality sweep")
    common(p)
    p.add_argument("--ineq", choices=sorted(_INEQ_RUNNERS))
    p.add_argument("--trials", type=int)
    p.add_argument("--beta")
    p.add_argument("--params", help="comma-separated k=v parameter overrides")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gronwall", help="certify the iteration bound")
    common(p)
    p.add_argument("action", nargs="?", help="certify")
    p.add_argument("--f0", type=float)
    p.add_argument("--M", dest="m_coef", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--phi", help="phi CSV (t,value) or const:<c>")
    p.add_argument("--T", dest="t_final", type=float)
    p.set_defaults(func=_cmd_gronwall)

    p = sub.add_parser("simulate", help="run the pseudo-spectral solver")
    common(p)
    p.add_argument("--tmax", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--init", choices=["abc", "taylor-green", "random-seeded", "file"])
    p.add_argument("--init-file", dest="init_file")
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--nu", type=float)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("monitor", help="criterion log along a stored trajectory")
    common(p)
    p.add_argument("--traj", help="simulate output directory")
    p.add_argument("--frame", help="frame CSV (else --beta, constant)")
    p.add_argument("--beta")
    p.add_argument("--sigma", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--residual-every", dest="residual_every", type=int)
    p.set_defaults(func=_cmd_monitor)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    file_cfg: dict = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        sub_in_file = file_cfg.pop("subcommand", None)
        if sub_in_file is not None and sub_in_file != args.subcommand:
            raise ConfigError(
                f"config file is for {sub_in_file!r} but {args.subcommand!r} was invoked"
            )
    try:
        return args.func(args, file_cfg)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
