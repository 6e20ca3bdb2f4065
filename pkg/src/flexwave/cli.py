"""Command-line front end: batch computations persisted as CSV plus a JSON
sidecar per run.

Commands
--------
dispersion   table of (k, D, omega, omega', omega'') over requested k and D
nls          envelope-equation coefficients and focusing flags over a D grid
resonance    resonant rigidity D for requested modes K
collisions   flat-water eigenvalue collisions for requested (D, c, h)
branch       bifurcation branch per ice model, with the asymptotic overlay
stability    Floquet spectra and instability reports for branch points
compare      joint FFH scatter and asymptotic overlay curves

All numeric CSV payloads are written with 17 significant digits so reloaded
values round-trip exactly.  Exit codes: 0 success, 2 configuration error,
3 numerical failure (partial results are persisted alongside an error
record).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .core import INFINITE_DEPTH, IceModel, NonpositiveRadicand, PhysicalParams, SpectralProfile, TravelingWave
from .solver import (
    BifurcationBranch,
    NoConvergence,
    SingularJacobian,
    SolverConfig,
    StepUnderflow,
    bifurcation_speed,
    branch_direction,
    continue_branch,
    residual,
)
from .stability import EigSolverFailure, classify, nls_overlay, sweep_floquet
from .theory import (
    FiniteDepthUnsupported,
    NoPositiveRoot,
    WiltonPole,
    c_nls,
    dispersion,
    find_collisions,
    nls_coefficients,
    resonant_rigidity,
)

NUMERICAL_ERRORS = (
    NonpositiveRadicand,
    NoConvergence,
    SingularJacobian,
    StepUnderflow,
    EigSolverFailure,
    WiltonPole,
    FiniteDepthUnsupported,
    NoPositiveRoot,
)


class ConfigError(ValueError):
    """Invalid run configuration (bad flag value, unwritable output dir, ...)."""


def fmt(x) -> str:
    """17-significant-digit decimal format: lossless float round trip."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_sidecar(path: Path, config: dict, extra: dict | None = None) -> None:
    payload = {"version": __version__, "config": config}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def parse_depth(text: str) -> float:
    if text.strip().lower() in ("inf", "infinite", "infinity"):
        return INFINITE_DEPTH
    return float(text)


def parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def load_config_file(path: str) -> dict[str, str]:
    """Flat key-value config: one `key = value` per line, `#` comments."""
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def models_from(name: str) -> list[IceModel]:
    table = {
        "linear": [IceModel.LINEAR_BIHARMONIC],
        "nonlinear": [IceModel.NONLINEAR_COSSERAT],
        "both": [IceModel.LINEAR_BIHARMONIC, IceModel.NONLINEAR_COSSERAT],
    }
    if name not in table:
        raise ConfigError(f"unknown model {name!r}; expected linear, nonlinear or both")
    return table[name]


def worker_count() -> int:
    raw = os.environ.get("FLEXWAVE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexwave",
        description="Periodic flexural-gravity waves: branches, spectra and asymptotic comparisons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="key=value config file; command-line flags take precedence")
        p.add_argument("--g", type=float, default=None, help="gravitational acceleration (default 1)")
        p.add_argument("--h", type=str, default=None, help="fluid depth, or 'inf'")
        p.add_argument("--D", type=str, default=None, help="flexural rigidity (list allowed where meaningful)")
        p.add_argument("--model", type=str, default=None, help="linear, nonlinear or both")
        p.add_argument("--modes", type=int, default=None, help="initial cosine mode count N")
        p.add_argument("--max-modes", type=int, default=None, help="cap for adaptive mode doubling")
        p.add_argument("--mu-count", type=int, default=None, help="number of Floquet exponents in a sweep")
        p.add_argument("--a1-max", type=float, default=None, help="target first-mode amplitude")
        p.add_argument("--a1-step", type=float, default=None, help="continuation step in a1")
        p.add_argument("--out", type=str, default=None, help="output directory")

    for name in ("dispersion", "nls", "resonance", "collisions", "branch", "stability", "compare"):
        p = sub.add_parser(name)
        common(p)
        if name == "dispersion":
            p.add_argument("--k-list", type=str, default="1")
        if name == "nls":
            p.add_argument("--D-grid", type=str, default=None, help="min max count")
        if name == "resonance":
            p.add_argument("--K-list", type=str, default="7 10")
        if name == "collisions":
            p.add_argument("--c", type=float, default=None, help="frame speed (default: bifurcation speed)")
            p.add_argument("--m-range", type=int, default=10)
            p.add_argument("--mu-grid", type=int, default=2001)
        if name == "branch":
            p.add_argument("--resume", type=str, default=None, help="prior branch CSV to continue from")
        if name == "stability":
            p.add_argument("--a1-list", type=str, default=None, help="branch amplitudes to analyze")
            p.add_argument("--floquet-modes", type=int, default=None)
        if name == "compare":
            p.add_argument("--a1-list", type=str, default=None)
            p.add_argument("--floquet-modes", type=int, default=None)
            p.add_argument(
                "--overlay-sign",
                choices=("vg_minus_c", "c_minus_vg"),
                default="vg_minus_c",
                help="vertical sign convention of the asymptotic overlay",
            )
    return parser


def merge_config(args: argparse.Namespace) -> dict:
    """File values first, command-line overrides on top, then defaults."""
    file_values = load_config_file(args.config) if args.config else {}
    merged: dict = {}
    for key, value in file_values.items():
        merged[key] = value
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        merged[key] = value
    merged.setdefault("g", 1.0)
    merged.setdefault("h", "inf")
    merged.setdefault("model", "both")
    merged.setdefault("out", "flexwave-out")
    merged.setdefault("mu_count", 401)
    return merged


def params_from(cfg: dict, d_value: float | None = None) -> PhysicalParams:
    g = float(cfg.get("g", 1.0))
    h = parse_depth(str(cfg.get("h", "inf")))
    if d_value is None:
        d_raw = cfg.get("D", "0")
        d_list = parse_float_list(str(d_raw))
        if len(d_list) != 1:
            raise ConfigError("this command needs exactly one value of D")
        d_value = d_list[0]
    try:
        return PhysicalParams(g=g, h=h, D=d_value)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def solver_config_from(cfg: dict) -> SolverConfig:
    kwargs = {}
    if "modes" in cfg:
        kwargs["n_modes"] = int(cfg["modes"])
        kwargs["max_modes"] = max(512, kwargs["n_modes"])
    if "max_modes" in cfg:
        kwargs["max_modes"] = int(cfg["max_modes"])
    if "a1_step" in cfg:
        kwargs["amplitude_step"] = float(cfg["a1_step"])
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def out_dir(cfg: dict) -> Path:
    path = Path(str(cfg["out"]))
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


# ---------------------------------------------------------------- commands


def cmd_dispersion(cfg: dict) -> None:
    out = out_dir(cfg)
    ks = parse_float_list(str(cfg.get("k_list", "1")))
    d_values = parse_float_list(str(cfg.get("D", "0")))
    rows = []
    for d in d_values:
        params = params_from(cfg, d_value=d)
        for k in ks:
            omega = dispersion(k, params)
            # derivatives by central differences; valid at any depth
            dk = 1e-5 * max(1.0, abs(k))
            wp = (dispersion(k + dk, params) - dispersion(k - dk, params)) / (2 * dk)
            wpp = (dispersion(k + dk, params) - 2 * omega + dispersion(k - dk, params)) / dk**2
            rows.append((k, d, omega, wp, wpp))
    write_csv(out / "dispersion.csv", ["k", "D", "omega", "omega_p", "omega_pp"], rows)
    write_sidecar(out / "dispersion.meta.json", cfg)


def cmd_nls(cfg: dict) -> None:
    out = out_dir(cfg)
    if cfg.get("D_grid"):
        lo, hi, count = parse_float_list(str(cfg["D_grid"]))
        d_values = np.linspace(lo, hi, int(count))
    else:
        d_values = np.array(parse_float_list(str(cfg.get("D", "0 0.12 25"))))
    rows = []
    for d in d_values:
        params = params_from(cfg, d_value=float(d))
        try:
            lin = nls_coefficients(IceModel.LINEAR_BIHARMONIC, 1, params)
            tol = nls_coefficients(IceModel.NONLINEAR_COSSERAT, 1, params)
            rows.append(
                (d, lin.omega, lin.omega_p, lin.omega_pp, lin.M, tol.M,
                 lin.focusing, tol.focusing, 0)
            )
        except WiltonPole:
            rows.append((d, math.nan, math.nan, math.nan, math.nan, math.nan, 0, 0, 1))
    write_csv(
        out / "nls.csv",
        ["D", "omega", "omega_p", "omega_pp", "M_lin", "M_tol", "focusing_lin", "focusing_tol", "wilton_pole"],
        rows,
    )
    write_sidecar(out / "nls.meta.json", cfg)


def cmd_resonance(cfg: dict) -> None:
    out = out_dir(cfg)
    ks = parse_int_list(str(cfg.get("K_list", "7 10")))
    params = params_from(cfg, d_value=0.0)
    rows = []
    for k in ks:
        rows.append((k, params.h, resonant_rigidity(k, params)))
    write_csv(out / "resonance.csv", ["K", "h", "D"], rows)
    write_sidecar(out / "resonance.meta.json", cfg)


def cmd_collisions(cfg: dict) -> None:
    out = out_dir(cfg)
    params = params_from(cfg)
    c = float(cfg["c"]) if cfg.get("c") is not None else bifurcation_speed(params)
    records = find_collisions(
        params, c, mu_grid=int(cfg.get("mu_grid", 2001)), m_range=int(cfg.get("m_range", 10))
    )
    rows = [(r.mu, r.m1, r.s1, r.m2, r.s2, r.lam.real, r.lam.imag) for r in records]
    write_csv(out / "collisions.csv", ["mu", "m1", "s1", "m2", "s2", "re_lambda", "im_lambda"], rows)
    write_sidecar(out / "collisions.meta.json", cfg, {"c": c, "count": len(records)})


def branch_file_names(model: IceModel) -> tuple[str, str, str]:
    tag = model.value
    return f"branch_{tag}.csv", f"branch_{tag}.meta.json", f"branch_nls_{tag}.csv"


def save_branch(out: Path, branch: BifurcationBranch, cfg: dict, solver_cfg: SolverConfig) -> None:
    csv_name, meta_name, nls_name = branch_file_names(branch.model)
    n_max = max((w.profile.n_modes for w in branch.points), default=0)
    header = ["c"] + [f"a{j}" for j in range(1, n_max + 1)]
    rows = []
    meta_points = []
    for wave in branch.points:
        coeffs = np.zeros(n_max)
        coeffs[: wave.profile.n_modes] = wave.profile.coeffs
        rows.append((wave.c, *coeffs))
        z = np.concatenate(([wave.c], wave.profile.coeffs[1:]))
        res = residual(z, wave.a1, branch.params, branch.model, solver_cfg)
        meta_points.append(
            {"a1": wave.a1, "c": wave.c, "n_modes": wave.profile.n_modes,
             "residual_inf": float(np.max(np.abs(res)))}
        )
    write_csv(out / csv_name, header, rows)
    extra = {
        "params": {"g": branch.params.g, "h": branch.params.h, "D": branch.params.D},
        "model": branch.model.value,
        "solver": asdict(solver_cfg),
        "points": meta_points,
    }
    if len(branch.points) >= 3:
        extra["direction"] = branch_direction(branch).value
    write_sidecar(out / meta_name, cfg, extra)

    if branch.params.infinite_depth:
        try:
            coeffs = nls_coefficients(branch.model, 1, branch.params)
            nls_rows = [(wave.a1, c_nls(wave.a1 / 2.0, coeffs, branch.params)) for wave in branch.points]
            write_csv(out / nls_name, ["a1", "c_nls"], nls_rows)
        except WiltonPole:
            pass


def load_branch(csv_path: str | Path) -> BifurcationBranch:
    """Reload a persisted branch; params/model come from the sidecar."""
    csv_path = Path(csv_path)
    meta_path = csv_path.parent / (csv_path.stem + ".meta.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    params = PhysicalParams(
        g=float(meta["params"]["g"]),
        h=float(meta["params"]["h"]),
        D=float(meta["params"]["D"]),
    )
    model = IceModel(meta["model"])
    data = np.genfromtxt(csv_path, delimiter=",", skip_header=1, ndmin=2)
    points = []
    for row in data:
        c, coeffs = row[0], row[1:]
        n = np.max(np.nonzero(coeffs)) + 1 if np.any(coeffs) else 1
        points.append(
            TravelingWave(profile=SpectralProfile(coeffs[:n]), c=float(c), params=params, model=model)
        )
    return BifurcationBranch(params=params, model=model, points=points)


def _compute_branch(cfg: dict, model: IceModel, solver_cfg: SolverConfig) -> BifurcationBranch:
    params = params_from(cfg)
    a1_max = float(cfg.get("a1_max", 0.01))
    resume = cfg.get("resume")
    if resume:
        prior = load_branch(resume)
        branch = continue_branch(prior.params, prior.model, a1_max, solver_cfg, start=prior.points[-1])
        branch.points = list(prior.points) + branch.points
        return branch
    return continue_branch(params, model, a1_max, solver_cfg)


def cmd_branch(cfg: dict) -> None:
    out = out_dir(cfg)
    solver_cfg = solver_config_from(cfg)
    for model in models_from(str(cfg["model"])):
        try:
            branch = _compute_branch(cfg, model, solver_cfg)
        except StepUnderflow as exc:
            save_branch(out, exc.branch, cfg, solver_cfg)
            raise
        save_branch(out, branch, cfg, solver_cfg)


def _select_waves(branch: BifurcationBranch, cfg: dict) -> list[TravelingWave]:
    if cfg.get("a1_list"):
        targets = parse_float_list(str(cfg["a1_list"]))
        return [min(branch.points, key=lambda w: abs(w.a1 - t)) for t in targets]
    return [branch.points[-1]]


def cmd_stability(cfg: dict) -> None:
    out = out_dir(cfg)
    solver_cfg = solver_config_from(cfg)
    mu_count = int(cfg.get("mu_count", 401))
    fl_modes = int(cfg["floquet_modes"]) if cfg.get("floquet_modes") else None
    for model in models_from(str(cfg["model"])):
        branch = _compute_branch(cfg, model, solver_cfg)
        save_branch(out, branch, cfg, solver_cfg)
        reports = []
        for idx, wave in enumerate(_select_waves(branch, cfg)):
            spectrum = sweep_floquet(wave, mu_count, n_modes=fl_modes, workers=worker_count())
            mus, lams = spectrum.flattened()
            write_csv(
                out / f"spectrum_{model.value}_{idx}.csv",
                ["mu", "re_lambda", "im_lambda"],
                zip(mus, lams.real, lams.imag),
            )
            report = classify(spectrum)
            reports.append(
                {
                    "a1": wave.a1,
                    "max_growth": report.max_growth,
                    "argmax_mu": report.argmax_mu,
                    "clusters": [
                        {
                            "kind": c.kind.value,
                            "mu_interval": list(c.mu_interval),
                            "centroid": [c.centroid.real, c.centroid.imag],
                            "max_growth": c.max_growth,
                        }
                        for c in report.clusters
                    ],
                    "failed_mu": [mu for mu, _ in spectrum.failures],
                }
            )
        write_sidecar(out / f"stability_{model.value}.meta.json", cfg, {"reports": reports})


def cmd_compare(cfg: dict) -> None:
    out = out_dir(cfg)
    solver_cfg = solver_config_from(cfg)
    mu_count = int(cfg.get("mu_count", 401))
    fl_modes = int(cfg["floquet_modes"]) if cfg.get("floquet_modes") else None
    convention = str(cfg.get("overlay_sign", "vg_minus_c"))
    for model in models_from(str(cfg["model"])):
        branch = _compute_branch(cfg, model, solver_cfg)
        save_branch(out, branch, cfg, solver_cfg)
        for idx, wave in enumerate(_select_waves(branch, cfg)):
            spectrum = sweep_floquet(wave, mu_count, n_modes=fl_modes, workers=worker_count())
            mus, lams = spectrum.flattened()
            write_csv(
                out / f"compare_ffh_{model.value}_{idx}.csv",
                ["mu", "re_lambda", "im_lambda"],
                zip(mus, lams.real, lams.imag),
            )
            coeffs = nls_coefficients(model, 1, branch.params)
            curve = nls_overlay(coeffs, wave.a1 / 2.0, wave.c, mu_grid=mu_count, convention=convention)
            write_csv(
                out / f"compare_nls_{model.value}_{idx}.csv",
                ["re_lambda", "im_lambda"],
                curve,
            )
        write_sidecar(out / f"compare_{model.value}.meta.json", cfg, {"overlay_sign": convention})


COMMANDS = {
    "dispersion": cmd_dispersion,
    "nls": cmd_nls,
    "resonance": cmd_resonance,
    "collisions": cmd_collisions,
    "branch": cmd_branch,
    "stability": cmd_stability,
    "compare": cmd_compare,
}


def write_error_record(cfg: dict, exc: Exception) -> None:
    try:
        out = Path(str(cfg.get("out", "flexwave-out")))
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "error.json", "w") as fh:
            json.dump({"error": type(exc).__name__, "message": str(exc)}, fh, indent=2)
            fh.write("\n")
    except OSError:
        pass


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        cfg = merge_config(args)
        command = COMMANDS[args.command]
    except ConfigError as exc:
        print(f"flexwave: config error: {exc}", file=sys.stderr)
        return 2
    try:
        command(cfg)
    except ConfigError as exc:
        print(f"flexwave: config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"flexwave: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        write_error_record(cfg, exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
