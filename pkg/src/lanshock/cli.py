"""Command-line front end: orchestrates the pipelines and writes artifacts.

Subcommands: transport, ns-shock, kinetic-shock, kawashima, residual-scan,
selftest. Outputs are deterministic given (config, seed); floats are printed
with 17 significant digits; the only timestamp lives in the run manifest.
Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 failed selftest gate.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import collision, hydro, kawashima, kinetic, ns_shock
from .basis import build_basis

FMT = "%.17g"


@dataclass
class RunConfig:
    eps: float = 0.02
    eps_list: tuple[float, ...] = ()
    gamma: float = 5.0 / 3.0
    N_v: int = 4
    n_q: int = 12
    N_x: int = 1501
    X_mult: float = 0.0  # 0 means automatic (max(25, 20 alpha))
    kappa: float = 0.0
    eta_ell: float = 0.0
    q0: float = 0.5
    delta: float = 0.05
    theta_sweep: tuple[float, float, float] = (0.5, 2.0, 0.1)
    tol_fix: float = 1e-10
    tol_orth: float = 1e-9
    tol_cons: float = 1e-8
    cache_dir: str = ""
    out_dir: str = "out"
    seed: int = 0

    def validate(self):
        if not (0.0 < self.eps <= 0.1):
            raise ConfigError(f"eps = {self.eps} outside (0, 0.1]")
        for e in self.eps_list:
            if not (0.0 < e <= 0.1):
                raise ConfigError(f"eps_list entry {e} outside (0, 0.1]")
        if not (0.0 <= self.q0 < 1.0):
            raise ConfigError(f"q0 = {self.q0} outside [0, 1)")
        if self.gamma <= 1.0:
            raise ConfigError("gamma must exceed 1")
        for name in ("tol_fix", "tol_orth", "tol_cons"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.N_v < 3:
            raise ConfigError("N_v must be at least 3 (Burnett functions are cubic)")
        if self.n_q < self.N_v + 4:
            raise ConfigError("n_q must be at least N_v + 4")

    def resolved_cache_dir(self) -> str | None:
        env = os.environ.get("LSHK_CACHE")
        d = self.cache_dir or env
        return d if d else None


class ConfigError(ValueError):
    pass


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name in ("eps_list",):
        return tuple(float(t) for t in raw.replace(",", " ").split())
    if name == "theta_sweep":
        parts = raw.replace(":", " ").replace(",", " ").split()
        if len(parts) != 3:
            raise ConfigError("theta_sweep wants start:stop:step")
        return tuple(float(p) for p in parts)
    if name in ("N_v", "n_q", "N_x", "seed"):
        return int(raw)
    if name in ("cache_dir", "out_dir"):
        return raw
    return float(raw)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            setattr(cfg, key, _parse_value(key, raw))
    for key, val in overrides.items():
        if val is None:
            continue
        setattr(cfg, key, _parse_value(key, str(val)) if isinstance(val, str) else val)
    cfg.validate()
    return cfg


def _write_csv(path: Path, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([FMT % v if isinstance(v, float) else v for v in row])


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)

    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))

    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n")


def _manifest(cfg: RunConfig, extra: dict) -> dict:
    out = {"config": asdict(cfg), "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
    out.update(extra)
    return out


def _setup(cfg: RunConfig):
    basis = build_basis(cfg.N_v, cfg.n_q, tol_orth=cfg.tol_orth)
    ops = collision.assemble_operators(
        basis, kappa=cfg.kappa, cache_dir=cfg.resolved_cache_dir(), tol_cons=cfg.tol_cons
    )
    law = ns_shock.TransportLaw.from_operators(ops, cfg.kappa)
    return basis, ops, law


def _profile(cfg: RunConfig, law, eps=None):
    return ns_shock.solve_profile(
        eps if eps is not None else cfg.eps,
        law,
        X_mult=(cfg.X_mult or None),
        N_x=cfg.N_x,
        gamma=cfg.gamma,
    )


def cmd_transport(cfg: RunConfig, out: Path) -> dict:
    basis, ops, _ = _setup(cfg)
    t0, t1, dt = cfg.theta_sweep
    thetas = np.arange(t0, t1 + 0.5 * dt, dt)
    rows = []
    for th in thetas:
        tc = hydro.transport_coefficients(float(th), cfg.kappa, ops)
        rows.append([float(th), tc.mu, tc.lambda_v, tc.kappa_th, cfg.N_v, cfg.kappa])
    _write_csv(out / "transport.csv", ["theta", "mu", "lambda", "kappa_th", "N_v", "kappa_reg"], rows)
    tc1 = hydro.transport_coefficients(1.0, cfg.kappa, ops)
    summary = {
        "mu_1": tc1.mu,
        "lambda_1": tc1.lambda_v,
        "kappa_th_1": tc1.kappa_th,
        "alpha": hydro.alpha_constant(tc1, cfg.gamma),
        "burnett_orthogonality": hydro.burnett_orthogonality(ops, cfg.kappa),
        "burnett_identity_defect": hydro.burnett_identity_defect(ops, cfg.kappa),
        "all_positive": bool(min(r[1] for r in rows) > 0 and min(r[2] for r in rows) > 0 and min(r[3] for r in rows) > 0),
    }
    _write_json(out / "transport_summary.json", summary)
    return summary


def _profile_rows(prof: ns_shock.ShockProfile):
    rows = []
    for j, x in enumerate(prof.grid):
        U = prof.U[j]
        u1, th = prof.w[j]
        rows.append([float(x), U[0], U[1], U[2], U[3], U[4], float(u1), float(th), float(prof.eta[j])])
    return rows


def cmd_ns_shock(cfg: RunConfig, out: Path) -> dict:
    _, ops, law = _setup(cfg)
    prof = _profile(cfg, law)
    _write_csv(
        out / "profile.csv",
        ["x", "rho", "m1", "m2", "m3", "E", "u1", "theta", "eta"],
        _profile_rows(prof),
    )
    summary = {
        "eps": prof.eps,
        "s": prof.s,
        "eta_bar": prof.eta_bar,
        "eta_bar_burgers": -2.0 * prof.eps / prof.Lambda,
        "alpha": prof.alpha,
        "Lambda": prof.Lambda,
        "decay": prof.decay_fit,
        "collocation_residual": prof.collocation_residual,
        "endpoint_gap": prof.endpoint_gap,
    }
    _write_json(out / "ns_shock_summary.json", summary)
    return summary


def cmd_residual_scan(cfg: RunConfig, out: Path) -> dict:
    _, ops, law = _setup(cfg)
    eps_list = cfg.eps_list or (0.02, 0.04, 0.08)
    rows = []
    norms_per_eps = {}
    for eps in eps_list:
        prof = _profile(cfg, law, eps)
        apx = kinetic.build_approximate_solution(prof, ops, kappa=cfg.kappa)
        norms = kinetic.NormSuite(ops, apx.grid, eps, cfg.q0, cfg.delta)
        rep = kinetic.residual_E_NS(apx, norms)
        norms_per_eps[eps] = rep.norm_Y0
        rows.append([eps, rep.norm_Y0, rep.norm_Y0_weighted, rep.norm_Y0_stretched,
                     rep.route_disagreement, rep.microscopic_defect])
    es = sorted(norms_per_eps)
    slope = float(np.polyfit(np.log(es), np.log([norms_per_eps[e] for e in es]), 1)[0])
    _write_csv(
        out / "residual_scan.csv",
        ["eps", "norm_Y0", "norm_Y0_weighted", "norm_Y0_stretched", "route_disagreement", "microscopic_defect"],
        rows,
    )
    summary = {"slope": slope, "eps_list": list(es), "norms": {str(e): norms_per_eps[e] for e in es}}
    _write_json(out / "residual_scan.json", summary)
    return summary


def cmd_kinetic_shock(cfg: RunConfig, out: Path) -> dict:
    _, ops, law = _setup(cfg)
    prof = _profile(cfg, law)
    apx = kinetic.build_approximate_solution(prof, ops, kappa=cfg.kappa)
    norms = kinetic.NormSuite(ops, apx.grid, cfg.eps, cfg.q0, cfg.delta)
    rep = kinetic.residual_E_NS(apx, norms)
    opA = kinetic.assemble_steady_operator(apx, eta_ell=cfg.eta_ell)
    fp = kinetic.nonlinear_solve(apx, opA, rep.z, norms, tol_fix=cfg.tol_fix)
    ends = kinetic.end_state_moments(apx, fp.f_star)
    dec = kinetic.decay_weight_check(norms, fp.f_star, cfg.delta)

    _write_csv(
        out / "profile.csv",
        ["x", "rho", "m1", "m2", "m3", "E", "u1", "theta", "eta"],
        _profile_rows(prof),
    )
    I5 = hydro.moment_rows(ops.basis)
    F = apx.f_NS + fp.f_star
    rows = []
    for j, x in enumerate(prof.grid):
        U = I5 @ F[j]
        rows.append([float(x), *(float(u) for u in U), float(np.linalg.norm(fp.f_star[j]))])
    _write_csv(
        out / "solution_moments.csv",
        ["x", "rho", "m1", "m2", "m3", "E", "corrector_norm"],
        rows,
    )
    _write_json(
        out / "residual.json",
        {
            "norm_Y0": rep.norm_Y0,
            "norm_Y0_weighted": rep.norm_Y0_weighted,
            "norm_Y0_stretched": rep.norm_Y0_stretched,
            "route_disagreement": rep.route_disagreement,
            "microscopic_defect": rep.microscopic_defect,
        },
    )
    fstar = kinetic.KineticField.wrap(fp.f_star, apx)
    summary = {
        "eps": cfg.eps,
        "field_metadata": {
            "eps": fstar.eps,
            "N_v": fstar.N_v,
            "N_x": fstar.N_x,
            "kappa": fstar.kappa,
        },
        "iterations": fp.iterations,
        "converged": fp.converged,
        "contraction_factors": fp.contraction_factors,
        "corrector_amplitude_over_eps2": fp.ball_radius_ratio,
        "corrector_X0_over_eps2": fp.x0_norm_ratio,
        "end_state_errors": [ends["err_left"], ends["err_right"]],
        "decay_weight_check": dec,
        "approx_tail_fraction": apx.tail_fraction,
    }
    _write_json(out / "manifest.json", _manifest(cfg, {"summary": summary}))
    return summary


def cmd_kawashima(cfg: RunConfig, out: Path) -> dict:
    import hashlib

    _, ops, _ = _setup(cfg)
    results = {}
    # oscillator example
    inp = kawashima.oscillator_example()
    comp = kawashima.build_compensator(inp)
    taus = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
    table = kawashima.steady_resolvent_bound(inp, taus)
    rates = {t: kawashima.time_decay_demo(inp, t)["rate"] for t in (0.1, 0.2, 1.0)}
    results["oscillator"] = {
        "input_hash": hashlib.sha256(
            np.ascontiguousarray(inp.A).tobytes() + np.ascontiguousarray(inp.L).tobytes()
        ).hexdigest()[:16],
        "K": [[str(z) for z in row] for row in np.round(comp.K, 12)],
        "delta": comp.delta_coer,  # the certified minimum generalized eigenvalue
        "C": comp.C_damp,
        "gammas": comp.gammas,
        "resolvent_table": table,
        "decay_rates": {str(k): v for k, v in rates.items()},
    }
    # 9-moment Landau block
    B9, comp9 = kinetic.m9_compensator(ops)
    h = hashlib.sha256(np.ascontiguousarray(B9).tobytes()).hexdigest()[:16]
    results["m9"] = {
        "basis_hash": h,
        "delta": comp9.delta_coer,
        "C": comp9.C_damp,
        "gammas": comp9.gammas,
        "chain_dims": comp9.chain_dims,
    }
    _write_json(out / "kawashima_certificates.json", results)
    return {
        "oscillator_delta": comp.delta_coer,
        "m9_delta": comp9.delta_coer,
    }


def cmd_selftest(cfg: RunConfig, out: Path) -> dict:
    """Compressed invariant suite; returns per-gate booleans (exit 4 on failure)."""
    report = {}
    basis, ops, law = _setup(cfg)
    kv = ops.kernel_vectors
    # conservation and L structure
    viol = np.einsum("kc,cab->kab", kv, ops.Gamma)
    num = np.sqrt(np.sum(viol**2, axis=0))
    den = np.sqrt(np.sum(ops.Gamma**2, axis=0))
    report["conservation"] = bool(np.max(num - (1e-8 * den + 1e-12)) <= 0)
    w = np.linalg.eigvalsh(ops.L)
    report["L_psd_kernel"] = bool(
        np.max(np.abs(ops.L - ops.L.T)) <= 1e-10
        and w[0] >= -1e-8
        and np.sum(np.abs(w) < 1e-8 * w[-1]) == 5
    )
    # hydro closed forms
    UL = hydro.reference_state(cfg.gamma).vector()
    es = hydro.eigensystem(UL, cfg.gamma)
    hp = hydro.hugoniot_solve(UL, cfg.eps, cfg.gamma)
    report["hydro"] = bool(
        abs(es.lambdas[4] - math.sqrt(cfg.gamma)) < 1e-12 and hp.residual <= 1e-12
    )
    # transport positivity
    tc = hydro.transport_coefficients(1.0, cfg.kappa, ops)
    report["transport_positive"] = bool(min(tc.mu, tc.lambda_v, tc.kappa_th) > 0)
    # profile
    prof = _profile(cfg, law)
    report["profile"] = bool(
        prof.collocation_residual < 1e-8 and np.all(np.diff(prof.eta) > 0)
    )
    # kinetic linear gate
    apx = kinetic.build_approximate_solution(prof, ops, kappa=cfg.kappa)
    norms = kinetic.NormSuite(ops, apx.grid, cfg.eps, cfg.q0, cfg.delta)
    rep = kinetic.residual_E_NS(apx, norms)
    opA = kinetic.assemble_steady_operator(apx, eta_ell=cfg.eta_ell)
    zero = kinetic.solve_linear(opA, np.zeros_like(rep.z), 0.0)
    report["linear_uniqueness"] = bool(np.max(np.abs(zero.f)) == 0.0)
    fp = kinetic.nonlinear_solve(apx, opA, rep.z, norms, tol_fix=cfg.tol_fix)
    report["fixed_point"] = bool(
        fp.converged and max(fp.contraction_factors) <= 0.5
    )
    report["all"] = bool(all(v for v in report.values()))
    _write_json(out / "selftest.json", _manifest(cfg, {"report": report}))
    return report


COMMANDS = {
    "transport": cmd_transport,
    "ns-shock": cmd_ns_shock,
    "kinetic-shock": cmd_kinetic_shock,
    "kawashima": cmd_kawashima,
    "residual-scan": cmd_residual_scan,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lanshock", description=__doc__)
    p.add_argument("subcommand", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key = value config file ('#' comments)")
    p.add_argument("--eps", type=float)
    p.add_argument("--eps-list", dest="eps_list", help="comma-separated eps values")
    p.add_argument("--gamma", type=float)
    p.add_argument("--N_v", type=int)
    p.add_argument("--n_q", type=int)
    p.add_argument("--N_x", type=int)
    p.add_argument("--X_mult", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--eta_ell", type=float)
    p.add_argument("--q0", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--theta", dest="theta_sweep", help="theta sweep start:stop:step")
    p.add_argument("--seed", type=int)
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--out-dir", dest="out_dir")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("subcommand", "config") and v is not None
    }
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)
    np.random.seed(cfg.seed)
    try:
        result = COMMANDS[args.subcommand](cfg, out)
    except Exception as exc:  # numerical failure
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    if args.subcommand == "selftest" and not result.get("all", False):
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
