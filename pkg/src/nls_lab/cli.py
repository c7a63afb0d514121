"""Command-line runner: config parsing, dispatch, sweep orchestration,
and deterministic persistence with a trailing manifest.

Every artifact goes under the --out prefix; the manifest (JSON, with
per-output sha256 checksums) is written last, so its presence certifies
a completed run.  Identical config and seed give byte-identical result
artifacts (fixed reduction orders, fixed float formatting).
"""

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, conformal, ground_state, spectral
from .config import SUBCOMMANDS, ConfigError, parse_config
from .evolution import EvolutionError, EvolveControls, EvolutionState, evolve
from .functionals import ModelParams, energy_coeffs
from .grid import eval_profile, field_to_bytes
from .ground_state import BracketingError, FlowOptions
from .spectral import AliasingError

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_BRACKETING = 3
EXIT_EVOLUTION = 4
EXIT_ALIASING = 5
EXIT_VERIFY = 6


def _fmt(x):
    return f"{x:.17g}"


class Emitter:
    """Writes artifacts under a prefix and records their checksums."""

    def __init__(self, prefix):
        self.prefix = prefix
        self.checksums = {}
        parent = os.path.dirname(prefix)
        if parent:
            os.makedirs(parent, exist_ok=True)

    def write(self, suffix, data):
        path = self.prefix + suffix
        payload = data.encode() if isinstance(data, str) else data
        with open(path, "wb") as f:
            f.write(payload)
        self.checksums[os.path.basename(path)] = hashlib.sha256(payload).hexdigest()
        return path

    def manifest(self, cfg, started, sound_flags):
        doc = {
            "artifact_version": __version__,
            "subcommand": cfg.subcommand,
            "config": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.values.items())},
            "started": started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
            "checksums": self.checksums,
            "sound": sound_flags,
        }
        path = self.prefix + ".manifest.json"
        with open(path, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=2)
        return path


def _flow_options(cfg):
    kw = {}
    if cfg.get("max_iters") is not None:
        kw["max_iters"] = cfg.get("max_iters")
    if cfg.get("flow_dt") is not None:
        kw["dt"] = cfg.get("flow_dt")
    if cfg.get("residual_tol") is not None:
        kw["residual_tol"] = cfg.get("residual_tol")
    return FlowOptions(**kw)


def _rng(cfg):
    seed = cfg.get("seed")
    return None if seed is None else np.random.default_rng(seed)


def _threshold_json(params, coeffs, result):
    return {
        "params": {"d": params.d, "q": params.q, "p": params.p, "regime": params.regime},
        "coeffs": {"alpha": coeffs.alpha, "beta": coeffs.beta, "gamma": coeffs.gamma},
        "lambda": ground_state.lambda_reduction(coeffs, params),
        "rho_lo": result.rho_lo,
        "rho_hi": result.rho_hi,
        "rho0_est": result.rho0_est,
        "tol_neg_rule": result.tol_neg_rule,
        "probes": [
            {
                "rho": pr.rho,
                "verdict": pr.verdict,
                "sound": pr.sound,
                "energies": [r.energy for r in pr.results],
                "classes": [r.classification for r in pr.results],
            }
            for pr in result.probes
        ],
    }


def cmd_threshold(cfg, emit, workers):
    params = cfg.model_params()
    coeffs = cfg.coeffs()
    res = ground_state.threshold_mass(
        params, coeffs, cfg.get("bracket_tol", 0.02), _flow_options(cfg), rng=_rng(cfg)
    )
    emit.write(".threshold.json", json.dumps(_threshold_json(params, coeffs, res), sort_keys=True, indent=2))
    return {"threshold": all(p.sound for p in res.probes)}


def cmd_named_thresholds(cfg, emit, workers):
    params = cfg.model_params()
    tol = cfg.get("bracket_tol", 0.005)
    opts = _flow_options(cfg)

    def run(items):
        # Fan out per triple; merge in the fixed job order for determinism.
        with ThreadPoolExecutor(max_workers=workers) as ex:
            futs = [(k, ex.submit(ground_state.threshold_mass, params, c, tol, opts)) for k, c in items]
            return {k: f.result() for k, f in futs}

    named = ground_state.named_thresholds(
        params, tol, cfg.get("A_grid"), cfg.get("eps_grid"), opts, run=run
    )
    lines = ["name,parameter,rho_lo,rho_hi,rho0_est"]
    for name, res in (("rho_E", named.rho_E), ("rho_SW", named.rho_SW), ("rho_star", named.rho_star)):
        lines.append(f"{name},,{_fmt(res.rho_lo)},{_fmt(res.rho_hi)},{_fmt(res.rho0_est)}")
    for a, res in named.rho1.items():
        lines.append(f"rho1,{_fmt(a)},{_fmt(res.rho_lo)},{_fmt(res.rho_hi)},{_fmt(res.rho0_est)}")
    for e, res in named.rho2.items():
        lines.append(f"rho2,{_fmt(e)},{_fmt(res.rho_lo)},{_fmt(res.rho_hi)},{_fmt(res.rho0_est)}")
    emit.write(".named.csv", "\n".join(lines) + "\n")
    return {"named_thresholds": True}


def cmd_groundstate(cfg, emit, workers):
    params = cfg.model_params()
    coeffs = cfg.coeffs() or energy_coeffs(params)
    res = ground_state.minimize_on_sphere(
        params, coeffs, cfg.get("rho"), _flow_options(cfg), cfg.grid()
    )
    emit.write(".groundstate.field", field_to_bytes(res.field))
    emit.write(
        ".groundstate.json",
        json.dumps(
            {
                "rho": cfg.get("rho"),
                "energy": res.energy,
                "residual": res.residual,
                "iterations": res.iterations,
                "classification": res.classification,
                "width_ratio": res.width_ratio,
                "sound": res.sound,
            },
            sort_keys=True,
            indent=2,
        ),
    )
    return {"groundstate": res.sound}


def _initial_state(cfg, model):
    params = ModelParams(
        d=cfg.get("d", 1), q=cfg.get("q", 4.0), p=cfg.get("p", 4.5),
        regime="scattering" if cfg.subcommand == "scatter" else "variational",
    )
    field = eval_profile(cfg.grid(), cfg.profile())
    field = spectral.normalize(field, cfg.get("rho", 1.0))
    return EvolutionState(field=field, clock=0.0, model=model, params=params)


def cmd_evolve(cfg, emit, workers):
    model = cfg.get("model")
    state = _initial_state(cfg, model)
    end = cfg.get("t_max") if model == "physical" else cfg.get("tau_max")
    controls = EvolveControls(
        dt_base=cfg.get("dt_base", 1e-2),
        c_adapt=cfg.get("c_adapt", 0.01),
        cadence=cfg.get("cadence", 1),
        record_A=cfg.get("A_list", ()),
        snapshot_clocks=cfg.get("snapshot_taus", ()),
        free_flow=cfg.get("free_flow", False),
    )
    traj = evolve(state, end, controls)
    emit.write(".diagnostics.csv", traj.to_csv())
    if cfg.get("snapshots", False):
        for clock, f in traj.snapshots():
            emit.write(f".snap-{_fmt(clock)}.field", field_to_bytes(f))
    return {"evolve": traj.sound}


def cmd_scatter(cfg, emit, workers):
    state = _initial_state(cfg, "conformal")
    taus = cfg.get("snapshot_taus", (0.9, 0.95, 0.99, 0.995, 0.999))
    controls = EvolveControls(
        dt_base=cfg.get("dt_base", 1e-2),
        c_adapt=cfg.get("c_adapt", 0.01),
        cadence=cfg.get("cadence", 10),
        snapshot_clocks=taus,
        free_flow=cfg.get("free_flow", False),
    )
    traj = evolve(state, max(taus), controls)
    report = conformal.scattering_probe(traj)
    emit.write(
        ".scatter.json",
        json.dumps(
            {
                "taus": list(report.taus),
                "finest_residual": report.finest_residual,
                "tol": report.tol,
                "verdict": report.verdict,
                "sound": traj.sound,
            },
            sort_keys=True,
            indent=2,
        ),
    )
    lines = ["," + ",".join(_fmt(t) for t in report.taus)]
    for i, t in enumerate(report.taus):
        lines.append(_fmt(t) + "," + ",".join(_fmt(r) for r in report.residuals[i]))
    emit.write(".residuals.csv", "\n".join(lines) + "\n")
    if report.psi_plus is not None:
        emit.write(".psi-plus.field", field_to_bytes(report.psi_plus))
    return {"scatter": traj.sound}


def cmd_verify(cfg, emit, workers):
    """Identity and conservation suite on default desk parameters."""
    from .grid import AnalyticProfile, Grid

    grid = Grid(d=cfg.get("d", 1), n=cfg.get("n", 512), L=cfg.get("L", 64.0))
    params = ModelParams(d=grid.d, q=cfg.get("q", 4.0), p=cfg.get("p", 4.5))
    psi0 = eval_profile(grid, AnalyticProfile(kind="gaussian", amplitude=1.0, width=2.0))
    checks = []

    state = EvolutionState(psi0, 0.0, "physical", params)
    traj = evolve(state, 1.0, EvolveControls(dt_base=5e-3, cadence=20))
    m = traj.series("mass")
    checks.append(("mass_conservation", float(np.max(np.abs(m - m[0])) / m[0]) < 1e-10))
    e = traj.series("energy")
    checks.append(("energy_drift_small", float(np.max(np.abs(e - e[0]))) < 1e-4))

    from .evolution import step_strang

    fwd = step_strang(state, 1e-2)
    stepper_grid = fwd.field.grid
    vals = fwd.field.values.copy()
    from .evolution import StrangStepper

    stepper = StrangStepper(stepper_grid, params, "physical")
    stepper.step(vals, 0.0, 1e-2, reverse=True)
    rev_err = float(np.max(np.abs(vals - psi0.values)))
    checks.append(("time_reversal", rev_err < 1e-10))

    pair = conformal.make_pair(psi0, 0.0)
    rep = conformal.verify_norm_identities(pair)
    checks.append(("norm_identities_t0", rep.max_residual() < 1e-12))

    u = conformal.free_propagate(psi0, 0.7)
    back = conformal.free_propagate(u, -0.7)
    checks.append(("free_unitarity", float(np.max(np.abs(back.values - psi0.values))) < 1e-13))

    lines = []
    for name, ok in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
        print(lines[-1])
    emit.write(".verify.txt", "\n".join(lines) + "\n")
    if not all(ok for _, ok in checks):
        raise VerifyFailure("verification suite reported failures")
    return {"verify": True}


class VerifyFailure(RuntimeError):
    pass


def cmd_sweep(cfg, emit, workers):
    """Closed-form ordering sweep over an admissible (q, p) grid."""
    d = cfg.get("d", 1)
    nq_pts = cfg.get("sweep.q_count", 10)
    np_pts = cfg.get("sweep.p_count", 10)
    lo, hi = 1 + 2 / d, 1 + 4 / d
    qs = np.linspace(lo + 0.05 * (hi - lo), hi - 0.1 * (hi - lo), nq_pts)
    rows = []
    for q in qs:
        for p in np.linspace(q + 0.05 * (hi - q), hi - 0.02 * (hi - lo), np_pts):
            params = ModelParams(d=d, q=float(q), p=float(p), regime="scattering")
            rep = ground_state.ordering_check(params)
            m1, m2 = rep.margins
            rows.append((q, p, rep.lambda_star, rep.lambda_sw, rep.lambda_E, m1, m2))

    def fmt_row(r):
        return ",".join(_fmt(v) for v in r)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            formatted = list(ex.map(fmt_row, rows))
    else:
        formatted = [fmt_row(r) for r in rows]
    lines = ["q,p,lambda_star,lambda_sw,lambda_E,margin1,margin2"] + formatted
    emit.write(".sweep.csv", "\n".join(lines) + "\n")
    return {"sweep": all(r[5] > 0 and r[6] > 0 for r in rows)}


_HANDLERS = {
    "threshold": cmd_threshold,
    "named-thresholds": cmd_named_thresholds,
    "groundstate": cmd_groundstate,
    "evolve": cmd_evolve,
    "scatter": cmd_scatter,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="nls-lab", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--workers", type=int, default=None)
    args = parser.parse_args(argv)

    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("NLS_LAB_WORKERS", "1"))
    workers = max(1, workers)

    try:
        with open(args.config) as f:
            text = f.read()
        cfg = parse_config(text, args.subcommand)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    prefix = args.out or cfg.get("out_prefix") or "nls-lab-run"
    emit = Emitter(prefix)
    started = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    try:
        sound = _HANDLERS[args.subcommand](cfg, emit, workers)
    except BracketingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BRACKETING
    except EvolutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVOLUTION
    except AliasingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALIASING
    except VerifyFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    emit.manifest(cfg, started, sound)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
