"""Experiment driver.

    flockuq <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

Subcommands: simulate, flocking, sensitivity, stability, uq, gronwall,
verify-all.  Identical config and seed produce byte-identical artifacts;
verification subcommands exit nonzero and print a machine-readable failure
JSON when an assertion breaks.  Single-sample subcommands run at z = 0.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance, artifacts, backend
from .config import ConfigError, ExperimentConfig, default_config, parse_config
from .dynamics import integrate
from .flocking import expected_flocking
from .runs import (
    family_from_config,
    kernel_from_config,
    rule_from_config,
    run_flocking_batch,
    run_jet_batch,
    rng_from,
    seed_tree,
    LANE_PERTURBATION,
)
from .sensitivity import JetEnsemble, finite_difference_check, integrate_jets, sensitivity_norms
from .stability import paired_run, velocity_perturbation, verify_hk_stability, verify_l2_stability
from .uq import RandomFieldSamples, expectation, hk_norm, l2pi_norm
from .kernels import certify

SUBCOMMANDS = ("simulate", "flocking", "sensitivity", "stability", "uq", "gronwall", "verify-all")


def _fail(payload: dict) -> int:
    print(json.dumps({"failed": payload}, sort_keys=True, default=str))
    return 1


def _cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    kernel = kernel_from_config(cfg)
    family = family_from_config(cfg)
    traj = integrate(family.ensemble(0.0), kernel, cfg.integrator.T, cfg.integrator.dt,
                     cfg.integrator.save_every)
    artifacts.write_trajectory_csv(out / "trajectory.csv", traj)
    return 0


def _cmd_flocking(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    kernel = kernel_from_config(cfg)
    family = family_from_config(cfg)
    rule = rule_from_config(cfg)
    nodes = run_flocking_batch(kernel, family, rule, cfg.integrator.T, cfg.integrator.dt,
                               cfg.integrator.save_every, threads=threads)
    expected = None
    if kernel.psi_lower > 0:
        expected = expected_flocking(nodes, rule, psi_lower=kernel.psi_lower)
    payload = {
        "nodes": [n.certificate.to_dict() for n in nodes],
        "expected": expected.to_dict() if expected else None,
    }
    artifacts.write_json(out / "flocking.json", payload, "flocking")
    bad = [n.z for n in nodes if n.report is not None and not n.report.passed]
    if expected is not None and not expected.passed:
        bad.append("expected-envelope")
    if bad:
        return _fail({"command": "flocking", "violations": bad})
    return 0


def _cmd_sensitivity(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    kernel = kernel_from_config(cfg)
    family = family_from_config(cfg)
    m = cfg.sensitivity.order
    jt = integrate_jets(JetEnsemble.from_family(family, 0.0, m), kernel,
                        cfg.integrator.T, cfg.integrator.dt, cfg.integrator.save_every)
    artifacts.write_jet_csv(out / "jets.csv", jt)
    if cfg.sensitivity.fd_check and m >= 1:
        fd = finite_difference_check(family, kernel, 0.0, min(cfg.integrator.T, 5.0),
                                     cfg.integrator.dt, cfg.integrator.save_every,
                                     h1=cfg.sensitivity.fd_step, max_order=min(m, 2))
        artifacts.write_json(out / "fd_check.json", fd.to_dict(), "fd")
    return 0


def _cmd_stability(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    kernel = kernel_from_config(cfg)
    family = family_from_config(cfg)
    ell = cfg.stability.order
    cert = certify(kernel, order=max(ell, 1))
    rng = rng_from(seed_tree(cfg.model.seed)[LANE_PERTURBATION])
    pert = velocity_perturbation(cfg.model.N, cfg.model.d, cfg.stability.perturbation, rng,
                                 orders=tuple(range(ell + 1)), m=ell)
    ens = JetEnsemble.from_family(family, 0.0, ell)
    run = paired_run(kernel, ens, pert, cfg.integrator.T, cfg.integrator.dt, cfg.integrator.save_every)
    report = verify_l2_stability(run, kernel, cert)
    payload = report.to_dict()
    if ell >= 1:
        hk = verify_hk_stability(run, kernel, cert, ell)
        payload["orders"] = [vars(o) for o in hk.orders]
        payload["hk_passed"] = hk.passed
    artifacts.write_json(out / "stability.json", payload, "stability")
    if not report.passed or (ell >= 1 and not payload["hk_passed"]):
        return _fail({"command": "stability", "report": payload["violations"]})
    return 0


def _cmd_uq(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    kernel = kernel_from_config(cfg)
    family = family_from_config(cfg)
    rule = rule_from_config(cfg)
    m = cfg.sensitivity.order
    jts = run_jet_batch(kernel, family, rule, m, cfg.integrator.T, cfg.integrator.dt,
                        cfg.integrator.save_every, threads=threads)
    times = jts[0].times
    rows = {}
    for name, comp in (("X_norm", 0), ("V_norm", 1)):
        values = np.stack([sensitivity_norms(jt, 0)[comp] for jt in jts])
        jets = np.stack([
            np.stack([sensitivity_norms(jt, k)[comp] for k in range(m + 1)], axis=-1) for jt in jts
        ])
        samples = RandomFieldSamples(nodes=rule.nodes, times=times, values=values, jets=jets)
        rows[name] = {
            "mean": expectation(samples, rule),
            "l2pi": l2pi_norm(samples, rule),
            "hk": hk_norm(samples, rule, m),
            "k": m,
        }
    artifacts.write_moments_csv(out / "moments.csv", times, rows)
    return 0


def _cmd_gronwall(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    passed, details = acceptance.gronwall_suite()
    artifacts.write_json(out / "gronwall.json", {"passed": passed, **details}, "gronwall")
    if not passed:
        return _fail({"command": "gronwall", "details": details})
    return 0


def _cmd_verify_all(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    results = acceptance.run_all(seed=cfg.model.seed, threads=threads)
    for res in results:
        print(res.line())
    payload = {
        "criteria": [
            {"cid": r.cid, "name": r.name, "passed": r.passed, "details": r.details}
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
    }
    artifacts.write_json(out / "verify_all.json", payload, "verify")
    if not payload["all_passed"]:
        return _fail({"command": "verify-all",
                      "criteria": [r.cid for r in results if not r.passed]})
    return 0


_DISPATCH = {
    "simulate": _cmd_simulate,
    "flocking": _cmd_flocking,
    "sensitivity": _cmd_sensitivity,
    "stability": _cmd_stability,
    "uq": _cmd_uq,
    "gronwall": _cmd_gronwall,
    "verify-all": _cmd_verify_all,
}


def run_subcommand(name: str, cfg: ExperimentConfig, out_dir, threads: int = 1) -> int:
    """Dispatch one subcommand; returns the process exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _DISPATCH[name](cfg, out, threads)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flockuq", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="experiment config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="artifact directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for per-node runs")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        else:
            cfg = default_config()
    except (ConfigError, OSError) as exc:
        print(f"flockuq: config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.model.seed = args.seed
    try:
        return run_subcommand(args.command, cfg, args.out, args.threads)
    except backend.BlowUpError as exc:
        return _fail({"command": args.command, "error": str(exc)})


if __name__ == "__main__":
    sys.exit(main())
