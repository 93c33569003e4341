"""Experiment orchestration shared by the CLI and the acceptance engine.

All randomness flows from one seed through a spawned seed tree (counter-based
generator), so paired runs, Monte Carlo oracles and finite-difference checks
are reproducible and independently seeded.  Per-node work may run on a
thread pool; reductions always happen in ascending node order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .dynamics import InitialFamily, Trajectory, integrate, random_family
from .flocking import NodeFlocking, make_certificate, verify_flocking
from .kernels import CommunicationKernel
from .sensitivity import JetEnsemble, JetTrajectory, integrate_jets
from .uq import QuadratureRule, build_quadrature

__all__ = [
    "seed_tree",
    "rng_from",
    "parallel_map",
    "kernel_from_config",
    "family_from_config",
    "rule_from_config",
    "run_flocking_node",
    "run_flocking_batch",
]

# stable seed-tree lanes
LANE_FAMILY = 0
LANE_MONTE_CARLO = 1
LANE_PERTURBATION = 2
LANE_EXTRA = 3


def seed_tree(seed: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(4)


def rng_from(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seq))


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map preserving item order; optional thread pool for per-node work."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def kernel_from_config(cfg: ExperimentConfig) -> CommunicationKernel:
    k = cfg.kernel
    return CommunicationKernel(psi0=k.psi0, K0=k.K0, sigmaK=k.sigmaK, beta0=k.beta0, sigmaB=k.sigmaB)


def family_from_config(cfg: ExperimentConfig, seed: int | None = None) -> InitialFamily:
    m = cfg.model
    fam_seq = seed_tree(m.seed if seed is None else seed)[LANE_FAMILY]
    return random_family(
        m.N, m.d, rng_from(fam_seq),
        x_scale=m.x_scale, v_scale=m.v_scale, z_lin=m.z_lin, z_quad=m.z_quad,
        zero_momentum=m.zero_momentum,
    )


def rule_from_config(cfg: ExperimentConfig) -> QuadratureRule:
    return build_quadrature(cfg.uq.pdf_tag, cfg.uq.quad_nodes, sigma=cfg.uq.sigma)


@dataclass(eq=False)
class NodeRun:
    z: float
    trajectory: Trajectory | None = None
    jets: JetTrajectory | None = None


def run_flocking_node(
    kernel: CommunicationKernel,
    family: InitialFamily,
    z: float,
    T: float,
    dt: float,
    save_every: int,
) -> NodeFlocking:
    """Certificate + trajectory + envelope verification for one sample."""
    state = family.ensemble(z)
    x0, v0 = family.norms_at(z)
    cert = make_certificate(kernel, z, x0, v0)
    traj = integrate(state, kernel, T, dt, save_every)
    report = verify_flocking(traj, cert) if cert.condition_holds else None
    return NodeFlocking(z=z, certificate=cert, times=traj.times,
                        x_norms=traj.x_norms(), v_norms=traj.v_norms(),
                        report=report, trajectory=traj)


def run_flocking_batch(
    kernel: CommunicationKernel,
    family: InitialFamily,
    rule: QuadratureRule,
    T: float,
    dt: float,
    save_every: int,
    threads: int = 1,
) -> list[NodeFlocking]:
    return parallel_map(
        lambda z: run_flocking_node(kernel, family, float(z), T, dt, save_every),
        rule.nodes,
        threads,
    )


def run_jet_batch(
    kernel: CommunicationKernel,
    family: InitialFamily,
    rule: QuadratureRule,
    m: int,
    T: float,
    dt: float,
    save_every: int,
    threads: int = 1,
) -> list[JetTrajectory]:
    def one(z: float) -> JetTrajectory:
        return integrate_jets(JetEnsemble.from_family(family, float(z), m), kernel, T, dt, save_every)

    return parallel_map(one, rule.nodes, threads)
