"""Flocking dynamics with random communication weights: simulation,
z-derivative sensitivity jets, flocking/stability certificates, and
quadrature/Monte-Carlo moment machinery, with an end-to-end acceptance
suite (`flockuq verify-all`).
"""

from . import backend
from .config import ExperimentConfig, default_config, parse_config, serialize_config
from .dynamics import (
    EnsembleState,
    InitialFamily,
    Trajectory,
    config_norms,
    integrate,
    kinetic_dissipation,
    moments,
    random_family,
    rhs,
    shift_to_zero_momentum,
)
from .flocking import (
    EnvelopeConstants,
    FlockingCertificate,
    check_flocking_condition,
    envelope_constants,
    expected_flocking,
    fit_decay_rate,
    lyapunov,
    make_certificate,
    solve_xM,
    verify_flocking,
    verify_sddi_envelope,
)
from .jets import Jet, faa_di_bruno_reference, jet_compose
from .kernels import (
    CommunicationKernel,
    KernelCertificate,
    certify,
    eval_psi,
    eval_psi_primitive,
    eval_psi_vec,
    tail_integral,
)
from .sensitivity import (
    JetEnsemble,
    JetTrajectory,
    finite_difference_check,
    integrate_jets,
    jet_rhs,
    momentum_residuals,
    sensitivity_norms,
    verify_sensitivity_decay,
)
from .stability import (
    PairedRun,
    StabilityReport,
    m0_constant,
    paired_run,
    psi_m,
    velocity_perturbation,
    verify_hk_stability,
    verify_l2_stability,
)
from .uq import (
    QuadratureRule,
    RandomFieldSamples,
    build_quadrature,
    expectation,
    hk_norm,
    l2pi_norm,
    monte_carlo,
)

__version__ = "0.1.0"
