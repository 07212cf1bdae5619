"""No-U-Turn Sampler laboratory for the canonical Gaussian target.

Implements NUTS and its reduced kernels (Multinoulli HMC, Uniform HMC),
coupling-based mixing experiments, shell-geometry diagnostics, and a CLI
that reproduces the desk-scale experiments: looping step sizes, contraction
curves, stationarity histograms, and the step-size randomization fix.
"""

__version__ = "0.1.0"

from .dynamics import (
    IntegrationError,
    LeapfrogConfig,
    PhasePoint,
    TargetModel,
    energy_error,
    exact_gaussian_flow,
    gaussian_leapfrog,
    hamiltonian,
    leapfrog_step,
    standard_gaussian,
)
from .orbits import (
    IndexOrbit,
    OrbitSelectionResult,
    OrbitStates,
    SineScanRow,
    StopReason,
    select_orbit,
    sub_uturn_check,
    uturn_check,
    uturn_sine_scan,
)
from .samplers import (
    JitterMode,
    KernelKind,
    SamplerConfig,
    TransitionRecord,
    a_index_event,
    multinoulli_hmc_transition,
    multinoulli_sample,
    nuts_transition,
    run_chain,
    transition,
    triangular_path_pmf,
    uniform_hmc_transition,
)
from .coupling import (
    CoupledPair,
    CoupleTrace,
    contraction_factor,
    couple_velocities,
    coupled_experiment,
    one_shot_step,
    synchronous_step,
)
from .geometry import (
    ExitStats,
    MixingBoundParams,
    ShellParams,
    StepsizeReport,
    chi_squared_stats,
    concentration_event,
    default_shell,
    delta_bound,
    exit_time_experiment,
    in_shell,
    k_star,
    mixing_bound,
    stepsize_condition_check,
    typical_shell,
)
from .streams import TransitionDraws, chain_rng
