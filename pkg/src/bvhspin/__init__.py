"""Exact dynamics and weak-coupling asymptotics of a qubit decaying into a bosonic bath."""
from .errors import (
    BVHError,
    ConfigError,
    DegeneratePoleError,
    DivergentMomentError,
    InsufficientMomentsError,
    KernelDomainError,
    NodeSingularityError,
    SingularityError,
    SolverError,
)
from .kernels import (
    ExpSumKernel,
    GenericKernel,
    Kernel,
    LorentzMode,
    MomentTable,
    eval_kernel,
    eval_scaled_kernel,
    laplace_G,
    moments,
    spectral_density,
)
from .volterra import (
    Provenance,
    Trajectory,
    born_x_prime,
    closed_form_single_peak,
    single_peak_trajectory,
    solve_expsum,
    solve_generic,
    tcl_gamma,
    tcl_x,
)
from .perturbation import (
    ExponentialPart,
    PoleExpansion,
    PolyExp,
    asymptotic_gksl,
    initial_layer_tstar,
    lorentz_tstar,
    perturbative_term,
    pole_expansion,
    pole_series,
    residue_series,
    series_x,
    single_peak_exponential,
    wronski_D,
    x_pert,
)
from .matching import overlap_x, power_table, short_time_x, uniform_x
from .nonuniversal import AppendixGKernel, appg_x0, appg_x_exact, appg_x_half, dawson
from .dynamics import (
    QubitDensity,
    corr_exact,
    corr_markov,
    corr_renormalized,
    density_from_x,
    generator_rates,
    jump_ratio,
    physicality_report,
    propagator,
)

__version__ = "0.1.0"
