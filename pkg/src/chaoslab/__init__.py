"""Numerical laboratory for Gaussian approximation of Wiener chaos vectors.

Sparse symmetric kernels with a contraction algebra, exact moment and
Malliavin formulas, reproducible Monte Carlo samplers with an independent
discretized-integral oracle, probability metrics, a condition-diagnostics
battery over kernel families, and a spherical-field application.
"""

__version__ = "0.1.0"

from .errors import AssumptionViolation, InputError
from .kernels import (
    GeneralTensor,
    SymmetricKernel,
    add,
    basis_kernel,
    contract,
    contraction_profile,
    inner,
    make_kernel,
    multiplicity,
    sym_contract,
    symmetrize,
)
from .moments import (
    ChaosVectorSpec,
    covariance_matrix,
    fourth_cumulant,
    fourth_moment,
    malliavin_variance,
    multiply,
    variance,
)
from .sampling import (
    GaussianDraw,
    SampleBatch,
    eval_chaos,
    eval_chaos_ito_oracle,
    eval_malliavin_norm,
    hermite,
    sample_batch,
    sample_gaussian_surrogate,
)
from .metrics import EcfGrid, bl_distance_1d, ecf_distance, gaussian_cf, kolmogorov_1d
from .diagnostics import (
    BatteryConfig,
    DiagnosticsReport,
    KernelFamily,
    builtin_family,
    load_family,
    run_battery,
    save_family,
    trend_summary,
)
from .sphere import (
    FieldSample,
    FrequencyComponent,
    PowerSpectrum,
    SphereGrid,
    SphereReport,
    flat_spectrum,
    frequency_component,
    harmonic_table,
    legendre,
    load_spectrum,
    normalized_component,
    real_sph_harm,
    simulate_field,
    sphere_clt_diagnostics,
    subordinate,
)

__all__ = [
    "AssumptionViolation",
    "BatteryConfig",
    "ChaosVectorSpec",
    "DiagnosticsReport",
    "EcfGrid",
    "FieldSample",
    "FrequencyComponent",
    "GaussianDraw",
    "GeneralTensor",
    "InputError",
    "KernelFamily",
    "PowerSpectrum",
    "SampleBatch",
    "SphereGrid",
    "SphereReport",
    "SymmetricKernel",
    "add",
    "basis_kernel",
    "bl_distance_1d",
    "builtin_family",
    "contract",
    "contraction_profile",
    "covariance_matrix",
    "ecf_distance",
    "eval_chaos",
    "eval_chaos_ito_oracle",
    "eval_malliavin_norm",
    "flat_spectrum",
    "fourth_cumulant",
    "fourth_moment",
    "frequency_component",
    "gaussian_cf",
    "harmonic_table",
    "hermite",
    "inner",
    "kolmogorov_1d",
    "legendre",
    "load_family",
    "load_spectrum",
    "make_kernel",
    "malliavin_variance",
    "multiplicity",
    "multiply",
    "normalized_component",
    "real_sph_harm",
    "run_battery",
    "sample_batch",
    "sample_gaussian_surrogate",
    "save_family",
    "simulate_field",
    "sphere_clt_diagnostics",
    "subordinate",
    "sym_contract",
    "symmetrize",
    "trend_summary",
    "variance",
]
