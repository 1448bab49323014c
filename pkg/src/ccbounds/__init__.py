"""Constrained Cramer-Rao bounds (CCRB) and Lehmann-unbiased CCRB (LU-CCRB).

Bounds on the weighted MSE of estimators restricted to a smooth
equality-constrained parameter set, with constrained-ML estimators,
unbiasedness diagnostics and reproducible Monte-Carlo experiments for two
worked examples: a linear Gaussian model under a norm constraint and a
complex sinusoid with known amplitude modulus.
"""

from .bounds import (
    BoundReport,
    LUBound,
    RegularityWarning,
    WeightMatrix,
    bound_report,
    ccrb,
    lu_ccrb,
    pinv,
    psd_pinv,
    psd_sqrt_and_pinv,
)
from .diagnostics import (
    BiasReport,
    bias_report,
    check_c_unbiasedness,
    check_x_unbiasedness,
    empirical_bias,
    empirical_bias_gradient,
)
from .errors import *  # noqa: F401,F403
from .estimators import (
    Estimator,
    cml_complex_sinusoid,
    cml_sphere_general,
    cml_sphere_orthogonal,
    make_ccrb_efficient,
    make_lu_efficient,
    ml_linear_unconstrained,
)
from .manifold import (
    BasisDerivatives,
    ConstraintSet,
    NullSpaceBasis,
    align_basis,
    amplitude,
    basis_derivatives,
    linear,
    null_space_basis,
    sphere,
    sphere_point,
    unconstrained,
    validate_feasible,
)
from .models import ComplexSinusoidModel, LinearGaussianModel, ParametricModel, fim_monte_carlo
from .montecarlo import TrialBatch, TrialConfig, run_trials, trial_rng

__version__ = "0.1.0"
