"""Angular bispectrum statistics of Gaussian isotropic random fields on the sphere.

The package provides four layers that check one another:

* :mod:`sphbispec.wigner` -- exact Wigner 3j/6j symbols, Clebsch-Gordan
  coefficients and Gaunt integrals over arbitrary-precision rationals;
* :mod:`sphbispec.diagrams` -- a brute-force Wick-pairing oracle for moments
  of products of bispectrum estimators;
* :mod:`sphbispec.bispectrum` -- closed-form moments, cumulants and an
  Edgeworth-corrected CLT for the normalized bispectrum of an isotropic
  Gaussian field;
* :mod:`sphbispec.fieldsim` / :mod:`sphbispec.montecarlo` -- harmonic-space
  simulation and Monte Carlo estimation used to validate the closed forms.

A command-line front end is installed as ``sphbispec``.
"""

from .bispectrum import (
    EdgeworthCdf,
    MomentPrediction,
    MultipoleTriple,
    big_g_factor,
    delta_factor,
    edgeworth_cdf,
    feasible_normalized_bispectrum,
    fourth_moment_exact,
    fourth_moment_exact_feasible,
    g_factor,
    kappa4_closed_form,
    moment_expansion,
    moment_recursion,
    normalized_bispectrum,
    sample_bispectrum,
)
from .diagrams import (
    BudgetExceededError,
    Diagram,
    IndexSet,
    enumerate_pairings,
    evaluate_diagram,
    kappa_u_by_connected_sum,
    moment_by_diagram_sum,
    moment_breakdown,
)
from .fieldsim import (
    AngularPowerSpectrum,
    HarmonicCoefficients,
    estimate_cl,
    normalize_coeffs,
    sample_alms,
)
from .montecarlo import (
    CltReport,
    ExperimentConfig,
    MomentReport,
    clt_check,
    collect_samples,
    rate_sweep,
    run_experiment,
)
from .wigner import (
    GauntValue,
    SignedSqrtRational,
    ThreeJArgs,
    cg_chain_coefficient,
    clebsch_gordan,
    gaunt,
    wigner3j,
    wigner6j,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SignedSqrtRational",
    "ThreeJArgs",
    "GauntValue",
    "wigner3j",
    "wigner6j",
    "clebsch_gordan",
    "gaunt",
    "cg_chain_coefficient",
    "BudgetExceededError",
    "Diagram",
    "IndexSet",
    "enumerate_pairings",
    "evaluate_diagram",
    "moment_breakdown",
    "moment_by_diagram_sum",
    "kappa_u_by_connected_sum",
    "AngularPowerSpectrum",
    "HarmonicCoefficients",
    "sample_alms",
    "estimate_cl",
    "normalize_coeffs",
    "MultipoleTriple",
    "MomentPrediction",
    "EdgeworthCdf",
    "sample_bispectrum",
    "normalized_bispectrum",
    "feasible_normalized_bispectrum",
    "delta_factor",
    "g_factor",
    "big_g_factor",
    "kappa4_closed_form",
    "fourth_moment_exact",
    "fourth_moment_exact_feasible",
    "moment_expansion",
    "moment_recursion",
    "edgeworth_cdf",
    "ExperimentConfig",
    "MomentReport",
    "CltReport",
    "collect_samples",
    "run_experiment",
    "clt_check",
    "rate_sweep",
]
