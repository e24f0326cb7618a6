"""Kernel-based identification of continuous-time LTI impulse responses.

Impulse responses are estimated by regularized least squares in a
reproducing kernel Hilbert space from samples of the output driven by a
known input. The package provides stable kernels (exponential mixtures,
warped min-type and spline kernels, translation-invariant windows), exact
or quadrature Gram assembly, a Cholesky solver with GCV, multiple kernel
learning over a simplex, and numerical stability diagnostics.
"""

from .diagnostics import (
    l1_norm_curve,
    l1_norm_estimate,
    lemma2_integral,
    relative_degree_probe,
    smoothness_probe,
    stability_trend,
)
from .errors import (
    DegenerateSmootherError,
    IllConditionedError,
    LtiKernelsError,
    NumericalError,
    ParseError,
    QuadratureError,
    SelectionError,
    UndefinedScoreError,
)
from .experiment import ExperimentConfig, build_dictionary, fit_scores, run_experiment
from .gram import DEFAULT_QUADRATURE, GramMatrix, QuadratureConfig, assemble_gram, gram_entry
from .kernels import (
    KernelSpec,
    cosine_kernel,
    exponential_kernel,
    format_kernel_spec,
    gaussian_kernel,
    heaviside_kernel,
    parse_kernel_spec,
    stable_spline_kernel,
    tc_kernel,
    warped_kernel,
)
from .mkl import KernelDictionary, active_atoms, fit_mkl, select_lambda_mkl, simplex_project
from .signals import Dataset, DiscreteSignal, FunctionSignal, PiecewiseConstantSignal
from .solver import IdentifiedModel, fit_model, fit_rls, gcv_score, select_lambda

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
