"""Quadratic Fourier analysis and 4-term progressions over F_p^n, at desk scale."""

from .factor import (Factor, FactorFunction, LocalQuadraticFactor, QuadraticFactor, RankCheck,
                     conditional_expectation, energy, join, push_to_configuration, rank_separation_check)
from .functions import SpaceFunction
from .gowers import (averaging_lemma_check, counting_lemma_check, fourier_ap_count, gvn_bound_check,
                     positivity_check, t_count, t_count_measurable, telescoping_bound_check, u2_norm, u3_norm)
from .quadratic import QuadraticForm, exponential_sum, gauss_bound, gauss_sum_magnitude, random_form
from .records import CheckRecord
from .regularize import (KvnOutcome, KvnParams, OracleResult, deduce_ap_free_bound, find_rich_subspace,
                         inverse_u3_derivative_fit, inverse_u3_exhaustive, kvn_run, rank_reduce)
from .sets import PointSet
from .space import AffineSpace, FieldElement
from .transform import CyclotomicInt, dft, idft

__version__ = "0.1.0"
