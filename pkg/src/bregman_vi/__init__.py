"""Adaptive mirror prox with restarts for relatively strongly monotone variational inequalities."""

from .exceptions import ConfigurationError, DomainError, LineSearchError, StageError
from .geometry import (Ball, Box, Product, ProxSetup, Simplex, bregman, default_setup, entropy_setup,
                       euclidean_setup, max_bregman_over_set, product_setup, prox_map, rescale)
from .oracle import (OperatorOracle, PropertyReport, check_all, check_inexactness, check_rel_smoothness,
                     check_rel_strong_monotonicity, exact_oracle, make_inexact)
from .problems import (ProblemInstance, affine_vi, bundled_problems, load_problem, perturbed,
                       regularized_bilinear_saddle)
from .solver import (RestartConfig, RestartState, UmpConfig, UmpTrace, line_search_step, restart_solve,
                     ump_solve)
from .certify import (Certificate, minty_gap, verify_halving, verify_lemma1, verify_linesearch,
                      verify_theorem1, verify_theorem2)

__version__ = "0.1.0"
