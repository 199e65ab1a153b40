"""Incomplete U-statistics: estimation, design statistics and concentration bounds.

A U-statistic averages a symmetric kernel over all ``m``-subsets of an
``n``-sample; an incomplete one averages over a chosen list of ``M``
subsets (the design). This package evaluates both, computes the design
scalars ``A``, ``B``, ``C`` and the kernel coefficients ``sigma_k^2``,
``beta``, ``gamma``, ``alpha``, and turns them into tail and confidence
bounds that can be checked by simulation.
"""

from .bounds import (BOUND_NAMES, BoundError, BoundReport, bound_arcones_tail,
                     bound_complete_delta, bound_complete_tail, bound_hoeffding_tail,
                     bound_incomplete_delta, bound_incomplete_tail, bound_random_design_delta,
                     bound_variance_bernstein_tail, bound_subgauss_lower_tail, bound_subgauss_sqrt,
                     dominance_check_vs_arcones, variance_complete)
from .designs import (Design, DesignError, DesignStats, complete_design, design_stats,
                      expected_stats, load_design, partition_design, random_design,
                      save_design)
from .estimator import (Estimate, estimate_complete, estimate_incomplete,
                        exact_distribution_of_UW, exact_theta)
from .experiments import ExperimentConfig, ExperimentRow, run_experiment
from .kernels import (Distribution, Kernel, KernelError, KernelRangeError, constant_kernel,
                      evaluate, get_distribution, get_kernel, partial_difference)
from .sensitivity import (SensitivityProfile, alpha, beta_gamma, profile, sigma_k_sq,
                          worst_case_profile)

__version__ = "0.1.0"
