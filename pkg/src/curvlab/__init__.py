"""Curvature, functional inequalities and isoperimetry on finite reversible Markov chains."""

from .capacity import CapacityResult, alpha_cap, alpha_cap_theta, capacity
from .chain import (ChainError, MarkovChain, Tolerances, build_chain, chain_constants,
                    chain_to_spec, dirichlet_form, gradients, heat_apply, heat_operator,
                    laplacian, lipschitz_constant)
from .curvature import (EdgeCurvature, NotLazyError, curvature_table, exp_ratio_margin,
                        gradient_commutation_margin, kappa, kappa_inf, kappa_lazy_crosscheck,
                        kappa_lp, lipschitz_contraction_margin, min_kappa, sectional_nonneg)
from .functional import (OptConfig, OptResult, alpha_logsob, alpha_mod, counterexample_ratio,
                         el_residual, entropy, functional_constants, logsob_ratio, mixing_time,
                         modlogsob_ratio)
from .generators import generate, lazify, make_chain
from .isoperimetry import (boundary_measure, cheeger, concentration_profile, gaussian_rho,
                           iso_profile, obs_diameter)
from .report import __version__
from .separation import (CutPartition, SepConfig, build_phi, chain_rule_margin,
                         dirichlet_from_separation, lipschitz_extension, separation_solve)
from .spectral import (alpha_spectral, dirichlet_eigenvalue, dirichlet_eigenfunction, log_mean,
                       spectral_gap, spectrum)
from .transport import min_cost_transport, w1, winf
from .verify import TheoremCheckResult, VerifyConfig, default_battery, run_battery, verify
