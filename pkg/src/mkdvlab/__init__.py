"""mkdvlab: desk-scale verification machinery for real-valued mKdV.

Green's-function diagnostics of the Lax operator, the conserved generating
functional, the approximating Hamiltonian flows, and the change of variables
they ride on, together with a verification harness.
"""

__version__ = "0.1.0"

from .spectral import (CIRCLE, LINE_APPROX, Field, Geometry, SobolevIndex,
                       apply_multiplier, constant_field, cosine_field,
                       derivative, field_from_coeffs, field_from_function,
                       field_from_samples, h_norm, helmholtz, integral,
                       l1_norm, l2_inner, l2_norm, linf_norm, make_grid, mean,
                       product, resolvent_minus, resolvent_plus, shift,
                       sobolev_norm, zero_field)
from .lax import (DiagnosticsError, GreensDiagnostics, LaxSystem, SeriesReport,
                  alpha_quadratic, ball_parameter, build_lax, gamma_order2,
                  greens_diagnostics, hilbert_schmidt_norm, lambda_factor,
                  p_order1, p_order3, r_order1)
from .functionals import (EquicontinuityProfile, FunctionalReport,
                          LogBranchError, SeriesDivergenceError, alpha,
                          alpha_expansion_residual, equicontinuity_profile,
                          hamiltonian, mass, poisson_bracket_r,
                          two_parameter_identities, variational_check,
                          w_difference_form, w_pairing, w_product_form)
from .flows import (FlowError, FlowSpec, StepSizeError, Trajectory,
                    commuting_composition_check, evolve, gauge_transform,
                    kappa_approximation_sweep, r_evolution_residual)
from .inverse import InversionReport, forward_r, invert_r
