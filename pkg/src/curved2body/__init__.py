"""Curved two-body problem: Kepler charts, reduction, averaging, continuation."""

from .elliptic import (EllipticModulus, complete_K, jacobi_am,
                       jacobi_cd_nd_sd, jacobi_sn_cn_dn)
from .errors import (ChartError, ConfigError, CurvedTwoBodyError, DomainError,
                     InfeasibleError, NearCollisionError, NonConvergenceError)
from .integrators import Trajectory, integrate, monitor, stormer_verlet
from .kepler import (ConicGeometry, CurvedSpace, DelaunayState, KeplerParams,
                     PoincareState, anomaly_convert, conic_from_actions,
                     conic_from_alpha_epsilon, conic_from_axes,
                     curved_kepler_equation, delaunay_L_from_alpha,
                     delaunay_to_poincare, delaunay_to_reduced,
                     elliptic_parametrization, energy_momentum_from_axes,
                     flat_eccentric_parametrization, kepler_energy_and_mean_motion,
                     kepler_flow, poincare_to_delaunay, position_from_true_anomaly,
                     reduced_to_delaunay, solve_curved_kepler)
from .orbits import (LiftedOrbit, PeriodicOrbit, ReturnMapResult, find_periodic,
                     lift_angular_momentum, lift_orbit, limit_map, return_map)
from .reduction import (CoadjointPoint, MassPair, ReducedState, ScaledDelaunay,
                        coadjoint_embed, equal_mass_hamiltonian, per_term,
                        reconstruction_phase_rate, reduced_hamiltonian,
                        reduced_hamiltonian_truncated, reduced_vector_field,
                        reduced_vector_field_with_phase, scale, scale_momentum,
                        time_scale_factor, truncated_vector_field, unscale)
from .secular import (SecularState, average_consistency, average_numeric,
                      average_per_numeric, frak_m, per_series, per_series_terms,
                      precession_rate, secular_phase_portrait,
                      secular_vector_field)

__version__ = "0.1.0"
