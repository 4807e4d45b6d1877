"""Reduced curved two-body problem.

After fixing the angular momentum vector C k-hat and quotienting the isometry
group, the motion lives on T*(0, pi) x (coadjoint orbit), charted by
(phi, p_phi, theta, p_theta) with symplectic form
dp_phi ^ dphi + dp_theta ^ dtheta.  phi is the angular separation of the two
bodies, (theta, p_theta) parametrize the coadjoint orbit

    nu1^2 + nu2^2 + sign * nu3^2 = C^2,
    (nu1, nu2, nu3) = (sqrt(C^2 - sign p_theta^2) sin(theta),
                       sqrt(C^2 - sign p_theta^2) cos(theta), p_theta).

The Hamiltonian splits as Kep + Per where Kep is a curved Kepler problem
with particle mass m = m1 m2 and sun mass 1 (the mass dictionary used by
every chart conversion), and Per collects the coupling terms that vanish
with the separation.  The hyperbolic Hamiltonian is the stated
trigonometric-to-hyperbolic substitution together with the so(2,1) coadjoint
orbits; it is validated against the scaled-limit oracles in the test suite
rather than against a printed closed form.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kepler as kp
from .errors import ChartError, DomainError, NearCollisionError

_COLLISION_MARGIN = 1e-12


@dataclass(frozen=True)
class MassPair:
    """Normalized masses m1 + m2 = 1 and their derived coefficients."""

    m1: float
    m2: float

    def __post_init__(self):
        if self.m1 <= 0 or self.m2 <= 0:
            raise DomainError("masses must be strictly positive")
        total = self.m1 + self.m2
        object.__setattr__(self, "m1", self.m1 / total)
        object.__setattr__(self, "m2", self.m2 / total)

    @property
    def m(self):
        """Product m1 m2, the Kepler particle mass of the reduced problem."""
        return self.m1 * self.m2

    @property
    def m_delta(self):
        return self.m1 - self.m2

    @property
    def sigma(self):
        return (1.0 - (self.m1**3 + self.m2**3)) / 6.0

    @property
    def m_tilde(self):
        return (1.0 - self.m1**3 - self.m2**3) / (12.0 * self.m**4)

    @property
    def equal(self):
        return abs(self.m_delta) < 1e-14

    def kepler_params(self, space):
        """Mass dictionary: reduced Kepler problem has mass m, sun mass 1."""
        return kp.KeplerParams(self.m, 1.0, space)


@dataclass(frozen=True)
class ReducedState:
    phi: float
    p_phi: float
    theta: float
    p_theta: float

    def as_array(self):
        return np.array([self.phi, self.p_phi, self.theta, self.p_theta])


@dataclass(frozen=True)
class CoadjointPoint:
    nu1: float
    nu2: float
    nu3: float


@dataclass(frozen=True)
class ScaledDelaunay:
    """Hatted Delaunay chart: L^2 = rho eps Lhat^2 and companions."""

    L_hat: float
    ell: float
    G_hat: float
    g: float
    C_hat: float
    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise DomainError("scaling parameter eps must be positive")


def coadjoint_embed(p_theta, theta, C, sign=+1):
    """Chart point of the coadjoint orbit at momentum C.

    Spherical orbits (sign +1) satisfy nu1^2 + nu2^2 + nu3^2 = C^2 and need
    |p_theta| <= C; the so(2,1) orbits (sign -1) satisfy
    nu1^2 + nu2^2 - nu3^2 = C^2 with p_theta unbounded.
    """
    W = C * C - sign * p_theta * p_theta
    if W < 0:
        raise DomainError(f"|p_theta| = {abs(p_theta)} exceeds C = {C}")
    root = math.sqrt(W)
    return CoadjointPoint(root * math.sin(theta), root * math.cos(theta), p_theta)


def _check_separation(phi, sign):
    if phi <= _COLLISION_MARGIN:
        raise NearCollisionError(f"separation phi = {phi} at the collision")
    if sign > 0 and np.pi - phi <= _COLLISION_MARGIN:
        raise NearCollisionError(f"separation phi = {phi} at the antipode")


def _mass_trig(phi, masses, space):
    """The three mass-weighted coefficient functions of the metric."""
    m1, m2 = masses.m1, masses.m2
    s, c = space.s, space.c
    S2 = m1 * s(m2 * phi) ** 2 + m2 * s(m1 * phi) ** 2
    S3 = m1 * c(m2 * phi) ** 2 + m2 * c(m1 * phi) ** 2
    S23 = m2 * c(m1 * phi) * s(m1 * phi) - m1 * c(m2 * phi) * s(m2 * phi)
    return S2, S3, S23


def reduced_hamiltonian(state, masses, space, C):
    """Full reduced Hamiltonian, every coupling term retained.

    Kep + nu1^2/(2 rho^2) + nu2^2 S2/(2 m rho^2 s^2)
        + nu3^2 S3/(2 m rho^2 s^2) + nu2 nu3 S23/(m rho^2 s^2)
    with S2 = m1 s(m2 phi)^2 + m2 s(m1 phi)^2 and cyclic companions; s and c
    are the sine and cosine of the space.
    """
    if space.sign == 0:
        raise ChartError("the reduced problem is defined for curved spaces")
    phi, p_phi, theta, p_theta = (state.phi, state.p_phi,
                                  state.theta, state.p_theta)
    _check_separation(phi, space.sign)
    m = masses.m
    rho = space.rho
    W = C * C - space.sign * p_theta * p_theta
    if W < 0:
        raise DomainError("chart requires |p_theta| < C on the sphere")
    sphi = space.s(phi)
    S2, S3, S23 = _mass_trig(phi, masses, space)
    kep = ((p_phi**2 + p_theta**2 / sphi**2) / (2 * m * rho**2)
           - (m / rho) * space.c(phi) / sphi)
    per = (W * math.sin(theta) ** 2 / (2 * rho**2)
           + (W * math.cos(theta) ** 2 - space.sign * p_theta**2)
           * S2 / (2 * m * rho**2 * sphi**2)
           + p_theta * math.sqrt(W) * math.cos(theta) * S23 / (m * rho**2 * sphi**2))
    return kep + per


def reduced_hamiltonian_truncated(state, masses, space, C):
    """Leading form Kep + (C^2/2 - sign p_theta^2)/rho^2, the O(phi) truncation.

    This is the integrable precessing-Kepler Hamiltonian; it exists for
    comparison against the full form and as the source of lifted orbits.
    """
    if space.sign == 0:
        raise ChartError("the reduced problem is defined for curved spaces")
    _check_separation(state.phi, space.sign)
    m = masses.m
    rho = space.rho
    sphi = space.s(state.phi)
    kep = ((state.p_phi**2 + state.p_theta**2 / sphi**2) / (2 * m * rho**2)
           - (m / rho) * space.c(state.phi) / sphi)
    return kep + (C * C / 2.0 - space.sign * state.p_theta**2) / rho**2


def equal_mass_hamiltonian(state, space, C):
    """Equal-mass closed form in psi = phi/2, p_psi = 2 p_phi.

    Kep_psi + tan(psi)/(8 rho) + kappa (C^2 - p_theta^2)/2 (1 + tan(psi)^2 cos(theta)^2)
    with Kep_psi = (p_psi^2 + p_theta^2/sin(psi)^2)/(2 rho^2) - cot(psi)/(8 rho).
    Spherical only; used as an independent oracle for the generic form.
    """
    if space.sign <= 0:
        raise ChartError("the simplified equal-mass form is stated on the sphere")
    rho = space.rho
    psi = state.phi / 2.0
    p_psi = 2.0 * state.p_phi
    kep = ((p_psi**2 + state.p_theta**2 / math.sin(psi) ** 2) / (2 * rho**2)
           - math.cos(psi) / math.sin(psi) / (8 * rho))
    extra = math.tan(psi) / (8 * rho)
    kappa = space.kappa
    coupling = (kappa * (C * C - state.p_theta**2) / 2.0
                * (1.0 + (math.tan(psi) * math.cos(state.theta)) ** 2))
    return kep + extra + coupling


def reduced_vector_field(state, masses, space, C):
    """Hamilton's equations of the full reduced Hamiltonian, closed form.

    Returns (dphi, dp_phi, dtheta, dp_theta)/dt.
    """
    if space.sign == 0:
        raise ChartError("the reduced problem is defined for curved spaces")
    phi, p_phi, theta, p_theta = (state.phi, state.p_phi,
                                  state.theta, state.p_theta)
    _check_separation(phi, space.sign)
    sign = space.sign
    m1, m2 = masses.m1, masses.m2
    m = masses.m
    rho = space.rho
    s, c = space.s, space.c
    W = C * C - sign * p_theta**2
    if W < 0:
        raise DomainError("chart requires |p_theta| < C on the sphere")
    rootW = math.sqrt(W)
    sphi, cphi = s(phi), c(phi)
    S2, S3, S23 = _mass_trig(phi, masses, space)
    sin_t, cos_t = math.sin(theta), math.cos(theta)

    # d/dphi of the coefficient functions; the sphere has
    # (sin^2)' = +sin(2x), (cos^2)' = -sin(2x), the hyperboloid
    # (sinh^2)' = +sinh(2x), (cosh^2)' = +sinh(2x)
    dS2 = m * (s(2 * m2 * phi) + s(2 * m1 * phi))
    dS23 = m * (c(2 * m1 * phi) - c(2 * m2 * phi))

    inv_s2 = 1.0 / sphi**2
    # f/s^2 derivatives: (f/s^2)' = f'/s^2 - 2 f c/s^3
    def d_over_s2(f, df):
        return df * inv_s2 - 2.0 * f * cphi * inv_s2 / sphi

    # potential: -(m/rho) c/s, d/dphi = +(m/rho)/s^2 for both signs
    dH_phi = (m / rho) * inv_s2
    dH_phi += -p_theta**2 * cphi * inv_s2 / sphi / (m * rho**2)
    coeff2 = (W * cos_t**2 - sign * p_theta**2) / (2 * m * rho**2)
    dH_phi += coeff2 * d_over_s2(S2, dS2)
    coeff23 = p_theta * rootW * cos_t / (m * rho**2)
    dH_phi += coeff23 * d_over_s2(S23, dS23)

    dH_theta = (W * 2 * sin_t * cos_t / (2 * rho**2)
                - W * 2 * sin_t * cos_t * S2 / (2 * m * rho**2 * sphi**2)
                - p_theta * rootW * sin_t * S23 / (m * rho**2 * sphi**2))

    dW = -2.0 * sign * p_theta
    dH_ptheta = (p_theta * inv_s2 / (m * rho**2)
                 + dW * sin_t**2 / (2 * rho**2)
                 + (dW * cos_t**2 - sign * 2 * p_theta)
                 * S2 / (2 * m * rho**2 * sphi**2))
    if rootW > 0:
        dH_ptheta += ((rootW + p_theta * 0.5 * dW / rootW)
                      * cos_t * S23 / (m * rho**2 * sphi**2))
    dH_pphi = p_phi / (m * rho**2)

    return np.array([dH_pphi, -dH_phi, dH_ptheta, -dH_theta])


def reconstruction_phase_rate(state, masses, space, C):
    """Exact rate of the reconstruction phase, d(omega)/dt = dF_red/dC.

    The lifted configuration frame is R_k(omega) R_i(lambda) R_k(theta);
    requiring the lift of a reduced trajectory to carry the physical
    angular momentum C k-hat pins omega to the conjugate angle of the
    momentum level, whose rate is the C-derivative of the Hamiltonian.
    It equals kappa*C at leading order in the separation, which is the
    exact rate for the truncated Hamiltonian.
    """
    sign = space.sign
    W = C * C - sign * state.p_theta**2
    if W <= 0:
        raise DomainError("chart requires |p_theta| < C on the sphere")
    rho = space.rho
    sphi2 = space.s(state.phi) ** 2
    S2, _, S23 = _mass_trig(state.phi, masses, space)
    cos_t = math.cos(state.theta)
    return (C * math.sin(state.theta) ** 2 / rho**2
            + C * cos_t**2 * S2 / (masses.m * rho**2 * sphi2)
            + state.p_theta * (C / math.sqrt(W)) * cos_t * S23
            / (masses.m * rho**2 * sphi2))


def reduced_vector_field_with_phase(state_and_omega, masses, space, C):
    """Augmented field (phi, p_phi, theta, p_theta, omega) for lifting."""
    st = ReducedState(*state_and_omega[:4])
    field = reduced_vector_field(st, masses, space, C)
    return np.append(field, reconstruction_phase_rate(st, masses, space, C))


def truncated_vector_field(state, masses, space, C):
    """Hamilton's equations of the truncated form: Kepler flow plus the
    uniform pericenter drift dtheta/dt extra term -2 kappa p_theta."""
    if space.sign == 0:
        raise ChartError("the reduced problem is defined for curved spaces")
    _check_separation(state.phi, space.sign)
    m = masses.m
    rho = space.rho
    sphi, cphi = space.s(state.phi), space.c(state.phi)
    dphi = state.p_phi / (m * rho**2)
    dp_phi = (state.p_theta**2 * cphi / (m * rho**2 * sphi**3)
              - (m / rho) / sphi**2)
    dtheta = (state.p_theta / (m * rho**2 * sphi**2)
              - 2.0 * space.kappa * state.p_theta)
    return np.array([dphi, dp_phi, dtheta, 0.0])


def scale(state, rho, eps):
    """Hatted chart of a Delaunay state: L^2 = rho eps Lhat^2 etc.

    The angles are unchanged; C_hat is not part of the Delaunay state and is
    scaled separately with :func:`scale_momentum`.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    root = math.sqrt(rho * eps)
    return (state.L / root, state.ell, state.G / root, state.g)


def unscale(scaled, rho):
    """Delaunay state of a hatted chart point."""
    root = math.sqrt(rho * scaled.eps)
    return kp.DelaunayState(root * scaled.L_hat, scaled.ell,
                            root * scaled.G_hat, scaled.g)


def scale_momentum(C, rho, eps):
    return C / math.sqrt(rho * eps)


def time_scale_factor(rho, eps):
    """t = (rho eps)^(3/2) t_hat maps scaled time to physical time."""
    return (rho * eps) ** 1.5


def scaled_kepler_energy(L_hat, masses, eps, sign=+1):
    """Kep part of the scaled Hamiltonian: -m^3/(2 Lhat^2) + sign eps^2 Lhat^2/(2m)."""
    m = masses.m
    return -(m**3) / (2 * L_hat**2) + sign * eps**2 * L_hat**2 / (2 * m)


def per_term(scaled, masses, space):
    """Exact perturbation Per = rho*eps*F_red - Kep_{eps^2} at a torus point.

    The chart point is reconstructed with the mass dictionary (m = m1 m2,
    sun mass 1), the full Hamiltonian is evaluated there and the closed-form
    scaled Kepler energy is subtracted; the Kepler parts cancel exactly, so
    what remains is the scaled coupling term.
    """
    if space.sign == 0:
        raise ChartError("the reduced problem is defined for curved spaces")
    rho, eps = space.rho, scaled.eps
    params = masses.kepler_params(space)
    st = unscale(scaled, rho)
    C = math.sqrt(rho * eps) * scaled.C_hat
    phi, p_phi, theta, p_theta = kp.delaunay_to_reduced(st, params)
    f_red = reduced_hamiltonian(ReducedState(phi, p_phi, theta, p_theta),
                                masses, space, C)
    kep_hat = scaled_kepler_energy(scaled.L_hat, masses, eps, space.sign)
    return rho * eps * f_red - kep_hat
