"""Kepler problem on surfaces of constant curvature.

The attracting center ("sun", mass M) is fixed; phi is the angular distance
of the particle (mass m) from it, so the geodesic distance is rho*phi.  The
Hamiltonian is

    (p_phi^2 + p_theta^2 / sin^2 phi) / (2 m rho^2) - (m M / rho) cot(phi)

on the sphere, with sin -> sinh and cot -> coth in hyperbolic space, and the
familiar planar Kepler problem at zero curvature.  Bounded orbits are conics
on the surface; their central projection to the tangent plane at the sun is
a planar conic, which is what the flat-eccentric machinery parametrizes.

Conventions:

* alpha, beta are curved semi-axes (lengths); capital A = alpha/rho,
  B = beta/rho, E = alpha*epsilon/rho are the corresponding angles.
* G > 0 means counterclockwise motion; anomalies increase with time for
  either orientation, and g carries the orientation.
* The central-projection quantities (a, e, b) are valid only while the
  orbit stays in the open hemisphere phi < pi/2.  Spherical orbits that
  reach past the equator are legitimate (the conic exists whenever
  2*alpha/rho < pi) and the orthogonal-projection parametrization below
  handles them; the planar fields are then flagged invalid.
"""
import math
from dataclasses import dataclass

import numpy as np

from .elliptic import complete_K, jacobi_am, jacobi_sn_cn_dn
from .errors import ChartError, DomainError, NonConvergenceError

ANOMALIES = ("mean", "true", "flat_eccentric", "elliptic_w", "geometric_u")

_CIRCULAR_EPS = 1e-8
_KEPLER_TOL = 1e-13


# --- domain types ---

@dataclass(frozen=True)
class CurvedSpace:
    """Constant-curvature surface: sign +1 sphere, -1 hyperboloid, 0 plane."""

    sign: int
    rho: float = 1.0

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise DomainError(f"curvature sign must be -1, 0 or +1, got {self.sign}")
        if self.sign != 0 and not (self.rho > 0 and math.isfinite(self.rho)):
            raise DomainError(f"radius must be positive and finite, got {self.rho}")

    @property
    def kappa(self):
        return 0.0 if self.sign == 0 else self.sign / self.rho**2

    @classmethod
    def sphere(cls, rho=1.0):
        return cls(+1, rho)

    @classmethod
    def hyperbolic(cls, rho=1.0):
        return cls(-1, rho)

    @classmethod
    def flat(cls):
        return cls(0, 1.0)

    # trig dictionary: sin/cos/tan on the sphere, sinh/cosh/tanh on the
    # hyperboloid; arc-length angles are always argument/rho.
    def s(self, x):
        return np.sinh(x) if self.sign < 0 else np.sin(x)

    def c(self, x):
        return np.cosh(x) if self.sign < 0 else np.cos(x)

    def t(self, x):
        return np.tanh(x) if self.sign < 0 else np.tan(x)

    def at(self, x):
        return np.arctanh(x) if self.sign < 0 else np.arctan(x)


@dataclass(frozen=True)
class KeplerParams:
    """Particle mass m, sun mass M and the ambient space."""

    m: float
    M: float
    space: CurvedSpace

    def __post_init__(self):
        if self.m <= 0 or self.M <= 0:
            raise DomainError("masses must be strictly positive")

    @property
    def mu(self):
        return self.m**2 * self.M * self.space.rho


@dataclass(frozen=True)
class ConicGeometry:
    """A bounded conic on the surface plus its centrally projected planar conic.

    Attributes
    ----------
    alpha, beta : float
        Curved semi-major and semi-minor axes (lengths).
    epsilon : float
        Curved eccentricity (|center distance| = alpha*epsilon).
    a, e, b : float
        Planar elements of the central projection; ``nan`` when the orbit
        crosses the equator (e >= 1, projection unbounded).
    p_sq : float
        Semi-latus parameter of the projected conic, r = p_sq/(1 + e cos nu).
        Exact and positive for every bounded conic, crossing or not.
    k : float
        Elliptic modulus of the orthogonal-projection quartic,
        sin(alpha*epsilon/rho) on the sphere; nan for hyperbolic conics.
    space : CurvedSpace
    """

    alpha: float
    beta: float
    epsilon: float
    a: float
    e: float
    b: float
    p_sq: float
    k: float
    space: CurvedSpace

    @property
    def crosses_equator(self):
        if self.space.sign <= 0:
            return False
        return (self.alpha * (1 + self.epsilon)) / self.space.rho >= np.pi / 2

    @property
    def circular(self):
        return self.epsilon < _CIRCULAR_EPS

    # angles of the curved geometry
    @property
    def A(self):
        return self.alpha / self.space.rho if self.space.sign != 0 else self.alpha

    @property
    def E(self):
        return self.alpha * self.epsilon / self.space.rho if self.space.sign != 0 \
            else self.alpha * self.epsilon


@dataclass(frozen=True)
class DelaunayState:
    """Action-angle state (L, ell, G, g) of a bounded non-circular orbit."""

    L: float
    ell: float
    G: float
    g: float

    def __post_init__(self):
        if self.L <= 0:
            raise DomainError("action L must be positive")
        if abs(self.G) > self.L * (1 + 1e-12):
            raise DomainError(f"|G| = {abs(self.G)} exceeds L = {self.L}")


@dataclass(frozen=True)
class PoincareState:
    """Chart (Lambda, lambda, xi, eta) regular across circular orbits."""

    Lambda: float
    lam: float
    xi: float
    eta: float
    circular_degenerate: bool = False


# --- conic geometry constructors ---

def _conic_from_angles(A, B, params):
    """Build the full geometry from the axis angles A = alpha/rho, B = beta/rho.

    The focal half-angle E = alpha*epsilon/rho comes from the right-triangle
    relation cos(B) = cos(A)/cos(E) rewritten as
    sin(E) = sqrt(sin(A+B) sin(A-B))/cos(B), which stays accurate in the
    flat limit where the cosines cancel catastrophically.
    """
    space = params.space
    rho = space.rho
    if space.sign > 0:
        if not (0 < A < np.pi / 2):
            raise DomainError(f"need 0 < alpha/rho < pi/2, got {A}")
        sE = math.sqrt(max(space.s(A + B) * space.s(A - B), 0.0)) / space.c(B)
        E = math.asin(min(sE, 1.0))
    elif space.sign < 0:
        sE = math.sqrt(max(space.s(A + B) * space.s(A - B), 0.0)) / space.c(B)
        E = math.asinh(sE)
    else:
        raise ChartError("flat conics are built from actions or elements directly")
    return _conic_from_A_E(A, E, params, beta=B * rho)


def _conic_from_A_E(A, E, params, beta=None):
    space = params.space
    rho = space.rho
    if beta is None:
        # invert cos(B) = cos(A)/cos(E) in the stable product form
        sB = math.sqrt(max(space.s(A + E) * space.s(A - E), 0.0)) / space.c(E)
        beta = rho * (math.asin(min(sB, 1.0)) if space.sign > 0 else math.asinh(sB))
    alpha = A * rho
    epsilon = E / A
    # planar central projection; exact product forms, valid for both signs
    p_sq = 2 * rho * space.s(A + E) * space.s(A - E) / space.s(2 * A)
    e = space.s(2 * E) / space.s(2 * A)
    if space.sign > 0 and A + E >= np.pi / 2:
        # orbit reaches past the equator: projection unbounded
        a = b = float("nan")
    else:
        a = 0.5 * rho * space.s(2 * A) / (space.c(A + E) * space.c(A - E))
        b = math.sqrt(max(a * p_sq, 0.0))
    k = math.sin(E) if space.sign > 0 else float("nan")
    return ConicGeometry(alpha, beta, epsilon, a, e, b, p_sq, k, space)


def conic_from_axes(alpha, beta, params):
    """Conic with curved semi-axes alpha >= beta > 0."""
    space = params.space
    if not (0 < beta <= alpha):
        raise DomainError(f"need 0 < beta <= alpha, got alpha={alpha} beta={beta}")
    if space.sign == 0:
        e = math.sqrt(max(1 - (beta / alpha) ** 2, 0.0))
        return ConicGeometry(alpha, beta, e, alpha, e, beta,
                             alpha * (1 - e * e), 0.0, space)
    return _conic_from_angles(alpha / space.rho, beta / space.rho, params)


def conic_from_actions(L, G, params):
    """Conic of the orbit with actions (L, |G|); exact for every curvature sign."""
    space = params.space
    G = abs(G)
    if not (0 < G <= L):
        raise DomainError(f"need 0 < |G| <= L, got L={L} G={G}")
    mu = params.m**2 * params.M
    if space.sign == 0:
        a = L * L / mu
        e = math.sqrt(max(1 - (G / L) ** 2, 0.0))
        b = a * math.sqrt(1 - e * e)
        return ConicGeometry(a, b, e, a, e, b, a * (1 - e * e), 0.0, space)
    tA = L * L / (mu * space.rho)
    tB = G * L / (mu * space.rho)
    if space.sign > 0:
        A = math.atan(tA)
        B = math.atan(tB)
    else:
        if tA >= 1.0:
            raise DomainError("L^2 >= m^2 M rho: no bounded hyperbolic orbit")
        A = math.atanh(tA)
        B = math.atanh(tB)
    return _conic_from_angles(A, B, params)


def conic_from_alpha_epsilon(alpha, epsilon, params):
    """Conic from the curved semi-major axis and curved eccentricity."""
    space = params.space
    if not 0 <= epsilon < 1:
        raise DomainError(f"need 0 <= epsilon < 1, got {epsilon}")
    if space.sign == 0:
        b = alpha * math.sqrt(1 - epsilon**2)
        return ConicGeometry(alpha, b, epsilon, alpha, epsilon, b,
                             alpha * (1 - epsilon**2), 0.0, space)
    A = alpha / space.rho
    if space.sign > 0 and not (0 < A < np.pi / 2):
        raise DomainError(f"need 0 < alpha/rho < pi/2, got {A}")
    return _conic_from_A_E(A, A * epsilon, params)


# --- energy, momentum, actions ---

def energy_momentum_from_axes(alpha, beta, params):
    """Energy and squared momentum of the orbit along the conic (alpha, beta).

    Spherical:  h = -(mM/rho) cot(2 alpha/rho),
                G^2 = m^2 M rho tan^2(beta/rho) cot(alpha/rho);
    hyperbolic with cot -> coth, tan -> tanh.
    """
    space = params.space
    if not (0 < beta <= alpha):
        raise DomainError("need 0 < beta <= alpha")
    if space.sign == 0:
        h = -params.m * params.M / (2 * alpha)
        G_sq = params.m**2 * params.M * beta**2 / alpha
        return h, G_sq
    A = alpha / space.rho
    B = beta / space.rho
    s2A = space.s(2 * A)
    if abs(s2A) < 1e-300:
        raise DomainError(f"2 alpha/rho = {2 * A} is a degenerate axis")
    if space.sign > 0 and not (0 < 2 * A < np.pi):
        raise DomainError(f"need 0 < 2 alpha/rho < pi, got {2 * A}")
    h = -(params.m * params.M / space.rho) * space.c(2 * A) / s2A
    G_sq = params.mu * space.t(B) ** 2 / space.t(A)
    return h, G_sq


def delaunay_L_from_alpha(alpha, params):
    """Action L with L^2 = m^2 M rho tan(alpha/rho) (tanh in hyperbolic space)."""
    space = params.space
    if space.sign == 0:
        return math.sqrt(params.m**2 * params.M * alpha)
    A = alpha / space.rho
    if space.sign > 0 and not (0 < A < np.pi / 2):
        raise DomainError(f"need 0 < alpha/rho < pi/2, got {A}")
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    return math.sqrt(params.mu * space.t(A))


def alpha_from_delaunay_L(L, params):
    """Inverse of :func:`delaunay_L_from_alpha`."""
    space = params.space
    if L <= 0:
        raise DomainError("L must be positive")
    if space.sign == 0:
        return L * L / (params.m**2 * params.M)
    x = L * L / params.mu
    if space.sign < 0 and x >= 1.0:
        raise DomainError("L^2 >= m^2 M rho: no bounded hyperbolic orbit")
    return space.rho * space.at(x)


def kepler_energy_and_mean_motion(L, params):
    """Energy h(L) = -m^3 M^2/(2 L^2) + kappa L^2/(2m) and n = dh/dL."""
    if L <= 0:
        raise DomainError("L must be positive")
    m, M = params.m, params.M
    kappa = params.space.kappa
    h = -(m**3) * M**2 / (2 * L * L) + kappa * L * L / (2 * m)
    n = (m**3) * M**2 / L**3 + kappa * L / m
    return h, n


def delaunay_L_from_energy(h, params):
    """Bounded-orbit action from the energy, inverting h(L)."""
    m, M = params.m, params.M
    kappa = params.space.kappa
    if kappa == 0.0:
        if h >= 0:
            raise DomainError("flat bounded orbits need h < 0")
        return math.sqrt(m**3 * M**2 / (-2 * h))
    disc = h * h + kappa * m**2 * M**2
    if disc < 0:
        raise DomainError("no bounded hyperbolic orbit: need h < -mM/rho")
    # one positive root for kappa > 0; the smaller (physical, L^2 < m^2 M rho)
    # of the two roots for kappa < 0
    L_sq = (m / kappa) * (h + math.sqrt(disc))
    if L_sq <= 0:
        raise DomainError(f"no bounded orbit at energy {h}")
    return math.sqrt(L_sq)


# --- positions along the conic ---

def position_from_true_anomaly(nu, conic, params, g=0.0):
    """Position at true anomaly nu: (r, phi, theta) with r = rho tan(phi).

    Uses the central projection r = p_sq / (1 + e cos nu), so it requires
    an orbit that stays inside the open hemisphere.
    """
    space = conic.space
    if conic.crosses_equator:
        raise ChartError("orbit reaches the equator: central projection unbounded")
    nu = np.asarray(nu, dtype=float)
    r = conic.p_sq / (1.0 + conic.e * np.cos(nu))
    phi = space.at(r / space.rho) if space.sign != 0 else r
    return r, phi, nu + g


def flat_eccentric_parametrization(u_o, conic):
    """Planar conic by its eccentric anomaly: r = a(1 - e cos u), x, y."""
    if not np.isfinite(conic.a):
        raise ChartError("projected planar conic is unbounded (equator crossing)")
    u_o = np.asarray(u_o, dtype=float)
    r = conic.a * (1.0 - conic.e * np.cos(u_o))
    x = conic.a * (np.cos(u_o) - conic.e)
    y = conic.b * np.sin(u_o)
    return r, x, y


def elliptic_parametrization(w, conic, params=None):
    """Orthogonal-projection coordinates (R, X, Y) at elliptic parameter w.

    R = rho sin(A) k' nd(w) - rho cos(A) k cd(w) and companions; valid on the
    whole orbit, including spherical orbits that cross the equator.  For a
    circular conic (k = 0) this degenerates smoothly to
    R = rho sin(A), X = R cos w, Y = R sin w.
    """
    space = conic.space
    if space.sign <= 0:
        raise ChartError("elliptic parametrization is defined for spherical conics")
    rho = space.rho
    A, E = conic.A, conic.E
    k, kp = conic.k, math.cos(E)
    sn, cn, dn = jacobi_sn_cn_dn(np.asarray(w, dtype=float), k)
    cd, nd, sd = cn / dn, 1.0 / dn, sn / dn
    sA, cA = math.sin(A), math.cos(A)
    R = rho * sA * kp * nd - rho * cA * k * cd
    X = rho * sA * kp * cd - rho * cA * k * nd
    Y = rho * math.tan(conic.beta / rho) * cA * sd
    return R, X, Y


def _w_angles(w, conic):
    """(phi, nu) along the spherical conic at parameter w, branch safe.

    cos(phi) = (R + e X)/p_sq is an exact identity, so phi is recovered
    without ambiguity even past the equator; nu is unwrapped against the
    Jacobi amplitude, which winds with w.
    """
    rho = conic.space.rho
    R, X, Y = elliptic_parametrization(w, conic)
    cos_phi = (R + conic.e * X) / conic.p_sq
    phi = np.arctan2(R / rho, cos_phi)
    if conic.circular:
        nu = np.asarray(w, dtype=float)
    else:
        u = jacobi_am(np.asarray(w, dtype=float), conic.k)
        nu_p = np.arctan2(Y, X)
        nu = nu_p + 2 * np.pi * np.round((u - nu_p) / (2 * np.pi))
    return phi, nu


def curved_kepler_equation(w, conic, params=None):
    """Mean anomaly ell(w) of the spherical Kepler problem.

    ell = arccos(cd w) - (cot(A)/2) log((1 + k sn w)/(1 - k sn w)), with the
    arccos branch unwrapped so ell is continuous, strictly increasing and
    satisfies ell(w + 4K) = ell(w) + 2 pi.
    """
    space = conic.space
    if space.sign <= 0:
        raise ChartError("curved Kepler equation is defined for spherical conics")
    w = np.asarray(w, dtype=float)
    k = conic.k
    if conic.circular:
        return w * (np.pi / (2 * complete_K(k)))
    K = complete_K(k)
    sn, cn, dn = jacobi_sn_cn_dn(w, k)
    cd = cn / dn
    n4 = np.floor(w / (4 * K))
    w_r = w - 4 * K * n4
    theta = np.arccos(np.clip(cd, -1.0, 1.0))
    theta = np.where(w_r > 2 * K, 2 * np.pi - theta, theta) + 2 * np.pi * n4
    log_term = np.log1p(k * sn) - np.log1p(-k * sn)
    return theta - 0.5 / math.tan(conic.A) * log_term


def solve_curved_kepler(ell, conic, tol=_KEPLER_TOL, max_iter=100):
    """Invert the curved Kepler equation: w with ell(w) = ell.

    Newton iteration with a bisection safeguard; d(ell)/dw = sin(phi)/sin(A)
    is strictly positive on bounded orbits, so the root is unique.
    """
    space = conic.space
    if space.sign <= 0:
        raise ChartError("curved Kepler equation is defined for spherical conics")
    ell = np.asarray(ell, dtype=float)
    scalar = ell.ndim == 0
    ell = np.atleast_1d(ell)
    K = complete_K(conic.k)
    if conic.circular:
        w = ell * (2 * K / np.pi)
        return w[0] if scalar else w
    sA = math.sin(conic.A)

    # initial bracket from the linear scaling w ~ (2K/pi) ell, then widen
    lo = (2 * K / np.pi) * ell - 2 * K
    hi = (2 * K / np.pi) * ell + 2 * K
    for _ in range(8):
        bad_lo = curved_kepler_equation(lo, conic) > ell
        bad_hi = curved_kepler_equation(hi, conic) < ell
        if not (np.any(bad_lo) or np.any(bad_hi)):
            break
        lo = np.where(bad_lo, lo - 2 * K, lo)
        hi = np.where(bad_hi, hi + 2 * K, hi)
    w = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f = curved_kepler_equation(w, conic) - ell
        # the arccos branch is ill-conditioned near apsides, where the
        # evaluation noise can exceed tol; a collapsed bracket is converged
        done = (np.abs(f) < tol) | (hi - lo < 1e-14 * (1.0 + np.abs(w)))
        if np.all(done):
            return w[0] if scalar else w
        phi, _ = _w_angles(w, conic)
        slope = np.sin(phi) / sA
        safe = slope > 1e-14
        w_new = np.where(safe, w - f / np.where(safe, slope, 1.0), 0.5 * (lo + hi))
        # bisection safeguard when Newton leaves the bracket
        outside = (w_new <= lo) | (w_new >= hi)
        w_new = np.where(outside, 0.5 * (lo + hi), w_new)
        f_new = curved_kepler_equation(w_new, conic) - ell
        lo = np.where(f_new < 0, w_new, lo)
        hi = np.where(f_new >= 0, w_new, hi)
        w = w_new
    raise NonConvergenceError(
        f"curved Kepler solver did not reach {tol} in {max_iter} iterations")


# --- mean-anomaly law for the flat-eccentric path ---

def mean_anomaly_weight(u_o, conic, params):
    """d(ell)/d(u_o) = n sqrt(a/M) r / (1 + kappa r^2), exact for every sign."""
    r, _, _ = flat_eccentric_parametrization(u_o, conic)
    L = delaunay_L_from_alpha(conic.alpha, params)
    _, n = kepler_energy_and_mean_motion(L, params)
    kappa = conic.space.kappa
    return n * math.sqrt(conic.a / params.M) * r / (1.0 + kappa * r * r)


class _FourierMeanAnomaly:
    """Spectral ell(u_o) for one conic, from the FFT of the exact weight.

    Used as the mean-anomaly hub where the elliptic-parameter machinery is
    unavailable (hyperbolic space) and as an independent cross-check path
    on the sphere.
    """

    def __init__(self, conic, params, n_modes=256):
        u = np.arange(n_modes) * 2 * np.pi / n_modes
        w = mean_anomaly_weight(u, conic, params)
        c = np.fft.rfft(w) / n_modes
        self.mean = c[0].real
        self.conic = conic
        self.params = params
        self._c = c
        self._j = np.arange(1, len(c))

    def ell(self, u_o):
        u_o = np.asarray(u_o, dtype=float)
        osc = np.zeros_like(u_o)
        for j, cj in zip(self._j, self._c[1:]):
            # integral of 2 Re(c_j e^{iju}) from 0 to u
            osc = osc + 2.0 * (cj.imag * (np.cos(j * u_o) - 1.0)
                               + cj.real * np.sin(j * u_o)) / j
        return self.mean * u_o + osc

    def solve(self, ell, tol=_KEPLER_TOL, max_iter=200):
        ell = np.asarray(ell, dtype=float)
        u0 = ell / self.mean
        lo, hi = u0 - 2 * np.pi, u0 + 2 * np.pi
        for _ in range(8):
            bad_lo = self.ell(lo) > ell
            bad_hi = self.ell(hi) < ell
            if not (np.any(bad_lo) or np.any(bad_hi)):
                break
            lo = np.where(bad_lo, lo - 2 * np.pi, lo)
            hi = np.where(bad_hi, hi + 2 * np.pi, hi)
        u = 0.5 * (lo + hi)
        for _ in range(max_iter):
            f = self.ell(u) - ell
            if np.all(np.abs(f) < tol):
                return u
            slope = mean_anomaly_weight(u, self.conic, self.params)
            u_new = u - f / slope
            outside = (u_new <= lo) | (u_new >= hi)
            u_new = np.where(outside, 0.5 * (lo + hi), u_new)
            f_new = self.ell(u_new) - ell
            lo = np.where(f_new < 0, u_new, lo)
            hi = np.where(f_new >= 0, u_new, hi)
            u = u_new
        raise NonConvergenceError("mean-anomaly inversion stalled")


# --- anomaly conversions ---

def _nu_to_u_o(nu, e):
    # principal value, then the branch with |nu - u_o| < pi (true always)
    u = 2 * np.arctan2(math.sqrt(1 - e) * np.sin(nu / 2),
                       math.sqrt(1 + e) * np.cos(nu / 2))
    return u + 2 * np.pi * np.round((nu - u) / (2 * np.pi))


def _u_o_to_nu(u_o, e):
    nu = 2 * np.arctan2(math.sqrt(1 + e) * np.sin(u_o / 2),
                        math.sqrt(1 - e) * np.cos(u_o / 2))
    return nu + 2 * np.pi * np.round((u_o - nu) / (2 * np.pi))


def _w_from_nu(nu, conic, tol=1e-12):
    """Invert nu(w) by safeguarded Newton; nu is strictly increasing in w."""
    nu = np.asarray(nu, dtype=float)
    K = complete_K(conic.k)
    lo = (2 * K / np.pi) * nu - 2 * K
    hi = (2 * K / np.pi) * nu + 2 * K
    for _ in range(8):
        _, nlo = _w_angles(lo, conic)
        _, nhi = _w_angles(hi, conic)
        bad_lo = nlo > nu
        bad_hi = nhi < nu
        if not (np.any(bad_lo) or np.any(bad_hi)):
            break
        lo = np.where(bad_lo, lo - 2 * K, lo)
        hi = np.where(bad_hi, hi + 2 * K, hi)
    w = 0.5 * (lo + hi)
    for _ in range(200):
        _, nw = _w_angles(w, conic)
        f = nw - nu
        if np.all(np.abs(f) < tol):
            return w
        lo = np.where(f < 0, w, lo)
        hi = np.where(f >= 0, w, hi)
        w = 0.5 * (lo + hi)
    raise NonConvergenceError("true-anomaly inversion stalled")


def _am_inverse(u, k, tol=1e-13):
    """Invert the Jacobi amplitude; d(am)/dw = dn >= k' > 0."""
    u = np.asarray(u, dtype=float)
    K = complete_K(k)
    w = u * (2 * K / np.pi)
    for _ in range(60):
        f = jacobi_am(w, k) - u
        if np.all(np.abs(f) < tol):
            return w
        _, _, dn = jacobi_sn_cn_dn(w, k)
        w = w - f / dn
    raise NonConvergenceError("amplitude inversion stalled")


def anomaly_convert(value, frm, to, conic, params):
    """Convert between anomaly parametrizations of one bounded conic.

    Supported names: mean, true, flat_eccentric, elliptic_w, geometric_u.
    All five vanish together at pericenter and the conversions are mutually
    consistent cycles.  The elliptic parameter and geometric anomaly exist
    on spherical conics only; flat space uses the classical relations; in
    hyperbolic space the mean anomaly goes through the spectral quadrature
    of the exact d(ell)/d(u_o) weight.
    """
    for name in (frm, to):
        if name not in ANOMALIES:
            raise DomainError(f"unknown anomaly {name!r}")
    if conic.circular:
        raise ChartError("anomaly conversions are degenerate on circular conics")
    if frm == to:
        return np.asarray(value, dtype=float)
    space = conic.space
    value = np.asarray(value, dtype=float)

    if space.sign > 0:
        # hub: elliptic parameter w
        to_w = {
            "elliptic_w": lambda v: v,
            "mean": lambda v: solve_curved_kepler(v, conic),
            "geometric_u": lambda v: _am_inverse(v, conic.k),
            "true": lambda v: _w_from_nu(v, conic),
            "flat_eccentric": lambda v: _w_from_nu(_u_o_to_nu(v, conic.e), conic),
        }
        from_w = {
            "elliptic_w": lambda w: w,
            "mean": lambda w: curved_kepler_equation(w, conic),
            "geometric_u": lambda w: jacobi_am(w, conic.k),
            "true": lambda w: _w_angles(w, conic)[1],
            "flat_eccentric": lambda w: _nu_to_u_o(_w_angles(w, conic)[1], conic.e),
        }
        if frm == "flat_eccentric" or to == "flat_eccentric":
            if not np.isfinite(conic.a):
                raise ChartError("flat-eccentric anomaly undefined past the equator")
        return from_w[to](to_w[frm](value))

    if space.sign == 0:
        e = conic.e
        to_u = {
            "flat_eccentric": lambda v: v,
            "elliptic_w": lambda v: v,          # w degenerates to u_o at k = 0
            "geometric_u": lambda v: v,
            "true": lambda v: _nu_to_u_o(v, e),
            "mean": lambda v: _solve_flat_kepler(v, e),
        }
        from_u = {
            "flat_eccentric": lambda u: u,
            "elliptic_w": lambda u: u,
            "geometric_u": lambda u: u,
            "true": lambda u: _u_o_to_nu(u, e),
            "mean": lambda u: u - e * np.sin(u),
        }
        return from_u[to](to_u[frm](value))

    # hyperbolic: no elliptic parameter machinery
    if frm in ("elliptic_w", "geometric_u") or to in ("elliptic_w", "geometric_u"):
        raise ChartError("elliptic-parameter anomalies exist on spherical conics only")
    fourier = _FourierMeanAnomaly(conic, params)
    to_u = {
        "flat_eccentric": lambda v: v,
        "true": lambda v: _nu_to_u_o(v, conic.e),
        "mean": lambda v: fourier.solve(v),
    }
    from_u = {
        "flat_eccentric": lambda u: u,
        "true": lambda u: _u_o_to_nu(u, conic.e),
        "mean": lambda u: fourier.ell(u),
    }
    return from_u[to](to_u[frm](value))


def _solve_flat_kepler(ell, e, tol=_KEPLER_TOL):
    ell = np.asarray(ell, dtype=float)
    u = ell + e * np.sin(ell)
    for _ in range(60):
        f = u - e * np.sin(u) - ell
        if np.all(np.abs(f) < tol):
            return u
        u = u - f / (1 - e * np.cos(u))
    raise NonConvergenceError("flat Kepler solver stalled")


# --- Poincare chart ---

def delaunay_to_poincare(state):
    """(L, ell, G, g) -> (Lambda, lambda, xi, eta); regular at circular orbits."""
    rad = math.sqrt(max(2.0 * (state.L - abs(state.G)), 0.0))
    return PoincareState(state.L, state.ell + state.g,
                         rad * math.cos(state.g), rad * math.sin(state.g))


def poincare_to_delaunay(state, orientation=+1):
    """Inverse chart; at xi = eta = 0 the pericenter angle defaults to g = 0."""
    rho_sq = state.xi**2 + state.eta**2
    G = state.Lambda - 0.5 * rho_sq
    if rho_sq == 0.0:
        g = 0.0
        degenerate = True
    else:
        g = math.atan2(state.eta, state.xi)
        degenerate = False
    st = DelaunayState(state.Lambda, state.lam - g, orientation * G, g)
    return st, degenerate


# --- exact propagation and the reduced chart ---

def kepler_flow(state, dt, params):
    """Exact Kepler propagator: ell advances by n(L) dt, all else fixed."""
    _, n = kepler_energy_and_mean_motion(state.L, params)
    return DelaunayState(state.L, math.remainder(state.ell + n * dt, 2 * np.pi),
                         state.G, state.g)


def delaunay_to_reduced(state, params):
    """Chart map (L, ell, G, g) -> (phi, p_phi, theta, p_theta).

    p_phi is recovered from the energy; its sign is positive from pericenter
    to apocenter (mean anomaly in (0, pi) mod 2 pi).
    """
    space = params.space
    if space.sign == 0:
        raise ChartError("the (phi, p_phi) chart needs nonzero curvature")
    conic = conic_from_actions(state.L, state.G, params)
    orient = 1.0 if state.G >= 0 else -1.0
    if space.sign > 0:
        w = solve_curved_kepler(state.ell, conic)
        phi, nu = _w_angles(w, conic)
    else:
        fourier = _FourierMeanAnomaly(conic, params)
        u_o = fourier.solve(state.ell)
        r, _, _ = flat_eccentric_parametrization(u_o, conic)
        phi = space.at(r / space.rho)
        nu = _u_o_to_nu(u_o, conic.e)
    h, _ = kepler_energy_and_mean_motion(state.L, params)
    m, M, rho = params.m, params.M, space.rho
    p_phi_sq = (2 * m * rho**2 * (h + (m * M / rho) * space.c(phi) / space.s(phi))
                - state.G**2 / space.s(phi) ** 2)
    p_phi = math.sqrt(max(p_phi_sq, 0.0))
    if math.remainder(state.ell, 2 * np.pi) < 0:
        p_phi = -p_phi
    theta = state.g + orient * nu
    return float(phi), float(p_phi), float(theta), float(state.G)


def reduced_to_delaunay(phi, p_phi, theta, p_theta, params):
    """Osculating Delaunay elements of a reduced-chart point.

    Inverse of :func:`delaunay_to_reduced`; exact, and defined wherever the
    instantaneous Kepler energy admits a bounded orbit.
    """
    space = params.space
    if space.sign == 0:
        raise ChartError("the (phi, p_phi) chart needs nonzero curvature")
    m, M, rho = params.m, params.M, space.rho
    sphi = space.s(phi)
    h = ((p_phi**2 + p_theta**2 / sphi**2) / (2 * m * rho**2)
         - (m * M / rho) * space.c(phi) / sphi)
    L = delaunay_L_from_energy(h, params)
    G = p_theta
    orient = 1.0 if G >= 0 else -1.0
    r = rho * space.t(phi)
    p_sq = G * G / (m * m * M)
    e_cos_nu = p_sq / r - 1.0
    e_sin_nu = p_sq * p_phi / (rho * abs(G))
    nu = math.atan2(e_sin_nu, e_cos_nu)
    g = theta - orient * nu
    conic = conic_from_actions(L, G, params)
    if space.sign > 0:
        w = _w_from_nu(np.asarray(nu, dtype=float), conic)
        ell = float(curved_kepler_equation(w, conic))
    else:
        fourier = _FourierMeanAnomaly(conic, params)
        u_o = _nu_to_u_o(nu, conic.e)
        ell = float(fourier.ell(u_o))
    return DelaunayState(L, ell, G, g)


def reduced_kepler_hamiltonian(phi, p_phi, p_theta, params):
    """Curved Kepler energy in the (phi, p_phi, theta, p_theta) chart."""
    space = params.space
    sphi = space.s(phi)
    return ((p_phi**2 + p_theta**2 / sphi**2) / (2 * params.m * space.rho**2)
            - (params.m * params.M / space.rho) * space.c(phi) / sphi)


def reduced_kepler_field(t, state, params):
    """Hamiltonian vector field of the curved Kepler problem (oracle side)."""
    phi, p_phi, theta, p_theta = state
    space = params.space
    m, M, rho = params.m, params.M, space.rho
    sphi, cphi = space.s(phi), space.c(phi)
    dphi = p_phi / (m * rho**2)
    dp_phi = (p_theta**2 * cphi / (m * rho**2 * sphi**3)
              - (m * M / rho) / sphi**2)
    dtheta = p_theta / (m * rho**2 * sphi**2)
    return np.array([dphi, dp_phi, dtheta, 0.0])
