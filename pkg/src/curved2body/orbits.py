"""Long-time return map, continuation of periodic orbits, and lifting.

The return map integrates the leading secular system displayed by the
continuation argument,

    dG/dlam = (eps^3/2pi) m_frak(L, G) sin(g),
    dg/dlam = -sign (eps^2/pi) G,

over the window lam in [0, 2pi/eps^2] (lam = 2pi t_hat), and reports
(Delta G/eps, Delta g).  As eps -> 0 this converges to the algebraic map
P0(G, g) = (m_frak sin g, -2 G), whose roots against the winding target
(0, -2 pi n) sit at g = 0 mod pi, G = pi n; Newton continues them to
eps > 0.  mode='full' integrates the unscaled reduced flow over the same
window instead and reads (G, g) through the exact osculating chart, which
is the ground-truth check of the secular field.

Lifting reconstructs the two-body motion on the surface from a reduced
trajectory: bodies at q1 = (-rho s(m2 phi), rho c(m2 phi)) and
q2 = (rho s(m1 phi), rho c(m1 phi)) in the (j, k) plane, rotated by
R_i(lambda) R_k(theta) with cos(lambda) = p_theta/C, then by the
reconstruction phase R_k(omega), omega = kappa C t.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kepler as kp
from . import reduction as rd
from . import secular as sc
from .errors import ChartError, InfeasibleError, NonConvergenceError
from .integrators import Trajectory, integrate


@dataclass(frozen=True)
class ReturnMapResult:
    delta_G_scaled: float
    delta_g: float
    window: float
    G_final: float
    g_final: float


@dataclass(frozen=True)
class PeriodicOrbit:
    G_hat: float
    g: float
    eps: float
    residual: float
    residual_history: tuple
    newton_iterations: int
    jacobian_condition: float
    closure_error: float
    winding: float


@dataclass
class LiftedOrbit:
    times: np.ndarray
    body1: np.ndarray
    body2: np.ndarray
    omega: np.ndarray
    lam: np.ndarray
    phi_error: float
    surface_error: float


def _secular_truncated_rhs(L_hat, C_hat, masses, eps, sign):
    def rhs(lam, y):
        G, g = y
        q = max((C_hat**2 - G * G) * (L_hat**2 - G * G), 0.0)
        m_frak = (masses.m_delta / masses.m**2) * L_hat * G * math.sqrt(q) \
            if sign > 0 else 0.0
        return [(eps**3 / (2 * np.pi)) * m_frak * math.sin(g),
                -sign * (eps**2 / np.pi) * G]
    return rhs


def limit_map(G0, g0, L_hat, C_hat, masses):
    """P0(G, g) = (m_frak sin g, -2 G), the eps -> 0 return map."""
    return np.array([sc.frak_m(L_hat, G0, C_hat, masses) * math.sin(g0),
                     -2.0 * G0])


def return_map(G0, g0, L_hat, C_hat, masses, space, eps, mode="secular",
               tol=1e-12, n_strobe=None):
    """Accumulated (Delta G/eps, Delta g) over the window 2 pi/eps^2.

    mode='secular' integrates the truncated secular system; mode='full'
    integrates the full reduced flow in physical time over the same scaled
    window and samples the osculating (G_hat, g) stroboscopically.
    """
    if eps > 0.2:
        raise InfeasibleError("return-map window assumes eps <= 0.2")
    window = 2 * np.pi / eps**2
    if mode == "secular":
        traj = integrate(_secular_truncated_rhs(L_hat, C_hat, masses, eps,
                                                space.sign),
                         [G0, g0], (0.0, window), tol=tol, sampling=2)
        G_f, g_f = traj.final
        return ReturnMapResult((G_f - G0) / eps, g_f - g0, window, G_f, g_f)
    if mode != "full":
        raise InfeasibleError(f"unknown return-map mode {mode!r}")

    rho = space.rho
    params = masses.kepler_params(space)
    scaled0 = rd.ScaledDelaunay(L_hat, 0.0, G0, g0, C_hat, eps)
    st0 = rd.unscale(scaled0, rho)
    C = math.sqrt(rho * eps) * C_hat
    chart = kp.delaunay_to_reduced(st0, params)
    # lam-window 2 pi/eps^2 corresponds to t_hat in [0, eps^-2]
    t_end = rd.time_scale_factor(rho, eps) / eps**2
    if n_strobe is None:
        n_strobe = 400
    traj = integrate(lambda t, y: rd.reduced_vector_field(
        rd.ReducedState(*y), masses, space, C),
        chart, (0.0, t_end), tol=tol, sampling=int(n_strobe))
    root = math.sqrt(rho * eps)
    Gs, gs = [], []
    for s in traj.states:
        osc = kp.reduced_to_delaunay(*s, params)
        Gs.append(osc.G / root)
        gs.append(osc.g)
    gs = np.unwrap(np.array(gs))
    return ReturnMapResult((Gs[-1] - Gs[0]) / eps, gs[-1] - gs[0], window,
                           Gs[-1], gs[-1])


def find_periodic(m_revs, n_prec, L_hat, C_hat, masses, space,
                  max_iter=25, tol=1e-10, fd_step=1e-6):
    """Continue the (m revolutions, n precessions) periodic orbit.

    Sets eps = 1/sqrt(m), seeds the Newton iteration at
    (G, g) = (pi n, 0) or (pi n, pi), and solves
    return_map(G, g) = (0, -2 pi n).  The seed must satisfy
    pi n < min(L_hat, C_hat) and the masses must be unequal, otherwise the
    continuation is degenerate.
    """
    if m_revs < 25 or n_prec < 1:
        raise InfeasibleError("need m >= 25 (eps = 1/sqrt(m) <= 0.2) and n >= 1")
    eps = 1.0 / math.sqrt(m_revs)
    target = np.array([0.0, -2 * np.pi * n_prec])
    G_seed = np.pi * n_prec
    if G_seed >= min(L_hat, C_hat):
        raise InfeasibleError(
            f"seed G = pi n = {G_seed:.3f} outside the chart "
            f"(min(L_hat, C_hat) = {min(L_hat, C_hat):.3f})")
    if masses.equal:
        raise InfeasibleError("equal masses: m_frak vanishes and the "
                              "continuation Jacobian is degenerate")
    if space.sign <= 0:
        raise InfeasibleError("continuation uses the spherical cubic term")

    def P(x):
        res = return_map(x[0], x[1], L_hat, C_hat, masses, space, eps)
        return np.array([res.delta_G_scaled, res.delta_g])

    last_error = None
    for g_seed in (0.0, np.pi):
        x = np.array([G_seed, g_seed])
        history = []
        J = np.eye(2)
        try:
            for it in range(max_iter):
                R = P(x) - target
                r_norm = float(np.linalg.norm(R))
                history.append(r_norm)
                if r_norm < tol:
                    closure = _closure_error(x, L_hat, C_hat, masses, space,
                                             eps, n_prec)
                    return PeriodicOrbit(
                        float(x[0]), float(x[1]), eps, r_norm, tuple(history),
                        it, float(np.linalg.cond(J)), closure,
                        float(P(x)[1]))
                for j in range(2):
                    d = np.zeros(2)
                    d[j] = fd_step
                    J[:, j] = (P(x + d) - P(x - d)) / (2 * fd_step)
                step, *_ = np.linalg.lstsq(J, -R, rcond=None)
                lam = 1.0
                for _ in range(10):
                    trial = x + lam * step
                    if np.linalg.norm(P(trial) - target) < r_norm:
                        break
                    lam *= 0.5
                x = x + lam * step
            last_error = NonConvergenceError(
                f"Newton stalled at residual {history[-1]:.2e} from seed "
                f"g = {g_seed}")
        except (ChartError, ValueError) as exc:
            last_error = exc
    raise last_error if last_error is not None else NonConvergenceError(
        "continuation failed")


def _closure_error(x, L_hat, C_hat, masses, space, eps, n_prec):
    """Re-integrate the continued orbit and measure its failure to close."""
    res = return_map(x[0], x[1], L_hat, C_hat, masses, space, eps, tol=1e-13)
    dG = res.G_final - x[0]
    dg = res.delta_g + 2 * np.pi * n_prec
    return float(math.hypot(dG, dg))


# --- lifting ---

def _rot_k(a):
    c, s = np.cos(a), np.sin(a)
    R = np.zeros(np.shape(a) + (3, 3)) if np.ndim(a) else np.zeros((3, 3))
    R[..., 0, 0], R[..., 0, 1] = c, -s
    R[..., 1, 0], R[..., 1, 1] = s, c
    R[..., 2, 2] = 1.0
    return R

def _rot_i(a):
    c, s = np.cos(a), np.sin(a)
    R = np.zeros(np.shape(a) + (3, 3)) if np.ndim(a) else np.zeros((3, 3))
    R[..., 0, 0] = 1.0
    R[..., 1, 1], R[..., 1, 2] = c, -s
    R[..., 2, 1], R[..., 2, 2] = s, c
    return R

def _boost_i(a):
    c, s = np.cosh(a), np.sinh(a)
    R = np.zeros(np.shape(a) + (3, 3)) if np.ndim(a) else np.zeros((3, 3))
    R[..., 0, 0] = 1.0
    R[..., 1, 1], R[..., 1, 2] = c, s
    R[..., 2, 1], R[..., 2, 2] = s, c
    return R


def lift_orbit(traj, C, masses, space):
    """Two-body configurations over a reduced trajectory.

    traj.states columns are (phi, p_phi, theta, p_theta) or the same with a
    fifth reconstruction-phase column omega (produced by integrating
    ``reduced_vector_field_with_phase``).  With the phase column the lifted
    curve is an exact unreduced trajectory and carries the angular momentum
    C k-hat; without it the leading-order uniform phase omega = kappa C t is
    used, which is the exact phase of the truncated Hamiltonian.  The frame
    is R_k(omega) R_i(lambda) R_k(theta) with cos(lambda) = p_theta/C.
    phi_error and surface_error record the worst reconstruction defects.
    """
    if C == 0:
        raise ChartError("lifting needs a nonzero total angular momentum")
    rho = space.rho
    phi = traj.states[:, 0]
    theta = traj.states[:, 2]
    p_theta = traj.states[:, 3]
    t = traj.times
    if space.sign > 0:
        if np.any(np.abs(p_theta) > C * (1 + 1e-12)):
            raise ChartError("|p_theta| > C: state outside the coadjoint chart")
        lam = np.arccos(np.clip(p_theta / C, -1.0, 1.0))
        tilt = _rot_i(lam)
    elif space.sign < 0:
        lam = np.arcsinh(p_theta / C)
        tilt = _boost_i(lam)
    else:
        raise ChartError("lifting is defined on curved surfaces")
    if traj.states.shape[1] >= 5:
        omega = traj.states[:, 4]
    else:
        omega = space.kappa * C * t
    frame = _rot_k(omega) @ tilt @ _rot_k(theta)
    s, c = space.s, space.c
    q1_body = rho * np.stack([np.zeros_like(phi), -s(masses.m2 * phi),
                              c(masses.m2 * phi)], axis=-1)
    q2_body = rho * np.stack([np.zeros_like(phi), s(masses.m1 * phi),
                              c(masses.m1 * phi)], axis=-1)
    body1 = np.einsum("nij,nj->ni", frame, q1_body)
    body2 = np.einsum("nij,nj->ni", frame, q2_body)

    if space.sign > 0:
        dot = np.einsum("ni,ni->n", body1, body2) / rho**2
        sep = np.arccos(np.clip(dot, -1.0, 1.0))
        norm1 = np.einsum("ni,ni->n", body1, body1)
        norm2 = np.einsum("ni,ni->n", body2, body2)
        surf = max(np.abs(norm1 - rho**2).max(), np.abs(norm2 - rho**2).max())
    else:
        mink = np.array([1.0, 1.0, -1.0])
        dot = np.einsum("ni,i,ni->n", body1, mink, body2) / rho**2
        sep = np.arccosh(np.clip(-dot, 1.0, None))
        norm1 = np.einsum("ni,i,ni->n", body1, mink, body1)
        norm2 = np.einsum("ni,i,ni->n", body2, mink, body2)
        surf = max(np.abs(norm1 + rho**2).max(), np.abs(norm2 + rho**2).max())
    phi_error = float(np.abs(sep - phi).max())
    return LiftedOrbit(t, body1, body2, omega, lam, phi_error, float(surf))


def lift_angular_momentum(lifted, masses, order=4):
    """Total angular momentum of a lifted orbit, velocities by differencing.

    Uses centered differences of the given order on the (assumed uniform)
    time grid; returns the (n_interior, 3) momentum samples.
    """
    t = lifted.times
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9):
        raise ChartError("momentum reconstruction needs a uniform time grid")

    def deriv(q):
        if order == 4:
            return (q[:-4] - 8 * q[1:-3] + 8 * q[3:-1] - q[4:]) / (12 * dt)
        return (q[2:] - q[:-2]) / (2 * dt)

    v1 = deriv(lifted.body1)
    v2 = deriv(lifted.body2)
    trim = slice(2, -2) if order == 4 else slice(1, -1)
    q1 = lifted.body1[trim]
    q2 = lifted.body2[trim]
    return (masses.m1 * np.cross(q1, v1) + masses.m2 * np.cross(q2, v2))
