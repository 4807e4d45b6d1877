"""Trajectory propagation and invariant monitoring.

One adaptive explicit scheme (the 8th-order Dormand-Prince pair, dense
output from its own continuous extension) serves every oracle in the suite;
conservative tolerances stand in for symplecticity at the run lengths needed
here.  A fixed-step Stormer-Verlet stepper for separable Hamiltonians is
included for long secular demonstrations.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NearCollisionError

_TOL_RANGE = (1e-14, 1e-3)


@dataclass
class Trajectory:
    """Time-stamped states with optional invariant-drift metadata."""

    times: np.ndarray
    states: np.ndarray
    invariant_drift: dict = field(default_factory=dict)
    dense: object = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or len(self.times) != len(self.states):
            raise DomainError("times and states must have matching lengths")
        if np.any(np.diff(self.times) <= 0) and len(self.times) > 1:
            raise DomainError("times must be strictly increasing")

    @property
    def initial(self):
        return self.states[0]

    @property
    def final(self):
        return self.states[-1]


def integrate(field_fn, initial, t_span, tol=1e-12, sampling=200,
              events=None, dense=False, max_step=np.inf):
    """Propagate d(state)/dt = field_fn(t, state) with DOP853.

    Parameters
    ----------
    field_fn : callable(t, state) -> array
    initial : array-like
    t_span : (t0, t1)
    tol : float
        Local error tolerance (both relative and absolute), in
        [1e-14, 1e-3].
    sampling : int or array or None
        Number of equispaced output samples, an explicit time grid, or
        None for the solver's own accepted steps.
    events : optional event functions handed to the solver; crossings are
        located by root finding on the dense output.
    dense : bool
        Keep the continuous extension on the returned trajectory.

    Raises
    ------
    NearCollisionError
        On step-size underflow; carries the last valid time and state.
    """
    if not (_TOL_RANGE[0] <= tol <= _TOL_RANGE[1]):
        raise DomainError(f"tol must lie in {_TOL_RANGE}, got {tol}")
    t0, t1 = t_span
    if t1 <= t0:
        raise DomainError("t_span must satisfy t1 > t0")
    initial = np.asarray(initial, dtype=float)

    def wrapped(t, y):
        dy = np.asarray(field_fn(t, y), dtype=float)
        if not np.all(np.isfinite(dy)):
            raise NearCollisionError("non-finite derivative", t, y.copy())
        return dy

    if sampling is None:
        t_eval = None
    elif np.isscalar(sampling):
        t_eval = np.linspace(t0, t1, int(sampling))
    else:
        t_eval = np.asarray(sampling, dtype=float)

    sol = solve_ivp(wrapped, (t0, t1), initial, method="DOP853",
                    rtol=tol, atol=tol, t_eval=t_eval, events=events,
                    dense_output=dense, max_step=max_step)
    if sol.status == -1:
        err = NearCollisionError(sol.message,
                                 sol.t[-1] if len(sol.t) else t0,
                                 sol.y[:, -1] if len(sol.t) else initial)
        if len(sol.t) > 1:
            err.partial = Trajectory(sol.t, sol.y.T)
        raise err
    traj = Trajectory(sol.t, sol.y.T, dense=sol.sol if dense else None)
    if events is not None:
        traj.invariant_drift["event_times"] = sol.t_events
    return traj


def monitor(traj, invariants):
    """Max relative drift of each named invariant along a trajectory.

    drift = max_t |f(state_t) - f(state_0)| / max(1, |f(state_0)|)
    """
    report = {}
    for name, fn in invariants.items():
        values = np.array([fn(s) for s in traj.states])
        ref = values[0]
        report[name] = float(np.max(np.abs(values - ref)) / max(1.0, abs(ref)))
    traj.invariant_drift.update(report)
    return report


def stormer_verlet(grad_T, grad_V, q0, p0, dt, n_steps):
    """Fixed-step leapfrog for separable H = T(p) + V(q).

    Returns (times, qs, ps); second order, symplectic.
    """
    q = np.asarray(q0, dtype=float).copy()
    p = np.asarray(p0, dtype=float).copy()
    qs = np.empty((n_steps + 1, q.size))
    ps = np.empty((n_steps + 1, p.size))
    qs[0], ps[0] = q, p
    for i in range(n_steps):
        p = p - 0.5 * dt * np.asarray(grad_V(q))
        q = q + dt * np.asarray(grad_T(p))
        p = p - 0.5 * dt * np.asarray(grad_V(q))
        qs[i + 1], ps[i + 1] = q, p
    return dt * np.arange(n_steps + 1), qs, ps
