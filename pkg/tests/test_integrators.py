import numpy as np
import pytest

from curved2body import kepler as kp
from curved2body.errors import DomainError, NearCollisionError
from curved2body.integrators import Trajectory, integrate, monitor, stormer_verlet


def harmonic(t, y):
    return np.array([y[1], -y[0]])


class TestIntegrate:
    def test_harmonic_period(self):
        traj = integrate(harmonic, [1.0, 0.0], (0, 2 * np.pi), tol=1e-12)
        np.testing.assert_allclose(traj.final, [1.0, 0.0], atol=1e-10)

    def test_zero_field(self):
        traj = integrate(lambda t, y: np.zeros(3), [1.0, 2.0, 3.0], (0, 5.0))
        np.testing.assert_allclose(traj.states,
                                   np.tile([1.0, 2.0, 3.0], (len(traj.times), 1)))

    def test_kepler_vs_exact_propagator(self):
        params = kp.KeplerParams(0.5, 1.0, kp.CurvedSpace.sphere(1.0))
        st = kp.DelaunayState(0.4, 0.3, 0.25, 1.1)
        chart = kp.delaunay_to_reduced(st, params)
        _, n = kp.kepler_energy_and_mean_motion(st.L, params)
        T = 10 * 2 * np.pi / n
        traj = integrate(lambda t, y: kp.reduced_kepler_field(t, y, params),
                         chart, (0, T), tol=1e-12, sampling=21)
        for t, s in zip(traj.times, traj.states):
            ex = kp.kepler_flow(st, t, params)
            phi, _, theta, _ = kp.delaunay_to_reduced(ex, params)
            p1 = np.array([np.sin(phi) * np.cos(theta),
                           np.sin(phi) * np.sin(theta), np.cos(phi)])
            p2 = np.array([np.sin(s[0]) * np.cos(s[2]),
                           np.sin(s[0]) * np.sin(s[2]), np.cos(s[0])])
            assert np.linalg.norm(p1 - p2) < 1e-8

    def test_tolerance_domain(self):
        with pytest.raises(DomainError):
            integrate(harmonic, [1, 0], (0, 1), tol=1e-2)

    def test_nonfinite_field_reported(self):
        def bad(t, y):
            return np.array([1.0 / (0.5 - t), 0.0])
        with pytest.raises(NearCollisionError):
            integrate(bad, [0.0, 0.0], (0, 1.0))

    def test_determinism(self):
        a = integrate(harmonic, [1.0, 0.2], (0, 10.0), tol=1e-10)
        b = integrate(harmonic, [1.0, 0.2], (0, 10.0), tol=1e-10)
        assert np.array_equal(a.states, b.states)

    def test_convergence_order_in_step(self):
        # with tolerances slack, the error is controlled by max_step; the
        # order-8 pair must gain >= 10x per step halving until the 1e-12 floor
        errs = []
        for h in (0.5, 0.25):
            traj = integrate(harmonic, [1.0, 0.0], (0, 2 * np.pi), tol=1e-3,
                             max_step=h, sampling=2)
            errs.append(np.linalg.norm(traj.final - [1.0, 0.0]))
        assert errs[0] > 1e-12 and errs[1] < errs[0] / 10

    def test_tolerance_knob_tracks_error(self):
        errs = []
        for tol in (1e-6, 1e-8, 1e-10):
            traj = integrate(harmonic, [1.0, 0.0], (0, 20 * np.pi), tol=tol,
                             sampling=2)
            errs.append(np.linalg.norm(traj.final - [1.0, 0.0]))
        assert errs[1] < errs[0] and errs[2] < errs[1]

    def test_event_detection(self):
        def cross(t, y):
            return y[0]
        cross.direction = -1
        traj = integrate(harmonic, [1.0, 0.0], (0, 2 * np.pi), tol=1e-12,
                         events=cross)
        t_cross = traj.invariant_drift["event_times"][0]
        assert t_cross[0] == pytest.approx(np.pi / 2, abs=1e-12)


class TestMonitor:
    def test_energy_drift_kepler(self):
        params = kp.KeplerParams(0.5, 1.0, kp.CurvedSpace.sphere(1.0))
        st = kp.DelaunayState(0.4, 0.0, 0.25, 0.0)
        chart = kp.delaunay_to_reduced(st, params)
        _, n = kp.kepler_energy_and_mean_motion(st.L, params)
        traj = integrate(lambda t, y: kp.reduced_kepler_field(t, y, params),
                         chart, (0, 10 * 2 * np.pi / n), tol=1e-12)
        drift = monitor(traj, {
            "energy": lambda s: kp.reduced_kepler_hamiltonian(s[0], s[1], s[3], params),
            "p_theta": lambda s: s[3],
        })
        assert drift["energy"] < 1e-10
        assert drift["p_theta"] < 1e-12

    def test_constant_function(self):
        traj = integrate(harmonic, [1.0, 0.0], (0, 1.0))
        drift = monitor(traj, {"one": lambda s: 1.0})
        assert drift["one"] == 0.0


class TestTrajectoryType:
    def test_rejects_mismatched_lengths(self):
        with pytest.raises(DomainError):
            Trajectory(np.array([0.0, 1.0]), np.zeros((3, 2)))

    def test_rejects_non_increasing(self):
        with pytest.raises(DomainError):
            Trajectory(np.array([0.0, 0.0]), np.zeros((2, 2)))


class TestStormerVerlet:
    def test_harmonic_energy_bounded(self):
        ts, qs, ps = stormer_verlet(lambda p: p, lambda q: q,
                                    [1.0], [0.0], 0.01, 20000)
        E = 0.5 * (qs[:, 0] ** 2 + ps[:, 0] ** 2)
        assert np.max(np.abs(E - E[0])) < 1e-4
        # long-run phase coherence rather than secular energy growth
        assert abs(E[-1] - E[0]) < 1e-4

    def test_second_order(self):
        errs = []
        for h in (0.01, 0.005):
            ts, qs, ps = stormer_verlet(lambda p: p, lambda q: q,
                                        [1.0], [0.0], h, int(round(2 * np.pi / h)))
            errs.append(abs(qs[-1, 0] - np.cos(ts[-1])))
        assert errs[1] < errs[0] / 3.5
