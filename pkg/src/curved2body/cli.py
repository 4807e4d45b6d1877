"""Operator surface: experiment orchestration, CSV/JSON tables and figures.

Exit codes: 0 success, 2 config error, 3 numerical failure,
4 near-collision abort (partial output retained), 5 infeasible request.
"""
import argparse
import math
import sys

import numpy as np

from . import kepler as kp
from . import orbits as ob
from . import plots
from . import reduction as rd
from . import secular as sc
from .config import RunConfig
from .errors import (ChartError, ConfigError, DomainError, InfeasibleError,
                     NearCollisionError, NonConvergenceError)
from .integrators import Trajectory, integrate, monitor
from .output import write_report, write_table


def _kepler_setup(cfg):
    sec = cfg.section("kepler")
    masses = cfg.masses
    m = float(sec.get("m", masses.m))
    M = float(sec.get("M", 1.0))
    params = kp.KeplerParams(m, M, cfg.space)
    if "alpha" in sec:
        conic = kp.conic_from_alpha_epsilon(float(sec["alpha"]),
                                            float(sec.get("epsilon", 0.0)), params)
    elif "L" in sec:
        conic = kp.conic_from_actions(float(sec["L"]), float(sec.get("G", sec["L"])),
                                      params)
    else:
        raise ConfigError("the [kepler] section needs alpha/epsilon or L/G")
    return params, conic, float(sec.get("g", 0.0)), int(sec.get("n_samples", 256))


def cmd_kepler(cfg, args):
    params, conic, g, n_samples = _kepler_setup(cfg)
    L = kp.delaunay_L_from_alpha(conic.alpha, params)
    _, n_motion = kp.kepler_energy_and_mean_motion(L, params)
    ell = np.linspace(0.0, 2 * np.pi, n_samples, endpoint=False)
    t = ell / n_motion
    space = cfg.space
    if conic.circular:
        nu = u_o = w = u = ell
        r = np.full_like(ell, conic.p_sq)
        phi = space.at(r / space.rho) if space.sign != 0 else r
    elif space.sign > 0:
        w = kp.solve_curved_kepler(ell, conic)
        phi, nu = kp._w_angles(w, conic)
        u = kp.anomaly_convert(w, "elliptic_w", "geometric_u", conic, params)
        u_o = kp.anomaly_convert(nu, "true", "flat_eccentric", conic, params) \
            if np.isfinite(conic.a) else np.full_like(ell, np.nan)
        r = space.rho * space.t(phi)
    else:
        nu = kp.anomaly_convert(ell, "mean", "true", conic, params)
        u_o = kp.anomaly_convert(nu, "true", "flat_eccentric", conic, params)
        w = np.full_like(ell, np.nan)
        u = np.full_like(ell, np.nan)
        r = conic.p_sq / (1.0 + conic.e * np.cos(nu))
        phi = space.at(r / space.rho) if space.sign != 0 else r
    theta = nu + g
    path = write_table(cfg.out_dir / "kepler_orbit",
                       {"t": t, "ell_rad": ell, "nu_rad": nu, "u_o_rad": u_o,
                        "w": w, "u_rad": u, "phi_rad": phi, "theta_rad": theta,
                        "r_length": r},
                       fmt=cfg.fmt, digest=cfg.digest, timestamp=cfg.timestamp)
    write_report(cfg.out_dir / "kepler_report",
                 {"L": L, "mean_motion": n_motion,
                  "conic": {"alpha": conic.alpha, "beta": conic.beta,
                            "epsilon": conic.epsilon, "a": conic.a,
                            "e": conic.e, "p_sq": conic.p_sq, "k": conic.k,
                            "crosses_equator": bool(conic.crosses_equator)}},
                 digest=cfg.digest)
    if cfg.svg:
        fig = plots.conic_figure(phi, theta, r, nu)
        plots.save_figure(fig, cfg.out_dir / "kepler_orbit", cfg.digest)
    print(f"kepler: wrote {path}")
    return 0


def _scaled_state(cfg):
    st = cfg.section("state")
    for key in ("L_hat", "G_hat", "C_hat", "eps"):
        if key not in st:
            raise ConfigError(f"missing [state] value {key!r}")
    return rd.ScaledDelaunay(float(st["L_hat"]), float(st.get("ell", 0.0)),
                             float(st["G_hat"]), float(st.get("g", 0.0)),
                             float(st["C_hat"]), float(st["eps"]))


def _simulate(cfg):
    scaled = _scaled_state(cfg)
    masses = cfg.masses
    space = cfg.space
    params = masses.kepler_params(space)
    run = cfg.section("run")
    t_span = run.get("t_span")
    if t_span is None or len(t_span) != 2 or not t_span[1] > t_span[0]:
        raise ConfigError("the [run] section needs t_span = [t0, t1], t1 > t0")
    n_samples = int(run.get("n_samples", 2000))
    rho = space.rho
    C = math.sqrt(rho * scaled.eps) * scaled.C_hat
    st = rd.unscale(scaled, rho)
    chart = list(kp.delaunay_to_reduced(st, params)) + [0.0]
    traj = integrate(
        lambda t, y: rd.reduced_vector_field_with_phase(y, masses, space, C),
        chart, tuple(t_span), tol=cfg.tol, sampling=n_samples)
    return scaled, masses, space, params, C, traj


def _osculating_series(traj, params, rho, eps):
    root = math.sqrt(rho * eps)
    G_hat, g = [], []
    for s in traj.states:
        osc = kp.reduced_to_delaunay(s[0], s[1], s[2], s[3], params)
        G_hat.append(osc.G / root)
        g.append(osc.g)
    return np.array(G_hat), np.unwrap(np.array(g))


def cmd_simulate(cfg, args):
    try:
        scaled, masses, space, params, C, traj = _simulate(cfg)
    except NearCollisionError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None:
            _write_trajectory(cfg, partial, cfg.masses, cfg.space, suffix="_partial")
        print(f"simulate: near-collision abort at t = {exc.last_time}",
              file=sys.stderr)
        raise
    drift = monitor(traj, {
        "energy": lambda s: rd.reduced_hamiltonian(
            rd.ReducedState(*s[:4]), masses, space, C)})
    _write_trajectory(cfg, traj, masses, space)
    G_hat, g = _osculating_series(traj, params, space.rho, scaled.eps)
    rate = float(np.polyfit(traj.times, g, 1)[0])
    G0 = math.sqrt(space.rho * scaled.eps) * scaled.G_hat
    target = sc.precession_rate(G0, space)
    write_report(cfg.out_dir / "simulate_report",
                 {"energy_drift": drift["energy"],
                  "mean_precession_rate": rate,
                  "precession_law_rate": target,
                  "precession_relative_error": abs(rate / target - 1.0)
                  if target else None},
                 digest=cfg.digest)
    if cfg.svg:
        plots.save_figure(plots.evolution_figure(traj.times, G_hat, g),
                          cfg.out_dir / "simulate_elements", cfg.digest)
        lifted = ob.lift_orbit(traj, C, masses, space)
        plots.save_figure(plots.sphere_figure(lifted, space.sign),
                          cfg.out_dir / "simulate_lift", cfg.digest)
    print(f"simulate: energy drift {drift['energy']:.3e}, "
          f"mean dg/dt {rate:+.6f} (law {target:+.6f})")
    return 0


def _write_trajectory(cfg, traj, masses, space, suffix=""):
    C = _guess_C(cfg, space)
    energy = []
    for s in traj.states:
        try:
            energy.append(rd.reduced_hamiltonian(
                rd.ReducedState(*s[:4]), masses, space, C))
        except Exception:
            energy.append(np.nan)
    write_table(cfg.out_dir / f"simulate_trajectory{suffix}",
                {"t": traj.times, "phi_rad": traj.states[:, 0],
                 "p_phi": traj.states[:, 1], "theta_rad": traj.states[:, 2],
                 "p_theta": traj.states[:, 3], "energy": np.array(energy),
                 "G": traj.states[:, 3]},
                fmt=cfg.fmt, digest=cfg.digest, timestamp=cfg.timestamp)


def _guess_C(cfg, space):
    scaled = _scaled_state(cfg)
    return math.sqrt(space.rho * scaled.eps) * scaled.C_hat


def cmd_secular(cfg, args):
    scaled = _scaled_state(cfg)
    masses = cfg.masses
    space = cfg.space
    sec = cfg.section("secular")
    eps_list = [float(e) for e in sec.get("eps_list", [0.04, 0.02, 0.01])]
    n_nodes = int(sec.get("n_nodes", 1024))
    rep = sc.average_consistency(scaled.L_hat, scaled.G_hat, scaled.g,
                                 scaled.C_hat, masses, eps_list,
                                 n_nodes=n_nodes, sign=space.sign)
    c2, c3, c4 = sc.per_series_terms(scaled.L_hat, scaled.G_hat, scaled.g,
                                     scaled.C_hat, masses)
    write_table(cfg.out_dir / "secular_residuals",
                {"eps": rep.eps, "residual": rep.residuals},
                fmt=cfg.fmt, digest=cfg.digest, timestamp=cfg.timestamp)
    portrait = sc.secular_phase_portrait(scaled.L_hat, scaled.C_hat, masses,
                                         scaled.eps,
                                         n_G=int(sec.get("grid_G", 24)),
                                         n_g=int(sec.get("grid_g", 32)),
                                         sign=space.sign)
    GG, gg = np.meshgrid(portrait["G_grid"], portrait["g_grid"], indexing="ij")
    write_table(cfg.out_dir / "secular_portrait",
                {"G_hat": GG.ravel(), "g_rad": gg.ravel(),
                 "dG_dl": portrait["field"][:, :, 0].ravel(),
                 "dg_dl": portrait["field"][:, :, 1].ravel()},
                fmt=cfg.fmt, digest=cfg.digest, timestamp=cfg.timestamp)
    fps = portrait["fixed_points"]
    write_table(cfg.out_dir / "secular_fixed_points",
                {"G_hat": [f.G_hat for f in fps],
                 "g_rad": [f.g for f in fps],
                 "eig1_re": [f.eigenvalues[0].real for f in fps],
                 "eig1_im": [f.eigenvalues[0].imag for f in fps],
                 "eig2_re": [f.eigenvalues[1].real for f in fps],
                 "eig2_im": [f.eigenvalues[1].imag for f in fps],
                 "kind": [f.kind for f in fps]},
                fmt=cfg.fmt, digest=cfg.digest, timestamp=cfg.timestamp)
    write_report(cfg.out_dir / "secular_report",
                 {"slope": rep.slope, "eps": list(rep.eps),
                  "residuals": list(rep.residuals),
                  "series_coefficients": {"eps2": c2, "eps3": c3, "eps4": c4},
                  "n_fixed_points": len(fps),
                  "saddles": [{"G_hat": f.G_hat, "g": f.g} for f in fps
                              if f.kind == "saddle"]},
                 digest=cfg.digest)
    if cfg.svg:
        plots.save_figure(
            plots.portrait_figure(portrait["G_grid"], portrait["g_grid"],
                                  portrait["field"], fps),
            cfg.out_dir / "secular_portrait", cfg.digest)
        plots.save_figure(
            plots.residual_figure(rep.eps, rep.residuals, rep.slope),
            cfg.out_dir / "secular_residuals", cfg.digest)
    print(f"secular: residual slope {rep.slope:.2f}, "
          f"{len(fps)} fixed points")
    return 0


def cmd_average(cfg, args):
    scaled = _scaled_state(cfg)
    masses = cfg.masses
    space = cfg.space
    sec = cfg.section("secular")
    eps_list = [float(e) for e in sec.get("eps_list", [scaled.eps])]
    n_nodes = int(sec.get("n_nodes", 1024))
    rows = {"eps": [], "numeric": [], "series": [], "residual": []}
    for eps in eps_list:
        st = sc.SecularState(scaled.L_hat, scaled.G_hat, scaled.g,
                             scaled.C_hat, eps, masses, space.sign)
        num = sc.average_per_numeric(st, n_nodes=n_nodes)
        ser = sc.per_series(scaled.L_hat, scaled.G_hat, scaled.g,
                            scaled.C_hat, masses, eps, space.sign)
        rows["eps"].append(eps)
        rows["numeric"].append(num)
        rows["series"].append(ser)
        rows["residual"].append(abs(num - ser))
    path = write_table(cfg.out_dir / "average_table", rows, fmt=cfg.fmt,
                       digest=cfg.digest, timestamp=cfg.timestamp)
    print(f"average: wrote {path}")
    return 0


def cmd_periodic(cfg, args):
    per = cfg.section("periodic")
    if "m" not in per or "n" not in per:
        raise ConfigError("the [periodic] section needs integers m and n")
    m_revs, n_prec = int(per["m"]), int(per["n"])
    if m_revs <= 0 or n_prec <= 0:
        raise ConfigError("m and n must be positive integers")
    st = cfg.section("state")
    L_hat = float(st.get("L_hat", 4.0))
    C_hat = float(st.get("C_hat", 4.5))
    masses = cfg.masses
    space = cfg.space
    orbit = ob.find_periodic(m_revs, n_prec, L_hat, C_hat, masses, space)
    write_report(cfg.out_dir / "periodic_report",
                 {"m": m_revs, "n": n_prec, "eps": orbit.eps,
                  "G_hat": orbit.G_hat, "g": orbit.g,
                  "residual": orbit.residual,
                  "residual_history": list(orbit.residual_history),
                  "newton_iterations": orbit.newton_iterations,
                  "jacobian_condition": orbit.jacobian_condition,
                  "closure_error": orbit.closure_error,
                  "winding": orbit.winding},
                 digest=cfg.digest)
    # demonstrative lift of the continued orbit over a few fast periods
    scaled = rd.ScaledDelaunay(L_hat, 0.0, orbit.G_hat, orbit.g, C_hat,
                               orbit.eps)
    params = masses.kepler_params(space)
    C = math.sqrt(space.rho * orbit.eps) * C_hat
    chart = list(kp.delaunay_to_reduced(rd.unscale(scaled, space.rho),
                                        params)) + [0.0]
    _, n_motion = kp.kepler_energy_and_mean_motion(
        math.sqrt(space.rho * orbit.eps) * L_hat, params)
    traj = integrate(
        lambda t, y: rd.reduced_vector_field_with_phase(y, masses, space, C),
        chart, (0.0, 3 * 2 * np.pi / n_motion), tol=cfg.tol, sampling=1200)
    lifted = ob.lift_orbit(traj, C, masses, space)
    write_table(cfg.out_dir / "periodic_lift",
                {"t": lifted.times,
                 "x1": lifted.body1[:, 0], "y1": lifted.body1[:, 1],
                 "z1": lifted.body1[:, 2],
                 "x2": lifted.body2[:, 0], "y2": lifted.body2[:, 1],
                 "z2": lifted.body2[:, 2],
                 "omega_rad": lifted.omega, "lambda_rad": lifted.lam},
                fmt=cfg.fmt, digest=cfg.digest, timestamp=cfg.timestamp)
    if cfg.svg:
        plots.save_figure(plots.sphere_figure(lifted, space.sign),
                          cfg.out_dir / "periodic_lift", cfg.digest)
    print(f"periodic: root G_hat = {orbit.G_hat:.6f}, g = {orbit.g:+.6f}, "
          f"residual {orbit.residual:.2e} in {orbit.newton_iterations} iterations")
    return 0


def cmd_lift(cfg, args):
    scaled, masses, space, params, C, traj = _simulate(cfg)
    lifted = ob.lift_orbit(traj, C, masses, space)
    write_table(cfg.out_dir / "lift_orbit",
                {"t": lifted.times,
                 "x1": lifted.body1[:, 0], "y1": lifted.body1[:, 1],
                 "z1": lifted.body1[:, 2],
                 "x2": lifted.body2[:, 0], "y2": lifted.body2[:, 1],
                 "z2": lifted.body2[:, 2],
                 "omega_rad": lifted.omega, "lambda_rad": lifted.lam},
                fmt=cfg.fmt, digest=cfg.digest, timestamp=cfg.timestamp)
    payload = {"phi_error": lifted.phi_error,
               "surface_error": lifted.surface_error}
    if space.sign > 0:
        M = ob.lift_angular_momentum(lifted, masses)
        payload["momentum_error"] = float(np.abs(M - [0, 0, C]).max())
    write_report(cfg.out_dir / "lift_report", payload, digest=cfg.digest)
    if cfg.svg:
        plots.save_figure(plots.sphere_figure(lifted, space.sign),
                          cfg.out_dir / "lift_orbit", cfg.digest)
    print(f"lift: phi error {lifted.phi_error:.2e}")
    return 0


COMMANDS = {
    "kepler": cmd_kepler,
    "simulate": cmd_simulate,
    "secular": cmd_secular,
    "periodic": cmd_periodic,
    "average": cmd_average,
    "lift": cmd_lift,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--tol", type=float, help="integration tolerance")
    common.add_argument("--format", choices=("csv", "json"),
                        help="table format")
    common.add_argument("--svg", action="store_true",
                        help="also render figures")
    common.add_argument("--no-timestamp", action="store_true",
                        help="suppress the timestamp header line")
    parser = argparse.ArgumentParser(
        prog="curved2body",
        description="Curved two-body problem: Kepler charts, reduced "
                    "dynamics, secular averaging and periodic orbits.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "kepler":
            p.add_argument("--flat-limit", action="store_true",
                           help="run at rho = 1e6 (flat limit)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_path(args.config).apply_overrides(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ChartError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NearCollisionError as exc:
        print(f"near-collision abort: {exc}", file=sys.stderr)
        return 4
    except InfeasibleError as exc:
        print(f"infeasible request: {exc}", file=sys.stderr)
        return 5
    except NonConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
