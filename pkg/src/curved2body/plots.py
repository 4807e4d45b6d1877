"""Figure rendering for the report paths; every figure embeds the config digest."""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save_figure(fig, path, digest):
    path = Path(path).with_suffix(".svg")
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.text(0.995, 0.005, f"config {digest}", ha="right", va="bottom",
             fontsize=5, color="0.55")
    fig.savefig(path, metadata={"Description": f"config-digest: {digest}"})
    plt.close(fig)
    return path


def conic_figure(phi, theta, r, nu, title="curved Kepler orbit"):
    """Orbit on the surface (orthographic) beside its central projection."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4.2))
    x = np.sin(phi) * np.cos(theta)
    y = np.sin(phi) * np.sin(theta)
    z = np.cos(phi)
    front = z >= 0
    ax1.plot(x[front], y[front], ".", ms=2, color="C0")
    ax1.plot(x[~front], y[~front], ".", ms=2, color="C0", alpha=0.25)
    circle = np.linspace(0, 2 * np.pi, 200)
    ax1.plot(np.cos(circle), np.sin(circle), "-", lw=0.6, color="0.6")
    ax1.plot([0], [0], "k+", ms=8)
    ax1.set_aspect("equal")
    ax1.set_title("surface orbit (orthographic)")
    ax2.plot(r * np.cos(nu), r * np.sin(nu), "-", lw=1.0, color="C1")
    ax2.plot([0], [0], "k+", ms=8)
    ax2.set_aspect("equal")
    ax2.set_title("central projection")
    fig.suptitle(title)
    return fig


def evolution_figure(t, G_hat, g, title="osculating elements"):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax1.plot(t, G_hat, lw=0.8)
    ax1.set_ylabel("G_hat")
    ax2.plot(t, g, lw=0.8)
    ax2.set_ylabel("g (rad, unwrapped)")
    ax2.set_xlabel("t")
    fig.suptitle(title)
    return fig


def portrait_figure(G_grid, g_grid, field, fixed_points,
                    title="secular phase portrait"):
    fig, ax = plt.subplots(figsize=(7, 5))
    gg, GG = np.meshgrid(g_grid, G_grid)
    U = field[:, :, 1]
    V = field[:, :, 0]
    scale = np.hypot(U, V)
    scale[scale == 0] = 1.0
    ax.quiver(gg, GG, U / scale, V / scale, scale, cmap="viridis",
              width=2.2e-3, pivot="mid")
    markers = {"saddle": ("x", "C3"), "center": ("o", "C2")}
    for f in fixed_points:
        m, c = markers.get(f.kind, ("s", "0.4"))
        ax.plot([f.g], [f.G_hat], m, color=c, ms=9, mew=2)
    ax.set_xlabel("g (rad)")
    ax.set_ylabel("G_hat")
    ax.set_title(title)
    return fig


def sphere_figure(lifted, sign=+1, title="lifted two-body orbit"):
    """Orthographic view of both bodies; far-side samples dimmed."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    for body, color in ((lifted.body1, "C0"), (lifted.body2, "C3")):
        x, y, z = body.T
        if sign > 0:
            front = y <= 0
            ax.plot(x[front], z[front], ".", ms=2, color=color)
            ax.plot(x[~front], z[~front], ".", ms=2, color=color, alpha=0.2)
        else:
            ax.plot(x, z, ".", ms=2, color=color)
    if sign > 0:
        circle = np.linspace(0, 2 * np.pi, 200)
        ax.plot(np.cos(circle), np.sin(circle), "-", lw=0.6, color="0.6")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(title)
    return fig


def residual_figure(eps, residuals, slope, title="averaging residual"):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.loglog(eps, residuals, "o-")
    ax.set_xlabel("eps")
    ax.set_ylabel("|numeric - series|")
    ax.set_title(f"{title} (slope {slope:.2f})")
    return fig
