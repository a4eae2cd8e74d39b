"""SVG figures for the CLI outputs.

Matplotlib runs on the Agg backend and SVGs are written without a date
stamp and with a fixed hash salt, so repeated runs give identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "activecloak",
    "svg.fonttype": "none",
}


def _figure(width=5.0, height=None):
    if height is None:
        height = width * (np.sqrt(5) - 1) / 2
    return plt.subplots(figsize=(width, height), constrained_layout=True)


def save_svg(fig, path):
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def field_heatmap(x, y, magnitude, path, antenna_radius=None):
    """Magnitude of the controlled field on a rectangular grid.

    ``magnitude`` has shape ``(len(y), len(x))``; excluded points are NaN
    and left blank.
    """
    with plt.rc_context(_RC):
        fig, ax = _figure(5.0, 4.2)
        mesh = ax.pcolormesh(x, y, np.ma.masked_invalid(magnitude), shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="|u|")
        if antenna_radius is not None:
            t = np.linspace(0, 2 * np.pi, 200)
            ax.plot(antenna_radius * np.cos(t), antenna_radius * np.sin(t), "w-", lw=0.8)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    save_svg(fig, path)


def density_plot(tau, phi, path):
    """Real part, imaginary part and modulus of the antenna density."""
    with plt.rc_context(_RC):
        fig, ax = _figure()
        ax.plot(tau, np.real(phi), label="Re phi")
        ax.plot(tau, np.imag(phi), label="Im phi")
        ax.plot(tau, np.abs(phi), "k--", label="|phi|")
        ax.set_xlabel("tau")
        ax.legend(frameon=False)
    save_svg(fig, path)


def spectra_plot(spectra, path):
    """Leading singular values, one curve per distance."""
    with plt.rc_context(_RC):
        fig, ax = _figure()
        for d, s in sorted(spectra.items()):
            ax.semilogy(np.arange(1, len(s) + 1), s, marker=".", ms=3, label=f"d = {d:g}")
        ax.set_xlabel("index")
        ax.set_ylabel("singular value")
        ax.legend(frameon=False)
    save_svg(fig, path)


def surface_plot(d, k, values, path, label):
    """Heatmap of a quantity over the (k, d) grid; ``values[i, j]`` at ``(d[i], k[j])``."""
    with plt.rc_context(_RC):
        fig, ax = _figure(5.0, 4.0)
        mesh = ax.pcolormesh(k, d, values, shading="nearest", cmap="magma")
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("k")
        ax.set_ylabel("d")
    save_svg(fig, path)


def sweep_map(grid1, grid2, values, axis1, axis2, label, path):
    """One sweep statistic over the two sweep axes; failed cells are NaN."""
    with plt.rc_context(_RC):
        fig, ax = _figure(5.0, 4.0)
        mesh = ax.pcolormesh(grid1, grid2, np.ma.masked_invalid(np.asarray(values).T),
                             shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label=label)
        for axis, name, grid in ((ax.xaxis, axis1, grid1), (ax.yaxis, axis2, grid2)):
            if len(grid) > 2 and min(grid) > 0 and max(grid) / min(grid) > 20:
                (ax.set_xscale if axis is ax.xaxis else ax.set_yscale)("log")
        ax.set_xlabel(axis1)
        ax.set_ylabel(axis2)
    save_svg(fig, path)


def pk_plot(k, neg_pk, alpha, path):
    """Monotonicity threshold exponent and Morozov parameter against k."""
    with plt.rc_context(_RC):
        fig, ax = _figure()
        ax.plot(k, neg_pk, "o-", ms=3, label="-p_k")
        ax.plot(k, np.log10(alpha), "s--", ms=3, label="log10 alpha")
        ax.set_xlabel("k")
        ax.set_ylabel("exponent")
        ax.legend(frameon=False)
    save_svg(fig, path)
