"""Desk-scale figure-data recipes.

Each recipe writes CSV tables and a ``fits.json`` summary into an output
directory and returns the fit dictionary. Sizes are capped at N = 20.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .chain import PXPChain
from .criticality import (
    RL, RR, associated_echo_swing, default_sectors, fidelity_susceptibility, first_order_scan,
    kink_window, locate_transitions, named_transitions,
)
from .dynamics import QuenchSpec, associated_echo, biorthogonal_echo, self_normal_echo
from .hamiltonian import ModelParams
from .output import format_csv, format_json, provenance
from .pipelines import (
    echo_scaling_series, entropy_peak_series, fidelity_series, ground_entropy, nu_from_echo, pmap, rate,
    yles_entropy_series, yles_series, z_from_gap,
)

MAX_N = 20

DEFAULT_SIZES = {
    "fig2": (12, 14, 16, 18, 20),
    "fig3": (8, 10, 12, 14, 16, 18),
    "fig5": (12,),
    "fig6": (8, 10, 12, 14, 16, 18),
    "figC1": (8, 10, 12, 14, 16, 18),
    "figD1": (8, 10, 12, 14, 16, 18),
}


class UnsupportedFigureError(ValueError):
    pass


def _check_sizes(sizes):
    sizes = tuple(int(n) for n in sizes)
    if not sizes:
        raise ValueError("no system sizes given")
    if max(sizes) > MAX_N:
        raise ValueError(f"size cap exceeded: N = {max(sizes)} > {MAX_N}")
    return sizes


class _Writer:
    def __init__(self, out_dir, figure, config, timestamp=True):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.figure = figure
        self.config = config
        self.timestamp = timestamp
        self.files = []

    def csv(self, name, header, rows):
        meta = provenance(f"reproduce {self.figure}", {**self.config, "table": name}, self.timestamp)
        (self.dir / name).write_text(format_csv(header, rows, meta))
        self.files.append(name)

    def fits(self, payload):
        meta = provenance(f"reproduce {self.figure}", self.config, self.timestamp)
        (self.dir / "fits.json").write_text(format_json({"figure": self.figure, "fits": payload}, meta))
        self.files.append("fits.json")


# --------------------------------------------------------------------------

def _entropy_row(args):
    p, = args
    return ground_entropy(p)


def fig2(w: _Writer, sizes, jobs=1):
    """Entropy scans and peaks at g in {0, 0.1, 0.5}; critical line and central charge."""
    fits, peak_rows, scan_rows = {}, [], []
    for g in (0.0, 0.1, 0.5):
        lam = np.sqrt(1 - g * g)
        grid = np.linspace(-1.0, -0.3, 15) * lam
        for N in sizes:
            vals = pmap(_entropy_row, [(ModelParams(N=N, g=g, m=float(m)),) for m in grid], jobs)
            scan_rows += [(g, N, m, s) for m, s in zip(grid, vals)]
        s = entropy_peak_series(g, sizes, jobs=jobs)
        peak_rows += [(g, int(N), x, y) for N, x, y in zip(s.sizes, s.location, s.value)]
        loc, cc = s.fits["location"], s.fits["central_charge"]
        fits[f"g={g}"] = {
            "m_inf": loc.offset, "m_inf_over_lambda": loc.offset / lam, "expected": -0.655 * lam,
            "location_fit": loc.as_dict(), "central_charge": cc.exponent, "central_charge_fit": cc.as_dict(),
        }
    w.csv("entropy_scan.csv", ["g", "N", "m", "S"], scan_rows)
    w.csv("entropy_peaks.csv", ["g", "N", "m_peak", "S_peak"], peak_rows)
    w.fits(fits)
    return fits


def fig3(w: _Writer, sizes, jobs=1, g=0.1, dm=0.01, T=20.0):
    """Rate-function scans, echoes at the rate peaks; nu from the echo minimum and z from the gap."""
    lam = np.sqrt(1 - g * g)
    grid = np.linspace(-1.0, -0.4, 13) * lam
    rows = []
    for N in sizes:
        vals = pmap(_rate_row, [(ModelParams(N=N, g=g, m=float(m)), dm, T) for m in grid], jobs)
        rows += [(N, m, r) for m, r in zip(grid, vals)]
    w.csv("rate_scan.csv", ["N", "m", "rate"], rows)
    s = echo_scaling_series(g, sizes, dm=dm, T=T, jobs=jobs)
    echo_rows = []
    for N, m in zip(s.sizes, s.location):
        e = biorthogonal_echo(QuenchSpec(ModelParams(N=int(N), g=g, m=float(m)), dm=dm, t_max=30.0, dt=0.05))
        echo_rows += [(int(N), m, t, v.real, v.imag) for t, v in zip(e.t_grid, e.values)]
    w.csv("echoes.csv", ["N", "m_peak", "t", "re", "im"], echo_rows)
    w.csv("pseudocritical.csv", ["N", "m_peak", "rate_peak", "t_min", "one_minus_L_min", "gap", "gap_all_sectors"],
          [(int(N), *vals) for N, *vals in zip(s.sizes, s.location, s.value, s.extra["t_min"],
                                                 s.extra["one_minus_L_min"], s.extra["gap"],
                                                 s.extra["gap_all_sectors"])])
    fits = {
        "nu": nu_from_echo(s.fits["echo"]), "echo_fit": s.fits["echo"].as_dict(),
        "z": z_from_gap(s.fits["gap"]), "gap_fit": s.fits["gap"].as_dict(),
        "z_all_sectors": z_from_gap(s.fits["gap_all_sectors"]),
        "gap_all_sectors_fit": s.fits["gap_all_sectors"].as_dict(),
    }
    w.fits(fits)
    return fits


def _rate_row(args):
    return rate(*args)


def fig5(w: _Writer, sizes, jobs=1, g=1.5):
    """Low-lying levels in k = 0 and k = pi across m, phase transitions and the kink of Re E_0."""
    N = sizes[0]
    p = ModelParams(N=N, g=g)
    m_grid = np.round(np.arange(-3.0, 3.0 + 1e-9, 0.1), 10)
    ks = default_sectors(p)
    rows = []
    for m in m_grid:
        c = PXPChain(p.replace(m=float(m)))
        for k in ks:
            e, _ = c.eigenvalues([k])
            rows += [(m, k, i, z.real, z.imag) for i, z in enumerate(e[:6])]
    w.csv("spectrum_scan.csv", ["m", "k_index", "level", "re", "im"], rows)
    labels, trans = locate_transitions(p, m_grid)
    w.csv("labels.csv", ["m", "label"], [(m, lab) for m, lab in zip(m_grid, labels)])
    named = named_transitions(trans)
    fo = first_order_scan(p, m_grid, window=kink_window(named))
    w.csv("ground_energy.csv", ["m", "re_E0"], list(zip(fo.m, fo.energy)))
    fits = {"N": N, "g": g, "transitions": [{"m": m, "from": a, "to": b} for m, a, b in trans],
            **named, "kink_location": fo.jump_location, "kink_jump": fo.jump, "kink_noise": fo.noise,
            "kink_conclusive": fo.conclusive}
    w.fits(fits)
    return fits


def _swing_row(args):
    p, = args
    return associated_echo_swing(p)


def fig6(w: _Writer, sizes, jobs=1, g=1.5):
    """Associated and self-normal echo scans near the edge; beta from the shifted fit."""
    m_grid = np.linspace(1.8, 2.4, 13)
    rows = []
    for N in sizes:
        vals = pmap(_swing_row, [(ModelParams(N=N, g=g, m=float(m)),) for m in m_grid], jobs)
        rows += [(N, m, v) for m, v in zip(m_grid, vals)]
    w.csv("echo_swing_scan.csv", ["N", "m", "max_abs_ln_LA"], rows)
    traces = []
    N = sizes[-1]
    for m in (1.9, 2.3):
        q = QuenchSpec(ModelParams(N=N, g=g, m=m), dm=1e-4, t_max=150.0, dt=1.0)
        a, s = associated_echo(q), self_normal_echo(q)
        traces += [(N, m, t, la.real, la.imag, sv) for t, la, sv in zip(a.t_grid, a.log_values, s.values)]
    w.csv("echo_traces.csv", ["N", "m", "t", "ln_LA_re", "ln_LA_im", "self_normal"], traces)
    echo = yles_series(g, sizes, method="echo", jobs=jobs)
    bis = yles_series(g, sizes, method="bisection", jobs=jobs)
    w.csv("pseudocritical.csv", ["N", "m_echo", "m_ground_ep"],
          list(zip((int(n) for n in echo.sizes), echo.location, bis.location)))
    fe, fb = echo.fits["beta"], bis.fits["beta"]
    fits = {"beta": fe.exponent, "m_inf": fe.offset, "beta_fit": fe.as_dict(),
            "beta_ground_ep": fb.exponent, "m_inf_ground_ep": fb.offset, "ground_ep_fit": fb.as_dict()}
    w.fits(fits)
    return fits


def _chi_row(args):
    return fidelity_susceptibility(*args)


def figC1(w: _Writer, sizes, jobs=1, g=0.5):
    """chi_F^RR at alpha = 0 and chi_F^RL at alpha = pi/2; nu from the peak heights."""
    rows, peaks, fits = [], [], {}
    for kind, alpha in ((RR, 0.0), (RL, np.pi / 2)):
        m_grid = np.linspace(-1.0, -0.2, 17)
        for N in sizes:
            vals = pmap(_chi_row, [(ModelParams(N=N, g=g, alpha=alpha, m=float(m)), 1e-4, kind)
                                   for m in m_grid], jobs)
            rows += [(kind, N, m, v) for m, v in zip(m_grid, vals)]
        s = fidelity_series(g, alpha, kind, sizes, jobs=jobs)
        peaks += [(kind, int(N), x, y) for N, x, y in zip(s.sizes, s.location, s.value)]
        f = s.fits["chi_max"]
        fits[kind] = {"alpha": alpha, "nu": 2.0 / f.exponent, "fit": f.as_dict()}
    w.csv("fidelity_scan.csv", ["kind", "N", "m", "chi"], rows)
    w.csv("fidelity_peaks.csv", ["kind", "N", "m_peak", "chi_peak"], peaks)
    w.fits(fits)
    return fits


def figD1(w: _Writer, sizes, jobs=1, g=1.5, m=None):
    """Biorthogonal entropy against ln N at the extrapolated edge; c_eff from the log fit."""
    edge = None
    if m is None:
        edge = yles_series(g, sizes, method="bisection", jobs=jobs).fits["beta"]
        m = edge.offset
    s = yles_entropy_series(g, sizes, m, jobs=jobs)
    w.csv("entropy_vs_lnN.csv", ["N", "lnN", "S"],
          [(int(N), np.log(N), v) for N, v in zip(s.sizes, s.value)])
    f = s.fits["c_eff"]
    fits = {"m": m, "c_eff": f.exponent, "c_eff_fit": f.as_dict(),
            "edge_fit": edge.as_dict() if edge is not None else None}
    w.fits(fits)
    return fits


RECIPES = {"fig2": fig2, "fig3": fig3, "fig5": fig5, "fig6": fig6, "figC1": figC1, "figD1": figD1}


def reproduce(figure_id: str, out_dir, sizes=None, jobs: int = 1, timestamp: bool = True):
    """Run one recipe; returns (fits, written file names)."""
    if figure_id not in RECIPES:
        raise UnsupportedFigureError(f"unsupported figure {figure_id!r}; choose from {sorted(RECIPES)}")
    sizes = _check_sizes(DEFAULT_SIZES[figure_id] if sizes is None else sizes)
    w = _Writer(out_dir, figure_id, {"figure": figure_id, "sizes": list(sizes)}, timestamp)
    fits = RECIPES[figure_id](w, sizes, jobs=jobs)
    return fits, w.files
