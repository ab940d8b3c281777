"""Finite-size pipelines: peak scans over m, per-size observables and exponent fits.

Every function here is deterministic and works sector by sector; the defaults
reproduce the desk-scale numbers quoted in the README.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chain import GROUND_SECTORS, PXPChain
from .criticality import (
    Peak, ScalingFit, effective_coupling, echo_change_point, fidelity_susceptibility, fit_scaling,
    ground_ep, refine_peak,
)
from .dynamics import QuenchSpec, biorthogonal_echo, first_echo_minimum, short_time_average_rate
from .hamiltonian import ModelParams
from .observables import half_chain_entropy
from .spectrum import eigenvalues_only, energy_gap


def pmap(func, items, jobs: int = 1):
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _real_scale(params: ModelParams) -> float:
    lam = effective_coupling(params)
    return float(abs(lam)) if abs(lam) > 0 else 1.0


# --------------------------------------------------------------------------
# entanglement

def ground_entropy(params: ModelParams, ks=GROUND_SECTORS, cut=None, self_normal: bool = False,
                   cache=None) -> float:
    chain = PXPChain(params, cache=cache)
    gs = chain.ground_state(ks)
    return half_chain_entropy(gs.right, gs.left, chain.basis, cut=cut, self_normal=self_normal)


def entropy_peak(params: ModelParams, grid=None, xtol: float = 1e-6) -> Peak:
    """Maximum of the ground-state half-chain entropy over m (default window scaled by lambda)."""
    if grid is None:
        grid = np.linspace(-1.0, -0.3, 15) * _real_scale(params)
    return refine_peak(lambda m: ground_entropy(params.replace(m=float(m))), grid, xtol)


@dataclass(frozen=True, eq=False)
class SizeSeries:
    """Per-size pseudocritical data plus the fits derived from it."""
    sizes: np.ndarray
    location: np.ndarray
    value: np.ndarray
    extra: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)


def entropy_peak_series(g: float, sizes, base: ModelParams | None = None, jobs: int = 1) -> SizeSeries:
    """Entropy peaks for each N, the shifted extrapolation of their locations and the log fit of heights."""
    base = (base or ModelParams(N=int(sizes[0]))).replace(g=g)
    peaks = pmap(_entropy_peak_task, [(base.replace(N=int(N)),) for N in sizes], jobs)
    sizes = np.asarray(sizes, dtype=float)
    loc = np.array([p.location for p in peaks])
    val = np.array([p.value for p in peaks])
    fits = {"location": fit_scaling(sizes, loc, "shifted"), "central_charge": fit_scaling(sizes, val, "log")}
    return SizeSeries(sizes=sizes, location=loc, value=val, fits=fits)


def _entropy_peak_task(args):
    return entropy_peak(*args)


# --------------------------------------------------------------------------
# quench dynamics

def rate(params: ModelParams, dm: float = 0.01, T: float = 20.0, dt: float = 0.05) -> float:
    q = QuenchSpec(params, dm=dm, t_max=T, dt=dt, T=T)
    return short_time_average_rate(q).rate


def rate_peak(params: ModelParams, dm: float = 0.01, T: float = 20.0, dt: float = 0.05, grid=None,
              xtol: float = 1e-7) -> Peak:
    if grid is None:
        grid = np.linspace(-1.0, -0.4, 25) * _real_scale(params)
    return refine_peak(lambda m: rate(params.replace(m=float(m)), dm, T, dt), grid, xtol)


def _echo_point(args):
    params, dm, T, dt, t_max, dt_echo = args
    pk = rate_peak(params, dm, T, dt)
    p = params.replace(m=pk.location)
    series = biorthogonal_echo(QuenchSpec(p, dm=dm, t_max=t_max, dt=dt_echo))
    t_min, l_min = first_echo_minimum(series)
    chain = PXPChain(p)
    e_all, _ = chain.eigenvalues()
    e_k0 = eigenvalues_only(chain.matrix(GROUND_SECTORS[0]))
    return pk, t_min, l_min, energy_gap(e_k0), energy_gap(e_all)


def echo_scaling_series(g: float, sizes, dm: float = 0.01, T: float = 20.0, dt: float = 0.05,
                        t_max: float = 30.0, dt_echo: float = 0.01, jobs: int = 1) -> SizeSeries:
    """Rate-function peaks m^(N), echo minima there, and the gap at m^(N).

    Fits: 1 - L_min ~ N^(2/nu) ("echo"), the quench-sector gap ~ N^(-z)
    ("gap") and the gap over all momentum sectors ("gap_all_sectors").
    """
    tasks = [(ModelParams(N=int(N), g=g), dm, T, dt, t_max, dt_echo) for N in sizes]
    rows = pmap(_echo_point, tasks, jobs)
    sizes = np.asarray(sizes, dtype=float)
    loc = np.array([r[0].location for r in rows])
    peak = np.array([r[0].value for r in rows])
    t_min = np.array([r[1] for r in rows])
    one_minus = 1.0 - np.array([r[2] for r in rows])
    gap = np.array([r[3] for r in rows])
    gap_all = np.array([r[4] for r in rows])
    fits = {"echo": fit_scaling(sizes, one_minus, "power"),
            "gap": fit_scaling(sizes, gap, "power"),
            "gap_all_sectors": fit_scaling(sizes, gap_all, "power")}
    return SizeSeries(sizes=sizes, location=loc, value=peak,
                      extra={"t_min": t_min, "one_minus_L_min": one_minus, "gap": gap,
                             "gap_all_sectors": gap_all}, fits=fits)


def nu_from_echo(fit: ScalingFit) -> float:
    return 2.0 / fit.exponent


def z_from_gap(fit: ScalingFit) -> float:
    return -fit.exponent


# --------------------------------------------------------------------------
# fidelity susceptibility

def _fidelity_task(args):
    params, kind, dm, grid = args
    return refine_peak(lambda m: fidelity_susceptibility(params.replace(m=float(m)), dm, kind), grid, 1e-5)


def fidelity_series(g: float, alpha: float, kind: str, sizes, dm: float = 1e-4, jobs: int = 1) -> SizeSeries:
    """chi_F maxima per size and the fit chi_max ~ N^(2/nu)."""
    base = ModelParams(N=int(sizes[0]), g=g, alpha=alpha)
    m_c = -0.655 * _real_scale(base)
    grid = np.linspace(m_c - 0.4, m_c + 0.3, 15)
    peaks = pmap(_fidelity_task, [(base.replace(N=int(N)), kind, dm, grid) for N in sizes], jobs)
    sizes = np.asarray(sizes, dtype=float)
    loc = np.array([p.location for p in peaks])
    val = np.array([p.value for p in peaks])
    return SizeSeries(sizes=sizes, location=loc, value=val, fits={"chi_max": fit_scaling(sizes, val, "power")})


# --------------------------------------------------------------------------
# Yang-Lee edge

def _yles_task(args):
    params, method, m_lo, m_hi, level = args
    if method == "echo":
        return echo_change_point(params, m_lo, m_hi, level=level)
    return ground_ep(params, m_lo, m_hi, tol=1e-10)


def yles_series(g: float, sizes, method: str = "echo", m_lo: float = 1.0, m_hi: float = 3.0,
                level: float = 1.0, jobs: int = 1) -> SizeSeries:
    """Pseudocritical detunings of the Yang-Lee edge and the fit m^(N) = m_inf + a N^(-beta).

    method='echo' uses the associated-echo change point; 'bisection' the
    reality of the k = 0 ground level.
    """
    if method not in ("echo", "bisection"):
        raise ValueError("method must be 'echo' or 'bisection'")
    tasks = [(ModelParams(N=int(N), g=g), method, m_lo, m_hi, level) for N in sizes]
    loc = np.array(pmap(_yles_task, tasks, jobs))
    sizes = np.asarray(sizes, dtype=float)
    return SizeSeries(sizes=sizes, location=loc, value=loc.copy(),
                      fits={"beta": fit_scaling(sizes, loc, "shifted")})


def yles_entropy_series(g: float, sizes, m: float, jobs: int = 1) -> SizeSeries:
    """Biorthogonal half-chain entropy at one detuning on the PT-symmetric side, fitted to (c_eff/3) ln N."""
    tasks = [(ModelParams(N=int(N), g=g, m=m),) for N in sizes]
    vals = np.array(pmap(_entropy_task, tasks, jobs))
    sizes = np.asarray(sizes, dtype=float)
    return SizeSeries(sizes=sizes, location=np.full(len(sizes), m), value=vals,
                      fits={"c_eff": fit_scaling(sizes, vals, "log")})


def _entropy_task(args):
    return ground_entropy(*args)
