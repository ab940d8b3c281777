"""Quench dynamics and Loschmidt echoes in the biorthogonal framework.

All quenches start from the ground pair of H(m_i) and evolve under the
post-quench Hamiltonian H(m_f) = H(m_i + dm) in the momentum sector of that
ground state, so every series is a spectral sum in one sector basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import GROUND_SECTORS, PXPChain
from .hamiltonian import ModelParams
from .spectrum import (
    BiorthogonalSpectrum, DefectivePairError, EP_TOL, REALITY_TOL, classify_spectrum_reality,
)

BIORTHOGONAL = "biorthogonal"
ASSOCIATED = "associated_biorthogonal"
SELF_NORMAL = "self_normal"


class ComplexSpectrumError(RuntimeError):
    """Operation only defined when the relevant spectrum is real."""


class EchoError(RuntimeError):
    pass


class NoMinimumError(EchoError):
    pass


def evolve(state, spec: BiorthogonalSpectrum, t, dagger: bool = False, weight_tol: float = 1e-8):
    """Spectral propagator sum_n e^{-i E_n t} |R_n><L_n|state> (H^dagger analogue when dagger).

    ``t`` may be a scalar or 1-d array; for arrays the result has one column per time.
    """
    state = np.asarray(state, dtype=np.complex128)
    if dagger:
        coeff = spec.right.conj().T @ state
        vecs, energies = spec.left, spec.eigenvalues.conj()
    else:
        coeff = spec.left.conj().T @ state
        vecs, energies = spec.right, spec.eigenvalues
    bad = (spec.condition < EP_TOL) & (np.abs(coeff) > weight_tol)
    if np.any(bad):
        raise DefectivePairError("state has weight on a defective pair")
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return vecs @ (coeff * np.exp(-1j * energies * t))
    return vecs @ (coeff[:, None] * np.exp(-1j * np.outer(energies, t)))


@dataclass(frozen=True)
class QuenchSpec:
    params: ModelParams  # carries g, N and the initial detuning m_i
    dm: float
    t_max: float = 150.0
    dt: float = 1.0
    T: float | None = None
    ks: tuple = GROUND_SECTORS

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T is not None and self.T > self.t_max + 1e-12:
            raise ValueError("averaging window T exceeds t_max")

    @property
    def m_i(self) -> float:
        return self.params.m

    @property
    def m_f(self) -> float:
        return self.params.m + self.dm

    @property
    def t_grid(self) -> np.ndarray:
        n = int(round(self.t_max / self.dt))
        return np.arange(n + 1) * self.dt


@dataclass(frozen=True, eq=False)
class EchoSeries:
    kind: str
    t_grid: np.ndarray
    values: np.ndarray
    log_values: np.ndarray = field(default=None)  # principal log, finite where values overflow
    normalization: str = "biorthonormal"
    imag_residue: float = 0.0

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True, eq=False)
class _QuenchSetup:
    r0: np.ndarray  # sector amplitudes of the initial ground pair
    l0: np.ndarray
    final: BiorthogonalSpectrum
    initial: BiorthogonalSpectrum
    k_index: int | None


def _setup(q: QuenchSpec, chains=None, require_real: bool = False, cache=None) -> _QuenchSetup:
    ci = chains[0] if chains else PXPChain(q.params, cache=cache)
    cf = chains[1] if chains else PXPChain(q.params.replace(m=q.m_f), cache=cache)
    ks = ci.sector_keys(q.ks)
    if require_real:
        for c, label in ((ci, "m_i"), (cf, "m_f")):
            rep = classify_spectrum_reality(np.concatenate([c.spectrum(k).eigenvalues for k in ks]))
            if not rep.all_real:
                raise ComplexSpectrumError(
                    f"H({label}) has complex eigenvalues (max |Im E| = {rep.max_imag:.3g}); "
                    "the biorthogonal echo is only defined in the real-spectrum regime")
    gs = ci.ground_state(ks)
    k = gs.k_index
    spec_i = ci.spectrum(k)
    return _QuenchSetup(r0=spec_i.right[:, gs.index], l0=spec_i.left[:, gs.index],
                        final=cf.spectrum(k), initial=spec_i, k_index=k)


def _log_spectral_sum(weights, energies, t, sign=-1):
    """log sum_n w_n exp(sign * i E_n t) for every t, overflow-safe."""
    w = np.asarray(weights, dtype=np.complex128)
    keep = np.abs(w) > 0
    a = np.log(w[keep])[:, None] + sign * 1j * np.outer(energies[keep], t)
    amax = a.real.max(axis=0)
    return amax + np.log(np.exp(a - amax).sum(axis=0))


def biorthogonal_echo(q: QuenchSpec, chains=None, cache=None) -> EchoSeries:
    """<L0|R0(t)> <L0(t)|R0> for a ground pair of H(m_i) evolved under H(m_f)."""
    s = _setup(q, chains, require_real=True, cache=cache)
    f = s.final
    c_r = f.left.conj().T @ s.r0    # R0 = sum c_r R_n
    c_l = f.right.conj().T @ s.l0   # L0 = sum c_l L_n
    b = s.l0.conj() @ f.right       # <L0|R_n>
    t = q.t_grid
    first = _log_spectral_sum(b * c_r, f.eigenvalues, t, sign=-1)
    second = _log_spectral_sum(c_l.conj() * c_r, f.eigenvalues, t, sign=+1)
    logv = first + second
    vals = np.exp(logv)
    return EchoSeries(BIORTHOGONAL, t, vals, log_values=logv,
                      imag_residue=float(np.abs(vals.imag).max()))


def associated_left_state(state_r, spec: BiorthogonalSpectrum, weight_tol: float = 1e-8) -> np.ndarray:
    """sum_n c_n |L_n> with c_n = <L_n|state_r> (the expansion coefficients of state_r)."""
    c = spec.left.conj().T @ np.asarray(state_r, dtype=np.complex128)
    if np.any((spec.condition < EP_TOL) & (np.abs(c) > weight_tol)):
        raise DefectivePairError("state has weight on a defective pair")
    return spec.left @ c


def associated_echo(q: QuenchSpec, chains=None, association: str = "final", cache=None) -> EchoSeries:
    """Echo with the bra replaced by the associated left state of R0.

    association='final' expands R0 in the H(m_f) eigenbasis (default);
    'initial' uses the H(m_i) basis, where the associated state is L0 itself.
    The bra is rescaled so that the t = 0 value is 1.
    """
    s = _setup(q, chains, cache=cache)
    f = s.final
    basis = f if association == "final" else s.initial
    if association not in ("final", "initial"):
        raise ValueError("association must be 'final' or 'initial'")
    lt = associated_left_state(s.r0, basis)
    lt = lt / np.conj(np.vdot(lt, s.r0))
    c_r = f.left.conj().T @ s.r0
    c_l = f.right.conj().T @ lt
    b = lt.conj() @ f.right
    t = q.t_grid
    logv = (_log_spectral_sum(b * c_r, f.eigenvalues, t, sign=-1)
            + _log_spectral_sum(c_l.conj() * c_r, f.eigenvalues, t, sign=+1))
    with np.errstate(over="ignore"):
        vals = np.exp(logv)
    finite = np.isfinite(vals)
    return EchoSeries(ASSOCIATED, t, vals, log_values=logv,
                      imag_residue=float(np.abs(vals[finite].imag).max(initial=0.0)))


def self_normal_echo(q: QuenchSpec, normalize: bool = True, chains=None, cache=None) -> EchoSeries:
    """|<R0|R0(t)>|^2 with unit-norm R0; per-time renormalized by ||R0(t)||^2 by default."""
    s = _setup(q, chains, cache=cache)
    f = s.final
    r0 = s.r0 / np.linalg.norm(s.r0)
    c = f.left.conj().T @ r0
    t = q.t_grid
    growth = np.outer(f.eigenvalues.imag, t)  # log|e^{-iEt}|
    shift = np.where(np.abs(c)[:, None] > 0, growth, -np.inf).max(axis=0)
    amps = c[:, None] * np.exp(-1j * np.outer(f.eigenvalues.real, t) + growth - shift)
    vecs = f.right @ amps  # R0(t) * e^{-shift}
    overlap = r0.conj() @ vecs
    norm2 = np.einsum("ij,ij->j", vecs.conj(), vecs).real
    if normalize:
        vals = np.abs(overlap) ** 2 / norm2
        return EchoSeries(SELF_NORMAL, t, vals, log_values=np.log(vals + 0j), normalization="self")
    logv = np.log(np.abs(overlap) ** 2 + 0j) + 2 * shift
    lognorm = np.log(norm2) / 2 + shift
    if np.any(lognorm < np.log(1e-300)):
        raise EchoError("evolved state norm underflowed below 1e-300 in raw mode")
    with np.errstate(over="ignore"):
        vals = np.exp(logv.real)
    return EchoSeries(SELF_NORMAL, t, vals, log_values=logv, normalization="raw")


@dataclass(frozen=True)
class RateResult:
    rate: float
    mean_echo: complex
    imag_residue: float


def short_time_average_rate(q: QuenchSpec, series: EchoSeries | None = None, chains=None,
                            cache=None) -> RateResult:
    """r = -ln(Re <L>_T) / (N dm^2) with <L>_T the trapezoidal average over [0, T]."""
    if q.dm == 0:
        raise ValueError("rate function needs a nonzero quench dm")
    if series is None:
        series = biorthogonal_echo(q, chains=chains, cache=cache)
    T = q.t_max if q.T is None else q.T
    t = series.t_grid
    sel = t <= T + 1e-12
    if sel.sum() < 2:
        raise ValueError("averaging window contains fewer than two samples")
    tt, vv = t[sel], series.values[sel]
    mean = np.trapezoid(vv, tt) / (tt[-1] - tt[0])
    if not mean.real > 0:
        raise EchoError(f"time-averaged echo {mean:.3g} is not positive; log undefined")
    rate = -np.log(mean.real) / (q.params.N * q.dm**2)
    return RateResult(rate=float(rate), mean_echo=complex(mean), imag_residue=float(abs(mean.imag)))


def first_echo_minimum(series: EchoSeries | np.ndarray, t_grid=None, tol: float = 1e-13):
    """(t_min, L_min) of the first local minimum of |L|, refined quadratically."""
    if isinstance(series, EchoSeries):
        y, t = series.magnitude, series.t_grid
    else:
        y, t = np.abs(np.asarray(series)), np.asarray(t_grid)
    if len(y) < 3:
        raise NoMinimumError("series too short")
    # first strict interior local minimum, ignoring flat noise
    for i in range(1, len(y) - 1):
        if y[i] <= y[i - 1] and y[i + 1] > y[i] + tol and y[0] - y[i] > tol:
            y0, y1, y2 = y[i - 1], y[i], y[i + 1]
            curv = y0 - 2 * y1 + y2
            dt = t[i + 1] - t[i]
            if curv <= 0:
                return float(t[i]), float(y1)
            shift = 0.5 * (y0 - y2) / curv
            return float(t[i] + shift * dt), float(y1 - 0.125 * (y0 - y2) ** 2 / curv)
    raise NoMinimumError("no interior minimum in the sampled window; enlarge t_max")
