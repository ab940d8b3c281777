"""Fidelity susceptibilities, pseudocritical points, scaling fits and phase labels."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .basis import PERIODIC
from .chain import GROUND_SECTORS, PXPChain
from .dynamics import ComplexSpectrumError, QuenchSpec, associated_echo
from .hamiltonian import DETUNED_PXP, ModelParams
from .spectrum import (
    REALITY_TOL, RealityReport, classify_spectrum_reality, energy_gap, select_ground_state,
)

RR = "RR"
RL = "RL"

CRITICAL_RATIO = -0.655  # m_c / lambda of the detuned PXP chain at g = 0
EP_ABS_TOL = 1e-8

PT_DECONFINED = "PT_deconfined"
PT_CONFINED = "PT_confined"
BR_F1 = "BR_f1"
BR_F2 = "BR_f2"
BR_1 = "BR_1"
LABELS = (PT_DECONFINED, PT_CONFINED, BR_F1, BR_F2, BR_1)

POWER = "power"
SHIFTED = "shifted"
LOG = "log"
FAMILIES = (POWER, SHIFTED, LOG)
_FAMILY_ALIASES = {"power_law": POWER, "shifted_power": SHIFTED, "log_law": LOG}


class FidelityError(RuntimeError):
    pass


class ScanBoundaryError(ValueError):
    """The maximum of a scan sits on its edge; widen the range."""


class FitError(RuntimeError):
    pass


class BisectionError(ValueError):
    pass


# --------------------------------------------------------------------------
# fidelity susceptibility

@dataclass(frozen=True)
class FidelityResult:
    chi: float
    fidelity: complex
    imag_residue: float
    kind: str


def _ground_vectors(chain: PXPChain, ks):
    gs = chain.ground_state(ks)
    spec = chain.spectrum(gs.k_index)
    return gs.k_index, spec.right[:, gs.index], spec.left[:, gs.index]


def fidelity_details(params: ModelParams, dm: float = 1e-4, kind: str = RR, ks=GROUND_SECTORS,
                     cache=None, chains=None) -> FidelityResult:
    """F and chi = -2 ln F / dm^2 between the ground states at m and m + dm.

    RR uses unit-norm right vectors, F = |<R(m)|R(m+dm)>|. RL uses the
    biorthogonal overlap sqrt(<L(m+dm)|R(m)> <L(m)|R(m+dm)>) on the principal
    branch and needs a real spectrum in the sectors ``ks``.
    """
    kind = kind.upper()
    if kind not in (RR, RL):
        raise ValueError(f"unknown fidelity kind {kind!r}")
    if dm == 0:
        raise ValueError("fidelity susceptibility needs dm != 0")
    c1, c2 = chains if chains else (PXPChain(params, cache=cache),
                                    PXPChain(params.replace(m=params.m + dm), cache=cache))
    if kind == RL:
        for c in (c1, c2):
            e = np.concatenate([c.spectrum(k).eigenvalues for k in c.sector_keys(ks)])
            rep = classify_spectrum_reality(e)
            if not rep.all_real:
                raise ComplexSpectrumError(
                    f"RL fidelity needs a real spectrum (max |Im E| = {rep.max_imag:.3g} at m = {c.params.m})")
    k1, r1, l1 = _ground_vectors(c1, ks)
    k2, r2, l2 = _ground_vectors(c2, ks)
    if k1 != k2:
        raise FidelityError(f"ground states at m and m + dm lie in different sectors ({k1} vs {k2})")
    if kind == RR:
        f = abs(np.vdot(r1, r2)) / (np.linalg.norm(r1) * np.linalg.norm(r2))
        f = complex(f)
    else:
        f = np.sqrt(complex(np.vdot(l2, r1) * np.vdot(l1, r2)))
    if not np.isfinite(f) or f.real <= 0:
        raise FidelityError(f"fidelity {f:.6g} is not positive")
    val = -2.0 * np.log(f) / dm**2
    return FidelityResult(chi=float(val.real), fidelity=f, imag_residue=float(abs(val.imag)), kind=kind)


def fidelity_susceptibility(params: ModelParams, dm: float = 1e-4, kind: str = RR, ks=GROUND_SECTORS,
                            cache=None) -> float:
    return fidelity_details(params, dm, kind, ks, cache).chi


# --------------------------------------------------------------------------
# pseudocritical points

@dataclass(frozen=True)
class Peak:
    location: float
    value: float
    curvature: float
    index: int


def find_pseudocritical(m, y) -> Peak:
    """Grid argmax refined by the parabola through its two neighbours."""
    m = np.asarray(m, dtype=float)
    y = np.asarray(y, dtype=float)
    if m.shape != y.shape or m.ndim != 1 or len(m) < 3:
        raise ValueError("need matching 1-d scans with at least three points")
    order = np.argsort(m)
    m, y = m[order], y[order]
    i = int(np.nanargmax(y))
    if i == 0 or i == len(m) - 1:
        raise ScanBoundaryError(f"maximum at the scan edge m = {m[i]:.6g}; widen the range")
    c2, c1, c0 = np.polyfit(m[i - 1:i + 2], y[i - 1:i + 2], 2)
    if c2 >= 0:
        return Peak(location=float(m[i]), value=float(y[i]), curvature=float(2 * c2), index=i)
    x = -c1 / (2 * c2)
    return Peak(location=float(x), value=float(np.polyval([c2, c1, c0], x)), curvature=float(2 * c2), index=i)


def refine_peak(func, grid, xtol: float = 1e-7) -> Peak:
    """Scan ``func`` on ``grid``, then polish the interior maximum with Brent's method."""
    grid = np.sort(np.asarray(grid, dtype=float))
    vals = np.array([func(x) for x in grid])
    coarse = find_pseudocritical(grid, vals)
    i = coarse.index
    res = minimize_scalar(lambda x: -func(x), bracket=(grid[i - 1], grid[i], grid[i + 1]),
                          tol=xtol / max(1.0, abs(grid[i])))
    if not grid[i - 1] <= res.x <= grid[i + 1]:
        return coarse
    h = max(1e-4 * (grid[i + 1] - grid[i - 1]), 1e-6)
    curv = (func(res.x + h) - 2 * (-res.fun) + func(res.x - h)) / h**2
    return Peak(location=float(res.x), value=float(-res.fun), curvature=float(curv), index=i)


# --------------------------------------------------------------------------
# scaling fits

@dataclass(frozen=True, eq=False)
class ScalingFit:
    family: str
    exponent: float
    amplitude: float
    offset: float
    stderr: dict
    residual_rms: float
    n_points: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    def predict(self, x):
        return _model(self.family, np.asarray(x, dtype=float), self.exponent, self.amplitude, self.offset)

    def as_dict(self) -> dict:
        return {"family": self.family, "exponent": self.exponent, "amplitude": self.amplitude,
                "offset": self.offset, "stderr": dict(self.stderr), "residual_rms": self.residual_rms,
                "n_points": self.n_points}


def _model(family, x, p, a, off):
    if family == POWER:
        return a * x**p
    if family == SHIFTED:
        return off + a * x ** (-p)
    return (p / 3.0) * np.log(x) + off


def _linear_fit(X, y):
    n, k = X.shape
    if np.linalg.matrix_rank(X) < k:
        raise FitError("rank-deficient design: the x values do not determine the parameters")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = n - k
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(X.T @ X)
    return coef, np.sqrt(np.diag(cov))


def _shifted_fit(x, y, max_nfev):
    # variable projection: for fixed p the model is linear in (x_inf, a)
    def linear_part(p):
        X = np.column_stack([np.ones_like(x), x ** (-p)])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        return coef, y - X @ coef

    dy = np.diff(y)
    mid = 0.5 * (x[1:] + x[:-1])
    ok = dy != 0
    p0 = 1.0
    if ok.sum() >= 2 and (np.all(dy[ok] > 0) or np.all(dy[ok] < 0)):
        slope = np.polyfit(np.log(mid[ok]), np.log(np.abs(dy[ok] / np.diff(x)[ok])), 1)[0]
        p0 = max(-slope - 1.0, 0.05)
    ps = np.concatenate([[p0], np.geomspace(0.05, 12.0, 60)])
    costs = [float(np.sum(linear_part(p)[1] ** 2)) for p in ps]
    p_start = ps[int(np.argmin(costs))]
    (xinf0, a0), _ = linear_part(p_start)

    def resid(theta):
        xi, a, p = theta
        return xi + a * x ** (-p) - y

    def jac(theta):
        xi, a, p = theta
        xp = x ** (-p)
        return np.column_stack([np.ones_like(x), xp, -a * xp * np.log(x)])

    sol = least_squares(resid, [xinf0, a0, p_start], jac=jac, method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    if sol.status <= 0:
        raise FitError(f"shifted-power fit did not converge: {sol.message}")
    J = jac(sol.x)
    if np.linalg.matrix_rank(J, tol=1e-10 * np.abs(J).max()) < 3:
        raise FitError("rank-deficient Jacobian: amplitude or exponent not identifiable")
    dof = len(x) - 3
    s2 = float(sol.fun @ sol.fun) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.pinv(J.T @ J)
    return sol.x, np.sqrt(np.abs(np.diag(cov)))


def fit_scaling(x, y, family: str = POWER, max_nfev: int = 2000) -> ScalingFit:
    """Least-squares fit of one scaling family.

    power:   y = a * x**p         (linear regression in log-log coordinates)
    shifted: y = y_inf + a * x**(-p)   (offset = y_inf, Levenberg-Marquardt)
    log:     y = (p / 3) * ln x + b    (offset = b, amplitude = p / 3)
    """
    family = _FAMILY_ALIASES.get(family, family)
    if family not in FAMILIES:
        raise ValueError(f"unknown fit family {family!r}; choose from {FAMILIES}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < 3:
        raise ValueError("scaling fits need at least three points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite data")
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    if len(np.unique(x)) < 2:
        raise FitError("rank-deficient design: all x values coincide")

    if family == POWER:
        sign = np.sign(y[0])
        if sign == 0 or np.any(np.sign(y) != sign):
            raise ValueError("power-law fit needs y of one strict sign")
        X = np.column_stack([np.ones_like(x), np.log(x)])
        (ln_a, p), (se_ln_a, se_p) = _linear_fit(X, np.log(sign * y))
        a = sign * math.exp(ln_a)
        params = (p, a, 0.0)
        stderr = {"exponent": float(se_p), "amplitude": float(abs(a) * se_ln_a), "offset": 0.0}
    elif family == LOG:
        X = np.column_stack([np.ones_like(x), np.log(x)])
        (b, slope), (se_b, se_slope) = _linear_fit(X, y)
        params = (3.0 * slope, slope, b)
        stderr = {"exponent": float(3 * se_slope), "amplitude": float(se_slope), "offset": float(se_b)}
    else:
        if len(np.unique(x)) < 3:
            raise FitError("rank-deficient design: shifted fit needs three distinct x values")
        (xi, a, p), (se_xi, se_a, se_p) = _shifted_fit(x, y, max_nfev)
        params = (p, a, xi)
        stderr = {"exponent": float(se_p), "amplitude": float(se_a), "offset": float(se_xi)}
    p, a, off = params
    resid = y - _model(family, x, p, a, off)
    return ScalingFit(family=family, exponent=float(p), amplitude=float(a), offset=float(off),
                      stderr=stderr, residual_rms=float(np.sqrt(np.mean(resid**2))),
                      n_points=len(x), x=x, y=y)


# --------------------------------------------------------------------------
# phase labels

def effective_coupling(params: ModelParams) -> complex:
    """sqrt(raise * lower): the PXP coupling of the similarity-transformed chain."""
    return complex(np.sqrt(complex(params.raise_amplitude * params.lower_amplitude)))


def deconfinement_boundary(params: ModelParams) -> float | None:
    """m_c = -0.655 * lambda when the transformed coupling lambda is real, else None."""
    lam2 = params.raise_amplitude * params.lower_amplitude
    if abs(np.imag(lam2)) > 1e-12 * max(1.0, abs(lam2)) or np.real(lam2) < 0:
        return None
    return CRITICAL_RATIO * math.sqrt(max(float(np.real(lam2)), 0.0))


def default_sectors(params: ModelParams):
    if params.bc != PERIODIC:
        return None
    return (0,) if params.N % 2 else (0, params.N // 2)


def _reference_sector(params: ModelParams, ks, side: int):
    """Sector hosting the ground state deep on one side of m = 0."""
    m_ref = side * (4.0 * (abs(params.h_x) + abs(params.g)) + 1.0)
    chain = PXPChain(params.replace(m=m_ref))
    return chain.ground_state(ks).k_index


@dataclass(frozen=True)
class PhaseLabel:
    label: str
    report: RealityReport
    boundary: bool = False
    boundary_distance: float | None = None
    ep: bool = False
    ground_sector: int | None = None
    max_imag: float = 0.0
    gap: float = float("nan")

    def as_dict(self, g=None, m=None) -> dict:
        out = {"label": self.label, "max_imag": self.max_imag, "gap": self.gap,
               "boundary": self.boundary, "ep": self.ep}
        if g is not None:
            out = {"g": g, "m": m, **out}
        return out


def spreading_deconfined(params: ModelParams, n_times: int = 5, threshold: float = 0.1,
                         cache=None) -> bool:
    """Correlation-spreading diagnostic: does G(l, t) extend to |l| = N/2 for t <= N/2?"""
    from .observables import correlation_front, correlation_G

    t_grid = np.linspace(0.0, params.N / 2.0, n_times)
    fld = correlation_G(params, t_grid, cache=cache, ks=default_sectors(params) or GROUND_SECTORS)
    return bool(correlation_front(fld, threshold).max() >= params.N // 2)


def _reality_at(params: ModelParams, ks, tol, cache=None, pin=True):
    chain = PXPChain(params, cache=cache)
    e, labels = chain.eigenvalues(ks)
    ground = None
    sector = None
    if pin and params.m != 0 and ks is not None and len(ks) > 1:
        sector = _reference_sector(params, ks, 1 if params.m > 0 else -1)
        idx = np.nonzero(labels == sector)[0]
        ground = int(idx[select_ground_state(e[idx], tol)])
    rep = classify_spectrum_reality(e, tol, ground=ground)
    if sector is None:
        g0 = select_ground_state(e, tol) if ground is None else ground
        sector = None if labels[g0] < 0 else int(labels[g0])
    return rep, e, sector


def _decide(rep: RealityReport) -> str | None:
    if rep.all_real:
        return None
    if rep.ground_real and rep.first_excited_complex_pair:
        return BR_1
    if rep.ground_real_part_degenerate:
        return BR_F2
    return BR_F1


def classify_phase(params: ModelParams, ks="default", tol: float = REALITY_TOL,
                   boundary_tol: float = 2e-4, spreading: bool = True, cache=None) -> PhaseLabel:
    """Label a parameter point by its spectral reality and, when real, by confinement.

    The ground level is pinned to the momentum sector that hosts the ground
    state deep on the same side of m = 0 (k = 0 or k = pi depending on N).
    For a real spectrum, m is compared with m_c = -0.655 lambda when the
    transformed coupling lambda is real; otherwise the correlation-spreading
    diagnostic decides.
    """
    if params.model != DETUNED_PXP:
        raise ValueError("phase classification is defined for the detuned PXP chain")
    ks = default_sectors(params) if ks == "default" else ks
    rep, e, sector = _reality_at(params, ks, tol, cache)
    ep = bool(np.abs(e).max() < EP_ABS_TOL)
    try:
        gap = energy_gap(e, tol=tol)
    except ValueError:
        gap = float("nan")
    label = _decide(rep)
    dist = None
    if label is None:
        m_c = deconfinement_boundary(params)
        if m_c is not None:
            dist = abs(params.m - m_c)
            label = PT_DECONFINED if params.m < m_c else PT_CONFINED
        elif spreading:
            label = PT_DECONFINED if spreading_deconfined(params, cache=cache) else PT_CONFINED
        else:
            label = PT_DECONFINED if params.m < 0 else PT_CONFINED
    boundary = ep or (dist is not None and dist <= boundary_tol)
    return PhaseLabel(label=label, report=rep, boundary=boundary, boundary_distance=dist, ep=ep,
                      ground_sector=sector, max_imag=rep.max_imag, gap=gap)


# --------------------------------------------------------------------------
# transitions by bisection

def bisect_predicate(pred, a: float, b: float, tol: float = 1e-4, max_iter: int = 200) -> float:
    """Midpoint of the final bracket where ``pred`` changes value between a and b."""
    pa, pb = pred(a), pred(b)
    if pa == pb:
        raise BisectionError(f"predicate does not change between {a} and {b}")
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        c = 0.5 * (a + b)
        if pred(c) == pa:
            a = c
        else:
            b = c
    return 0.5 * (a + b)


def ground_ep(params: ModelParams, m_lo: float, m_hi: float, tol: float = 1e-9, ks=GROUND_SECTORS,
              reality_tol: float = REALITY_TOL) -> float:
    """Detuning where the ground level of the sectors ``ks`` turns real (reality bisection)."""
    def real_ground(m):
        e, _ = PXPChain(params.replace(m=m)).eigenvalues(ks)
        j = select_ground_state(e, reality_tol)
        return bool(abs(e[j].imag) < reality_tol * max(1.0, np.abs(e).max()))

    return bisect_predicate(real_ground, m_lo, m_hi, tol)


def locate_transitions(params: ModelParams, m_values, tol: float = 1e-4, ks="default",
                       reality_tol: float = REALITY_TOL, spreading: bool = False):
    """Label a row of m values at fixed g and bisect every label change.

    Returns (labels, transitions) with transitions a list of
    (m, left_label, right_label).
    """
    m_values = np.sort(np.asarray(m_values, dtype=float))

    def lab(m):
        return classify_phase(params.replace(m=float(m)), ks=ks, tol=reality_tol,
                              spreading=spreading).label

    labels = [lab(m) for m in m_values]
    out = []
    for i in range(len(m_values) - 1):
        if labels[i] != labels[i + 1]:
            left = labels[i]
            mc = bisect_predicate(lambda m: lab(m) == left, m_values[i], m_values[i + 1], tol)
            out.append((mc, labels[i], labels[i + 1]))
    return labels, out


def named_transitions(transitions) -> dict:
    """Map a g > 1 row's label changes onto m_c1 .. m_c4."""
    names = {}
    for mc, left, right in transitions:
        if left == PT_DECONFINED and "m_c1" not in names:
            names["m_c1"] = mc
        elif left == BR_F1 and right == BR_1 and "m_c2" not in names:
            names["m_c2"] = mc
        elif left == BR_1 and right == BR_F2 and "m_c3" not in names:
            names["m_c3"] = mc
        elif left == BR_F2 and "m_c4" not in names:
            names["m_c4"] = mc
    return names


def kink_window(named: dict, margin: float = 0.3):
    """Open interval strictly inside (m_c2, m_c4) for the first-order search, or None."""
    if "m_c2" not in named or "m_c4" not in named:
        return None
    lo, hi = named["m_c2"] + margin, named["m_c4"] - margin
    return (lo, hi) if hi > lo else None


# --------------------------------------------------------------------------
# phase diagram scanner

@dataclass(frozen=True, eq=False)
class PhaseDiagram:
    g_values: np.ndarray
    m_values: np.ndarray
    N: int
    labels: list  # rows over g, entries PhaseLabel or None when skipped
    transitions: dict  # g -> list of (m, left, right)
    complete: bool

    def points(self) -> list[dict]:
        rows = []
        for gi, g in enumerate(self.g_values):
            for mi, m in enumerate(self.m_values):
                lab = self.labels[gi][mi]
                if lab is None:
                    rows.append({"g": float(g), "m": float(m), "label": None})
                else:
                    rows.append(lab.as_dict(float(g), float(m)))
        return rows


def _classify_point(args):
    params, ks, tol, spreading, cache = args
    return classify_phase(params, ks=ks, tol=tol, spreading=spreading, cache=cache)


def scan_phase_diagram(g_values, m_values, N: int, base: ModelParams | None = None, ks="default",
                       tol: float = REALITY_TOL, m_tol: float = 1e-4, bisect: bool = True,
                       spreading: bool = True, jobs: int = 1, max_points: int | None = None,
                       cache=None) -> PhaseDiagram:
    """Classify every (g, m) grid point and bisect label changes along each g row.

    Points beyond ``max_points`` are left as None and the result is marked
    incomplete. Grid points within 2 * m_tol of a bisected transition carry
    the boundary flag. Workers share only the optional spectrum cache.
    """
    g_values = np.asarray(g_values, dtype=float)
    m_values = np.sort(np.asarray(m_values, dtype=float))
    base = base or ModelParams(N=N)
    base = base.replace(N=N)
    tasks = [(base.replace(g=float(g), m=float(m)), ks, tol, spreading, cache)
             for g in g_values for m in m_values]
    budget = len(tasks) if max_points is None else min(len(tasks), max_points)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_classify_point, tasks[:budget]))
    else:
        done = [_classify_point(t) for t in tasks[:budget]]
    flat = done + [None] * (len(tasks) - budget)
    nm = len(m_values)
    labels = [flat[i * nm:(i + 1) * nm] for i in range(len(g_values))]
    transitions = {}
    for gi, g in enumerate(g_values):
        row = labels[gi]
        found = []
        for i in range(nm - 1):
            a, b = row[i], row[i + 1]
            if a is None or b is None or a.label == b.label:
                continue
            if bisect:
                p = base.replace(g=float(g))
                left = a.label
                mc = bisect_predicate(
                    lambda m: classify_phase(p.replace(m=float(m)), ks=ks, tol=tol,
                                             spreading=spreading).label == left,
                    m_values[i], m_values[i + 1], m_tol)
            else:
                mc = 0.5 * (m_values[i] + m_values[i + 1])
            found.append((float(mc), a.label, b.label))
        transitions[float(g)] = found
        for j, lab in enumerate(row):
            if lab is None or lab.boundary:
                continue
            if any(abs(m_values[j] - mc) <= 2 * m_tol for mc, _, _ in found):
                row[j] = PhaseLabel(**{**lab.__dict__, "boundary": True})
    return PhaseDiagram(g_values=g_values, m_values=m_values, N=N, labels=labels,
                        transitions=transitions, complete=budget == len(tasks))


# --------------------------------------------------------------------------
# first-order detector

@dataclass(frozen=True, eq=False)
class FirstOrderScan:
    m: np.ndarray
    energy: np.ndarray      # Re E_0 on the grid
    m_mid: np.ndarray       # derivative abscissae
    derivative: np.ndarray  # forward differences of Re E_0
    jump_location: float | None
    jump: float
    noise: float
    conclusive: bool


def detect_derivative_jump(m, energy, factor: float = 3.0):
    """Largest step in dE/dm compared with the typical step elsewhere."""
    m = np.asarray(m, dtype=float)
    energy = np.asarray(energy, dtype=float)
    if len(m) < 5:
        raise ValueError("need at least five grid points")
    d = np.diff(energy) / np.diff(m)
    mid = 0.5 * (m[1:] + m[:-1])
    steps = np.abs(np.diff(d))
    i = int(np.argmax(steps))
    # local noise: the largest step elsewhere, skipping the direct neighbours of the candidate
    others = np.delete(steps, [j for j in (i - 1, i, i + 1) if 0 <= j < len(steps)])
    noise = float(others.max()) if len(others) else 0.0
    conclusive = steps[i] > factor * max(noise, 1e-14)
    loc = float(0.5 * (mid[i] + mid[i + 1])) if conclusive else None
    return mid, d, loc, float(steps[i]), noise, bool(conclusive)


def first_order_scan(params: ModelParams, m_values, ks="default", factor: float = 3.0,
                     window=None) -> FirstOrderScan:
    """Re E_0(m) on a grid and the location of a kink in its first derivative.

    The jump is conclusive when it exceeds ``factor`` times the largest other
    step of the derivative; otherwise the scan is flagged inconclusive.
    ``window = (lo, hi)`` restricts the kink search to lo < m < hi, e.g. to keep
    the square-root singularities at exceptional points out of the comparison.
    Re E_0 is still reported on the whole grid.
    """
    m_values = np.sort(np.asarray(m_values, dtype=float))
    ks = default_sectors(params) if ks == "default" else ks
    energy = []
    for m in m_values:
        e, _ = PXPChain(params.replace(m=float(m))).eigenvalues(ks)
        energy.append(e[select_ground_state(e)].real)
    energy = np.array(energy)
    mid, d = 0.5 * (m_values[1:] + m_values[:-1]), np.diff(energy) / np.diff(m_values)
    inside = np.ones(len(m_values), dtype=bool)
    if window is not None:
        inside = (m_values > window[0]) & (m_values < window[1])
    _, _, loc, jump, noise, ok = detect_derivative_jump(m_values[inside], energy[inside], factor)
    return FirstOrderScan(m=m_values, energy=energy, m_mid=mid, derivative=d, jump_location=loc,
                          jump=jump, noise=noise, conclusive=ok)


# --------------------------------------------------------------------------
# Yang-Lee edge pseudocritical points

def associated_echo_swing(params: ModelParams, dm: float = 1e-4, t_max: float = 150.0,
                          dt: float = 1.0, ks=GROUND_SECTORS) -> float:
    """max_t |ln |L_A(t)|| for a quench m -> m + dm (the quantity whose change marks the edge)."""
    q = QuenchSpec(params, dm=dm, t_max=t_max, dt=dt, ks=ks)
    return float(np.abs(associated_echo(q).log_values.real).max())


def echo_change_point(params: ModelParams, m_lo: float, m_hi: float, dm: float = 1e-4,
                      t_max: float = 150.0, dt: float = 1.0, level: float = 1.0, n_grid: int = 9,
                      tol: float = 1e-8, ks=GROUND_SECTORS) -> float:
    """Pseudocritical detuning where the associated echo stops swinging.

    On the PT-symmetric side (large m) the swing max_t |ln|L_A|| stays below
    ``level``; entering the broken side it jumps above it. The crossing
    closest to m_hi is bracketed on a grid and bisected to ``tol``.
    """
    def swing(m):
        return associated_echo_swing(params.replace(m=float(m)), dm, t_max, dt, ks)

    grid = np.linspace(m_lo, m_hi, n_grid)
    vals = [swing(m) for m in grid]
    if vals[-1] >= level:
        raise ScanBoundaryError(f"echo swing {vals[-1]:.3g} at m_hi = {m_hi} is above the level; raise m_hi")
    for i in range(n_grid - 1, 0, -1):
        if vals[i - 1] >= level:
            return bisect_predicate(lambda m: swing(m) >= level, grid[i - 1], grid[i], tol)
    raise ScanBoundaryError("no change point in the scanned range; lower m_lo")
