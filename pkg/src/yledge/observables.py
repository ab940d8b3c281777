"""Biorthogonal density matrices, entanglement entropy and the confinement correlator."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .basis import PERIODIC, ConstrainedBasis
from .spectrum import BiorthogonalSpectrum, DefectivePairError, EP_TOL

EIG_CUTOFF = 1e-12
BRANCH_CUT_WARN = 1e-9  # negative eigenvalues below this size are roundoff


class BranchCutWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class BiorthogonalDensity:
    right: np.ndarray
    left: np.ndarray
    trace: complex
    source: tuple

    @property
    def rho(self) -> np.ndarray:
        return np.outer(self.right, self.left.conj()) / self.trace


def biorthogonal_density_matrix(spec: BiorthogonalSpectrum, j: int, right=None, left=None,
                                self_normal: bool = False) -> BiorthogonalDensity:
    """rho = |R_j><L_j| / Tr(|R_j><L_j|), stored in factored form.

    ``right``/``left`` override the spectrum columns (e.g. with lifted sector
    vectors). self_normal=True builds |R><R|/<R|R> instead.
    """
    r = spec.right[:, j] if right is None else np.asarray(right)
    l = spec.left[:, j] if left is None else np.asarray(left)
    if self_normal:
        l = r
    tr = np.vdot(l, r)
    if abs(tr) < EP_TOL * np.linalg.norm(l) * np.linalg.norm(r):
        raise DefectivePairError(f"pair {j} has vanishing overlap {abs(tr):.3e}", condition=abs(tr))
    return BiorthogonalDensity(right=r, left=l, trace=complex(tr), source=(j, j))


@dataclass(frozen=True, eq=False)
class SubsystemMatrix:
    matrix: np.ndarray
    configs: np.ndarray  # subsystem words labelling rows/cols
    sites: tuple


def _split_words(basis: ConstrainedBasis, sites):
    sites = tuple(int(s) for s in sites)
    mask = 0
    for s in sites:
        mask |= 1 << s
    states = basis.states
    a_words = np.zeros_like(states)
    for pos, s in enumerate(sites):
        a_words |= ((states >> s) & 1) << pos
    b_words = states & ~mask
    a_vals, a_idx = np.unique(a_words, return_inverse=True)
    b_vals, b_idx = np.unique(b_words, return_inverse=True)
    return a_vals, a_idx, b_idx, len(b_vals)


def contiguous_cut(N: int, size: int, start: int = 0):
    return tuple((start + i) % N for i in range(size))


def _check_contiguous(sites, N, bc):
    sites = list(sites)
    if not sites:
        raise ValueError("empty subsystem")
    n = len(sites)
    if len(set(sites)) != n or any(not 0 <= s < N for s in sites):
        raise ValueError(f"invalid subsystem {sites}")
    start = sites[0]
    wrap = bc == PERIODIC
    expected = [(start + i) % N if wrap else start + i for i in range(n)]
    if sites != expected:
        raise ValueError(f"subsystem {sites} is not a contiguous site range")


def reduced_density_matrix(rho: BiorthogonalDensity, basis: ConstrainedBasis, cut) -> SubsystemMatrix:
    """Tr_B of a (factored) pure biorthogonal density matrix over a contiguous cut A.

    ``cut`` is a sequence of sites, or an int meaning sites 0..cut-1. Rows and
    columns run over the subsystem words actually realized in the constrained
    basis; the rest of the 2^|A| space carries zero weight.
    """
    sites = contiguous_cut(basis.N, cut) if isinstance(cut, (int, np.integer)) else tuple(cut)
    _check_contiguous(sites, basis.N, basis.bc)
    if rho.right.shape[0] != basis.dim:
        raise ValueError("density matrix does not live on this basis")
    a_vals, a_idx, b_idx, nb = _split_words(basis, sites)
    mr = np.zeros((len(a_vals), nb), dtype=np.complex128)
    ml = np.zeros_like(mr)
    mr[a_idx, b_idx] = rho.right
    ml[a_idx, b_idx] = rho.left
    mat = (mr @ ml.conj().T) / rho.trace
    return SubsystemMatrix(matrix=mat, configs=a_vals, sites=sites)


def reduced_density_matrix_dense(rho_full: np.ndarray, basis: ConstrainedBasis, cut) -> SubsystemMatrix:
    """Same partial trace for an explicit full-basis matrix (mixed or pure)."""
    sites = contiguous_cut(basis.N, cut) if isinstance(cut, (int, np.integer)) else tuple(cut)
    _check_contiguous(sites, basis.N, basis.bc)
    a_vals, a_idx, b_idx, nb = _split_words(basis, sites)
    out = np.zeros((len(a_vals), len(a_vals)), dtype=np.complex128)
    same_b = b_idx[:, None] == b_idx[None, :]
    rows, cols = np.nonzero(same_b)
    np.add.at(out, (a_idx[rows], a_idx[cols]), rho_full[rows, cols])
    return SubsystemMatrix(matrix=out, configs=a_vals, sites=sites)


@dataclass(frozen=True)
class EntropyResult:
    value: float
    imag_residue: float
    branch_cut: tuple = field(default=())
    trace: complex = 1.0


def entropy_details(rho_a, trace_tol: float = 1e-8) -> EntropyResult:
    mat = rho_a.matrix if isinstance(rho_a, SubsystemMatrix) else np.asarray(rho_a)
    tr = np.trace(mat)
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"reduced density matrix has trace {tr:.6g}, expected 1")
    lam = la.eigvals(mat)
    lam = lam[np.abs(lam) > EIG_CUTOFF]
    on_cut = lam[(lam.real < 0) & (np.abs(lam.imag) < EIG_CUTOFF)]
    if len(on_cut) and on_cut.real.min() < -BRANCH_CUT_WARN:
        warnings.warn(f"{len(on_cut)} eigenvalue(s) of rho_A on the log branch cut, "
                      f"most negative {on_cut.real.min():.3e}", BranchCutWarning, stacklevel=3)
    s = -np.sum(lam * np.log(lam.astype(np.complex128)))
    return EntropyResult(value=float(s.real), imag_residue=float(abs(s.imag)),
                         branch_cut=tuple(complex(x) for x in on_cut), trace=complex(tr))


def entanglement_entropy(rho_a) -> float:
    """Von Neumann entropy Re[-sum lambda ln lambda] on the principal branch."""
    return entropy_details(rho_a).value


def half_chain_entropy(right, left, basis: ConstrainedBasis, cut=None, self_normal=False) -> float:
    cut = basis.N // 2 if cut is None else cut
    rho = BiorthogonalDensity(right=right, left=right if self_normal else left,
                              trace=complex(np.vdot(right if self_normal else left, right)),
                              source=(0, 0))
    return entanglement_entropy(reduced_density_matrix(rho, basis, cut))


def mean_density(right, left, basis: ConstrainedBasis) -> np.ndarray:
    """n_j = Re <L|n_j|R> / <L|R> per site."""
    right, left = np.asarray(right), np.asarray(left)
    norm = np.vdot(left, right)
    if abs(norm) < EP_TOL:
        raise DefectivePairError("ground pair has vanishing overlap")
    w = (left.conj() * right) / norm
    return (w @ basis.occupations()).real


def constrained_flip(vec, basis: ConstrainedBasis, site: int) -> np.ndarray:
    """Apply P_{j-1} X_j P_{j+1} to a full-basis vector."""
    N = basis.N
    states = basis.states
    neighbours = [site - 1, site + 1]
    if basis.bc == PERIODIC:
        neighbours = [s % N for s in neighbours]
    free = np.ones(len(states), dtype=bool)
    for s in neighbours:
        if 0 <= s < N and s != site:
            free &= ((states >> s) & 1) == 0
    out = np.zeros_like(np.asarray(vec, dtype=np.complex128))
    src = np.nonzero(free)[0]
    out[basis.index(states[src] ^ (1 << site))] = vec[src]
    return out


@dataclass(frozen=True, eq=False)
class CorrelationField:
    values: np.ndarray  # (len(l_range), len(t_grid))
    l_range: np.ndarray
    t_grid: np.ndarray
    excitation_site: int
    mean_density: np.ndarray
    imag_residue: float


def correlation_from_states(basis, r0, l0, evolve_right, evolve_left, t_grid, nbar,
                            excitation_site) -> CorrelationField:
    """G(l, t) = sum_j sqrt(<L|A_j A_{j+l}|R(t)> <L(t)|A_j A_{j+l}|R>), A_j = n_j - nbar_j.

    ``evolve_right``/``evolve_left`` are callables t -> evolved excited state,
    or arrays holding one evolved state per column of ``t_grid``.
    l runs over displacements -N//2+1 .. N//2 (cyclic).
    """
    N = basis.N
    a = basis.occupations() - nbar[None, :]
    ls = np.arange(-(N // 2) + 1, N // 2 + 1) if basis.bc == PERIODIC else np.arange(-(N - 1), N)
    out = np.zeros((len(ls), len(t_grid)))
    resid = 0.0
    j = np.arange(N)
    for ti, t in enumerate(t_grid):
        rt = evolve_right(t) if callable(evolve_right) else evolve_right[:, ti]
        lt = evolve_left(t) if callable(evolve_left) else evolve_left[:, ti]
        m1 = a.T @ ((l0.conj() * rt)[:, None] * a)
        m2 = a.T @ ((lt.conj() * r0)[:, None] * a)
        for li, l in enumerate(ls):
            if basis.bc == PERIODIC:
                jj, kk = j, (j + l) % N
            else:
                jj = j[(j + l >= 0) & (j + l < N)]
                kk = jj + l
            z = np.sqrt(m1[jj, kk] * m2[jj, kk])
            s = z.sum()
            out[li, ti] = abs(s)
            resid = max(resid, abs(s.imag))
    return CorrelationField(values=out, l_range=ls, t_grid=np.asarray(t_grid),
                            excitation_site=excitation_site, mean_density=nbar,
                            imag_residue=resid)


def _field_front(values, ls, threshold):
    peak = values.max()
    if peak <= 0:
        return np.zeros(values.shape[1], dtype=int)
    above = values >= threshold * peak
    reach = np.where(above, np.abs(ls)[:, None], -1).max(axis=0)
    return reach


def correlation_front(field: CorrelationField, threshold: float = 0.1) -> np.ndarray:
    """Largest |l| per time slice where G exceeds ``threshold`` times the global peak."""
    return _field_front(field.values, field.l_range, threshold)


def arrival_time(field: CorrelationField, distance: int, threshold: float = 0.1):
    """First sampled time at which the front reaches |l| >= distance (None if never)."""
    hit = np.nonzero(correlation_front(field, threshold) >= distance)[0]
    return float(field.t_grid[hit[0]]) if len(hit) else None


def correlation_G(params, t_grid, excitation_site: int | None = None, ks=(0,),
                  cache=None, tol: float | None = None) -> CorrelationField:
    """Spreading of a constrained-flip excitation on top of the ground pair.

    The ground pair is taken from the sectors ``ks``; the excited state has
    weight in every momentum sector, so the whole spectrum must be real.
    """
    from .chain import PXPChain
    from .dynamics import ComplexSpectrumError
    from .spectrum import REALITY_TOL, classify_spectrum_reality

    tol = REALITY_TOL if tol is None else tol
    chain = PXPChain(params, cache=cache)
    N = params.N
    site = N // 2 if excitation_site is None else int(excitation_site)
    if not 0 <= site < N:
        raise ValueError(f"excitation site {site} outside [0, {N})")
    keys = chain.sector_keys(None)
    rep = classify_spectrum_reality(np.concatenate([chain.spectrum(k).eigenvalues for k in keys]), tol)
    if not rep.all_real:
        raise ComplexSpectrumError(
            f"correlation spreading needs a real spectrum (max |Im E| = {rep.max_imag:.3g})")
    gs = chain.ground_state(ks, tol)
    nbar = mean_density(gs.right, gs.left, chain.basis)
    r0 = constrained_flip(gs.right, chain.basis, site)
    l0 = constrained_flip(gs.left, chain.basis, site)
    ov = np.vdot(l0, r0)
    if abs(ov) < EP_TOL * max(np.linalg.norm(l0) * np.linalg.norm(r0), EP_TOL):
        raise ValueError(f"constrained flip at site {site} annihilates the ground pair")
    l0 = l0 / np.conj(ov)
    t_grid = np.asarray(t_grid, dtype=float)
    rt = chain.propagate(r0, t_grid)
    lt = chain.propagate(l0, t_grid, dagger=True)
    return correlation_from_states(chain.basis, r0, l0, rt, lt, t_grid, nbar, site)
