"""Biorthogonal eigendecomposition of dense non-Hermitian matrices.

Right vectors come from the eigendecomposition of H, left vectors from a
separate decomposition of H^dagger. The two sets are paired by matching
E_j with conj(E'_k); degenerate clusters are biorthogonalized as blocks.

Gauge: each right column has unit Euclidean norm with its largest component
real and positive; the left column carries the factor making <L_j|R_j> = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import linear_sum_assignment

from .hamiltonian import OperatorMatrix

REALITY_TOL = 1e-8
EP_TOL = 1e-10
PAIR_TOL = 1e-6
CLUSTER_TOL = 1e-9
DENSE_DIM_LIMIT = 12000  # about 2.3 GB per complex dense copy


class SpectrumError(RuntimeError):
    pass


class EPProximityError(SpectrumError):
    """Left and right spectra could not be paired one-to-one."""

    def __init__(self, msg, unmatched=()):
        super().__init__(msg)
        self.unmatched = np.asarray(unmatched)


class DefectivePairError(SpectrumError):
    """A left/right pair is (numerically) orthogonal: the matrix is at an EP."""

    def __init__(self, msg, condition=None):
        super().__init__(msg)
        self.condition = condition


def _as_dense(matrix) -> np.ndarray:
    shape = getattr(getattr(matrix, "entries", matrix), "shape", None)
    if shape is not None and len(shape) == 2 and shape[0] > DENSE_DIM_LIMIT:
        raise SpectrumError(f"dimension {shape[0]} exceeds the dense limit {DENSE_DIM_LIMIT}; "
                            "use momentum sectors or a smaller N")
    if isinstance(matrix, OperatorMatrix):
        a = matrix.dense()
    elif hasattr(matrix, "toarray"):
        a = matrix.toarray()
    else:
        a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.iscomplexobj(a) and not np.any(a.imag):
        a = a.real
    return a


def sort_order(eigenvalues, tol: float = CLUSTER_TOL) -> np.ndarray:
    """Stable order by (Re E, Im E) with real parts compared on a tol-grid."""
    e = np.asarray(eigenvalues)
    scale = max(1.0, np.abs(e).max(initial=0.0))
    re = np.round(e.real / (tol * scale))
    im = np.round(e.imag / (tol * scale))
    return np.lexsort((im, re))


def eigenvalues_only(matrix) -> np.ndarray:
    """Sorted eigenvalues without vectors (usable exactly at exceptional points)."""
    a = _as_dense(matrix)
    e = la.eigvals(a)
    return e[sort_order(e)]


@dataclass(frozen=True, eq=False)
class BiorthogonalSpectrum:
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    pairing: np.ndarray
    condition: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)

    def pair(self, j: int):
        return self.eigenvalues[j], self.right[:, j], self.left[:, j]

    def residuals(self, matrix) -> tuple[float, float]:
        """max_j ||H R_j - E_j R_j|| and max_j ||H^dag L_j - E_j^* L_j|| / ||L_j||."""
        a = _as_dense(matrix)
        e = self.eigenvalues
        rr = np.linalg.norm(a @ self.right - self.right * e, axis=0)
        lnorm = np.linalg.norm(self.left, axis=0)
        lr = np.linalg.norm(a.conj().T @ self.left - self.left * e.conj(), axis=0) / lnorm
        return float(rr.max(initial=0.0)), float(lr.max(initial=0.0))

    def biorthogonality_error(self) -> float:
        s = self.left.conj().T @ self.right
        return float(np.abs(s - np.eye(len(self))).max(initial=0.0))

    def completeness_error(self) -> float:
        c = self.right @ self.left.conj().T
        return float(np.abs(c - np.eye(c.shape[0])).max(initial=0.0))


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs) > (1 - 1e-8) * np.abs(vecs).max(axis=0), axis=0)
    lead = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(lead) / lead)


def _clusters(e: np.ndarray, tol: float) -> list[np.ndarray]:
    """Index groups of (near-)degenerate eigenvalues (transitive closure)."""
    n = len(e)
    scale = max(1.0, np.abs(e).max(initial=0.0))
    eps = tol * scale
    order = np.argsort(e.real, kind="stable")
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    re = e.real[order]
    for a in range(n):
        b = a + 1
        while b < n and re[b] - re[a] <= eps:
            i, j = order[a], order[b]
            if abs(e[i] - e[j]) <= eps:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            b += 1
    roots = np.array([find(i) for i in range(n)])
    return [np.nonzero(roots == r)[0] for r in np.unique(roots)]


def biorthonormalize(right, left, eigenvalues, ep_tol: float = EP_TOL,
                     cluster_tol: float = CLUSTER_TOL) -> BiorthogonalSpectrum:
    """Rescale paired columns so that <L_i|R_j> = delta_ij.

    Within a degenerate cluster the left block is replaced by L S^{-dagger}
    where S = L^dagger R. condition[j] is |<l_j|r_j>| for unit-norm columns
    (smallest singular value of the block for clusters).
    """
    e = np.asarray(eigenvalues)
    order = sort_order(e)
    e = e[order]
    r = np.array(right, dtype=np.complex128)[:, order]
    l = np.array(left, dtype=np.complex128)[:, order]
    r = _fix_phase(r / np.linalg.norm(r, axis=0))
    l = l / np.linalg.norm(l, axis=0)
    cond = np.empty(len(e))
    for grp in _clusters(e, cluster_tol):
        s = l[:, grp].conj().T @ r[:, grp]
        if len(grp) == 1:
            c = abs(s[0, 0])
        else:
            c = la.svdvals(s).min()
        cond[grp] = c
        if c < ep_tol:
            raise DefectivePairError(
                f"left/right overlap {c:.3e} below EP tolerance {ep_tol:g} near E = {e[grp[0]]:.6g}",
                condition=c)
        if len(grp) == 1:
            l[:, grp[0]] /= np.conj(s[0, 0])
        else:
            l[:, grp] = l[:, grp] @ np.linalg.inv(s).conj().T
    # C order keeps later BLAS products bit-identical to those on cache-decoded copies
    return BiorthogonalSpectrum(eigenvalues=e, right=np.ascontiguousarray(r), left=np.ascontiguousarray(l),
                                pairing=order, condition=cond)


def full_eig(matrix, pair_tol: float = PAIR_TOL, ep_tol: float = EP_TOL) -> BiorthogonalSpectrum:
    a = _as_dense(matrix)
    n = a.shape[0]
    try:
        e, r = la.eig(a)
        el, l = la.eig(a.conj().T)
    except la.LinAlgError as exc:
        raise SpectrumError(f"eigensolver did not converge: {exc}") from exc
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(el))):
        raise SpectrumError("eigensolver returned non-finite eigenvalues")
    scale = max(1.0, np.abs(e).max(initial=0.0))
    cost = np.abs(e[:, None] - el.conj()[None, :])
    rows, cols = linear_sum_assignment(cost)
    miss = cost[rows, cols] > pair_tol * scale
    if np.any(miss):
        raise EPProximityError(
            f"{miss.sum()} of {n} eigenvalues have no conjugate partner in the H^dagger spectrum",
            unmatched=e[rows[miss]])
    spec = biorthonormalize(r[:, rows], l[:, cols], e[rows], ep_tol=ep_tol)
    # pairing maps sorted position j -> column of the H^dagger decomposition
    return BiorthogonalSpectrum(spec.eigenvalues, spec.right, spec.left,
                                pairing=cols[spec.pairing], condition=spec.condition)


def hermitian_eig(matrix) -> BiorthogonalSpectrum:
    """Oracle path for Hermitian input: eigh, left = right."""
    a = _as_dense(matrix)
    e, v = la.eigh(a)
    v = _fix_phase(v.astype(np.complex128))
    return BiorthogonalSpectrum(e.astype(np.complex128), v, v.copy(),
                                pairing=np.arange(len(e)), condition=np.ones(len(e)))


def _values(spec) -> np.ndarray:
    return np.asarray(spec.eigenvalues if isinstance(spec, BiorthogonalSpectrum) else spec)


def _is_real(e, tol, scale):
    return np.abs(np.imag(e)) < tol * scale


def select_ground_state(spec, tol: float = REALITY_TOL) -> int:
    """Lowest Re E; among ties prefer Im E < 0, then smallest |Im E|, then lowest index."""
    e = _values(spec)
    if len(e) == 0:
        raise ValueError("empty spectrum")
    scale = max(1.0, np.abs(e).max())
    cand = np.nonzero(e.real <= e.real.min() + tol * scale)[0]
    neg = cand[e[cand].imag < -tol * scale]
    if len(neg):
        cand = neg
    absim = np.abs(e[cand].imag)
    cand = cand[absim <= absim.min() + tol * scale]
    return int(cand.min())


def _first_excited(e, g0, tol, scale, real_gap=False):
    rest = np.setdiff1d(np.arange(len(e)), [g0])
    if real_gap:
        partner = rest[(np.abs(e[rest] - np.conj(e[g0])) < tol * scale)
                       & (np.abs(e[g0].imag) >= tol * scale)]
        rest = np.setdiff1d(rest, partner[:1])
    if len(rest) == 0:
        return None
    return int(rest[select_ground_state(e[rest], tol)])


@dataclass(frozen=True)
class RealityReport:
    all_real: bool
    ground_real: bool
    first_excited_complex_pair: bool
    ground_real_part_degenerate: bool
    max_imag: float
    tolerance: float


def classify_spectrum_reality(spec, tol: float = REALITY_TOL, ground: int | None = None) -> RealityReport:
    """Reality flags of a spectrum.

    ``ground`` pins the index of the level treated as the ground state (for
    instance the lowest level of the k = 0 sector inside a multi-sector union);
    by default it is chosen by select_ground_state.
    """
    e = _values(spec)
    scale = max(1.0, np.abs(e).max(initial=0.0))
    real = _is_real(e, tol, scale)
    g0 = select_ground_state(e, tol) if ground is None else int(ground)
    ground_real = bool(real[g0])
    partner = None
    degenerate = False
    if not ground_real:
        rest = np.setdiff1d(np.arange(len(e)), [g0])
        close = rest[(np.abs(e[rest].real - e[g0].real) < tol * scale)
                     & (np.sign(e[rest].imag) == -np.sign(e[g0].imag)) & ~real[rest]]
        if len(close):
            degenerate = True
            partner = int(close[np.argmin(np.abs(e[close] - np.conj(e[g0])))])
    excluded = [g0] + ([partner] if partner is not None else [])
    rest = np.setdiff1d(np.arange(len(e)), excluded)
    first_pair = False
    if len(rest):
        e1 = int(rest[select_ground_state(e[rest], tol)])
        if not real[e1]:
            first_pair = bool(np.any(np.abs(e[rest] - np.conj(e[e1])) < max(tol * scale, 1e-6 * abs(e[e1].imag))))
    return RealityReport(
        all_real=bool(real.all()),
        ground_real=ground_real,
        first_excited_complex_pair=first_pair,
        ground_real_part_degenerate=degenerate,
        max_imag=float(np.abs(e.imag).max(initial=0.0)),
        tolerance=tol,
    )


def energy_gap(spec, real_gap: bool = False, tol: float = REALITY_TOL) -> float:
    """|E_1 - E_0| with E_0 from select_ground_state.

    real_gap=True skips the complex-conjugate partner of a complex ground level.
    """
    e = _values(spec)
    if len(e) < 2:
        raise ValueError("energy gap needs at least two levels")
    scale = max(1.0, np.abs(e).max())
    g0 = select_ground_state(e, tol)
    e1 = _first_excited(e, g0, tol, scale, real_gap=real_gap)
    if e1 is None:
        raise ValueError("no level left after excluding the conjugate partner")
    return float(abs(e[e1] - e[g0]))
