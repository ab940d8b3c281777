"""Rydberg-blockaded Hilbert space and its translation-momentum sectors.

Basis words are unsigned integers with site 0 at the least significant bit;
bit j set means site j is excited.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

PERIODIC = "periodic"
OPEN = "open"

DIMENSION_BUDGET = 2**20


class BasisError(ValueError):
    pass


def translate(words, N: int, shift: int = 1):
    """Cyclic translation T^shift moving the occupation of site j to site j+shift."""
    shift %= N
    if shift == 0:
        return words
    mask = (1 << N) - 1
    return ((words << shift) & mask) | (words >> (N - shift))


def is_blockade_legal(words, N: int, bc: str = PERIODIC):
    words = np.asarray(words, dtype=np.int64)
    ok = (words & (words >> 1)) == 0
    if bc == PERIODIC:
        ok &= ~(((words & 1) == 1) & (((words >> (N - 1)) & 1) == 1))
    return ok


def expected_dimension(N: int, bc: str = PERIODIC) -> int:
    """Lucas number L_N (ring) or Fibonacci F_{N+2} (open chain)."""
    if bc == OPEN:
        a, b = 1, 2  # F_2, F_3
        for _ in range(N - 1):
            a, b = b, a + b
        return b if N >= 1 else 1
    a, b = 2, 1  # L_0, L_1
    for _ in range(N - 1):
        a, b = b, a + b
    return b


@dataclass(frozen=True, eq=False)
class ConstrainedBasis:
    N: int
    bc: str
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, words):
        """Ordinal(s) of basis word(s); raises KeyError for illegal words."""
        words = np.asarray(words, dtype=np.int64)
        pos = np.searchsorted(self.states, words)
        pos = np.clip(pos, 0, self.dim - 1)
        if not np.all(self.states[pos] == words):
            raise KeyError("word not in constrained basis")
        return pos if pos.ndim else int(pos)

    def occupations(self) -> np.ndarray:
        """(dim, N) array of 0/1 site occupations."""
        sites = np.arange(self.N, dtype=np.int64)
        return ((self.states[:, None] >> sites[None, :]) & 1).astype(np.float64)

    def popcount(self) -> np.ndarray:
        return self.occupations().sum(axis=1)


def _open_chain_words(N: int) -> np.ndarray:
    # words on sites 0..n-1: prev(n) with bit n-1 clear, plus prev(n-2) with bit n-1 set
    prev2 = np.array([0], dtype=np.int64)
    prev1 = np.array([0, 1], dtype=np.int64)
    if N == 1:
        return prev1
    for n in range(2, N + 1):
        cur = np.concatenate([prev1, prev2 | (1 << (n - 1))])
        prev2, prev1 = prev1, cur
    return prev1


@lru_cache(maxsize=32)
def enumerate_basis(N: int, bc: str = PERIODIC, budget: int = DIMENSION_BUDGET) -> ConstrainedBasis:
    if bc not in (PERIODIC, OPEN):
        raise BasisError(f"unknown boundary condition {bc!r}")
    if N < 1:
        raise BasisError("N must be a positive integer")
    if N > 62:
        raise BasisError("N too large for 64-bit words")
    if expected_dimension(N, bc) > budget:
        raise BasisError(
            f"dimension {expected_dimension(N, bc)} exceeds budget {budget}")
    words = _open_chain_words(N)
    if bc == PERIODIC:
        words = words[is_blockade_legal(words, N, PERIODIC)]
    states = np.sort(words)
    states.setflags(write=False)
    return ConstrainedBasis(N=N, bc=bc, states=states)


@dataclass(frozen=True, eq=False)
class Orbits:
    """Translation-orbit data for every word of a periodic basis.

    rep_of[i] is the basis ordinal of the orbit representative of word i and
    shift_of[i] the r in [0, R) with T^r(rep) = word.
    """
    reps: np.ndarray
    periods: np.ndarray
    rep_of: np.ndarray
    shift_of: np.ndarray


@lru_cache(maxsize=32)
def translation_orbits(basis: ConstrainedBasis) -> Orbits:
    N, states = basis.N, basis.states
    rep = states.copy()
    shift_to_rep = np.zeros(len(states), dtype=np.int64)  # T^s(word) = rep
    period = np.full(len(states), N, dtype=np.int64)
    w = states
    for r in range(1, N):
        w = translate(w, N)
        smaller = w < rep
        rep = np.where(smaller, w, rep)
        shift_to_rep = np.where(smaller, r, shift_to_rep)
        back = (w == states) & (period == N)
        period[back] = r
    rep_idx = np.searchsorted(states, rep)
    shift_of = (-shift_to_rep) % period
    reps = np.unique(rep_idx)
    return Orbits(reps=states[reps], periods=period[reps], rep_of=rep_idx,
                  shift_of=shift_of)


@dataclass(frozen=True, eq=False)
class MomentumSector:
    N: int
    k_index: int
    reps: np.ndarray = field(repr=False)
    periods: np.ndarray = field(repr=False)

    @property
    def k(self) -> float:
        return 2 * np.pi * self.k_index / self.N

    @property
    def dim(self) -> int:
        return len(self.reps)


def build_momentum_sectors(basis: ConstrainedBasis, k_list=None) -> list[MomentumSector]:
    if basis.bc != PERIODIC:
        raise BasisError("momentum sectors require periodic boundary conditions")
    N = basis.N
    if k_list is None:
        k_list = range(N)
    orbits = translation_orbits(basis)
    sectors = []
    for k in k_list:
        k = int(k)
        if not 0 <= k < N:
            raise BasisError(f"k_index {k} outside [0, {N})")
        keep = (k * orbits.periods) % N == 0
        sectors.append(MomentumSector(N=N, k_index=k, reps=orbits.reps[keep],
                                      periods=orbits.periods[keep]))
    return sectors


@lru_cache(maxsize=256)
def _lift_data(basis: ConstrainedBasis, k_index: int):
    """Column index and amplitude of each full-basis word in the sector-k isometry."""
    orbits = translation_orbits(basis)
    N = basis.N
    period = orbits.periods[np.searchsorted(orbits.reps, basis.states[orbits.rep_of])]
    allowed = (k_index * period) % N == 0
    sector = build_momentum_sectors(basis, [k_index])[0]
    col = np.searchsorted(sector.reps, basis.states[orbits.rep_of])
    phase = np.exp(-2j * np.pi * ((k_index * orbits.shift_of) % N) / N)
    phase.real[np.abs(phase.real) < 1e-15] = 0.0
    phase.imag[np.abs(phase.imag) < 1e-15] = 0.0
    amp = phase / np.sqrt(period)
    rows = np.nonzero(allowed)[0]
    return rows, col[allowed], amp[allowed], sector.dim


def lift_operator(basis: ConstrainedBasis, sector: MomentumSector):
    """Sparse (full dim x sector dim) isometry with columns the momentum states."""
    import scipy.sparse as sp

    rows, cols, amps, dim = _lift_data(basis, sector.k_index)
    return sp.csr_matrix((amps, (rows, cols)), shape=(basis.dim, dim))


def lift_to_full(v, sector: MomentumSector, basis: ConstrainedBasis) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != sector.dim or sector.N != basis.N:
        raise BasisError(f"vector length {v.shape[0]} does not match sector dim {sector.dim}")
    rows, cols, amps, _ = _lift_data(basis, sector.k_index)
    out = np.zeros((basis.dim,) + v.shape[1:], dtype=np.complex128)
    out[rows] = (amps.reshape((-1,) + (1,) * (v.ndim - 1))) * v[cols]
    return out


def project_to_sector(w, sector: MomentumSector, basis: ConstrainedBasis) -> np.ndarray:
    """Adjoint of lift_to_full: sector amplitudes of a full-basis vector."""
    w = np.asarray(w)
    if w.shape[0] != basis.dim:
        raise BasisError("vector length does not match basis dim")
    rows, cols, amps, dim = _lift_data(basis, sector.k_index)
    out = np.zeros((dim,) + w.shape[1:], dtype=np.complex128)
    np.add.at(out, cols, np.conj(amps).reshape((-1,) + (1,) * (w.ndim - 1)) * w[rows])
    return out
