"""Matrix representations of the detuned PXP model and its parent Ising chain.

Constrained model (sites j, neighbours taken cyclically for a ring)::

    H = h_x sum_j P_{j-1} X_j P_{j+1} + g e^{i alpha} sum_j P_{j-1} Y_j P_{j+1}
        + 2m sum_j P_{j-1} n_j P_{j+1}

with P = |0><0|, n = |1><1| and the fixed convention <1|Y|0> = i, <0|Y|1> = -i.
In the occupation basis a flip 0 -> 1 carries h_x + i g e^{i alpha} and a flip
1 -> 0 carries h_x - i g e^{i alpha}.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .basis import (
    OPEN, PERIODIC, BasisError, ConstrainedBasis, MomentumSector, enumerate_basis,
    lift_operator,
)

DETUNED_PXP = "detuned_pxp"
ISING_PARENT = "ising_parent"
TRANSFORMED_ISING = "transformed_ising"
MODELS = (DETUNED_PXP, ISING_PARENT, TRANSFORMED_ISING)

ISING_MAX_N = 14


class UnsupportedRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    model: str = DETUNED_PXP
    N: int = 8
    bc: str = PERIODIC
    h_x: float = 1.0
    g: float = 0.0
    alpha: float = np.pi / 2
    m: float = 0.0
    J: float = 1.0
    h_z: float = 0.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.bc not in (PERIODIC, OPEN):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.model == DETUNED_PXP and not self.h_x > 0:
            raise ValueError("h_x must be positive for the constrained model")
        alpha = float(self.alpha) % (2 * np.pi)
        object.__setattr__(self, "alpha", alpha)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    @property
    def phase(self) -> complex:
        """e^{i alpha}, exact on the axes so alpha = pi/2 gives a real matrix."""
        c, s = np.cos(self.alpha), np.sin(self.alpha)
        c = 0.0 if abs(c) < 1e-15 else c
        s = 0.0 if abs(s) < 1e-15 else s
        return complex(c, s)

    @property
    def raise_amplitude(self) -> complex:
        """Matrix element <..1_j..|H|..0_j..> of an allowed flip."""
        return self.h_x + 1j * self.g * self.phase

    @property
    def lower_amplitude(self) -> complex:
        return self.h_x - 1j * self.g * self.phase

    @classmethod
    def from_ising(cls, N, J, h_z, h_x=1.0, g=0.0, alpha=np.pi / 2, bc=PERIODIC):
        """Constrained reduction of the parent chain, using 2m = h_z - 2J."""
        return cls(DETUNED_PXP, N=N, bc=bc, h_x=h_x, g=g, alpha=alpha,
                   m=(h_z - 2 * J) / 2)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: object  # scipy sparse or ndarray
    basis_tag: str

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dense(self) -> np.ndarray:
        if sp.issparse(self.entries):
            return self.entries.toarray()
        return np.asarray(self.entries)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        a = self.dense()
        return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol * max(1.0, np.abs(a).max(initial=0.0)))

    def coo_entries(self):
        """(rows, cols, values) with explicit zeros removed, row-major order."""
        m = sp.coo_matrix(self.entries)
        m.sum_duplicates()
        keep = m.data != 0
        order = np.lexsort((m.col[keep], m.row[keep]))
        return m.row[keep][order], m.col[keep][order], m.data[keep][order]


def _basis_tag(N, bc, k=None):
    tag = f"pxp:N={N}:bc={bc}"
    return tag if k is None else f"{tag}:k={k}"


@lru_cache(maxsize=64)
def _flip_terms(basis: ConstrainedBasis):
    """Allowed single-site flips: (source ordinal, target ordinal, raises?)."""
    N, states = basis.N, basis.states
    src, dst, up = [], [], []
    for j in range(N):
        left, right = j - 1, j + 1
        free = np.ones(len(states), dtype=bool)
        if basis.bc == PERIODIC:
            left %= N
            right %= N
        if 0 <= left < N and left != j:
            free &= ((states >> left) & 1) == 0
        if 0 <= right < N and right != j:
            free &= ((states >> right) & 1) == 0
        idx = np.nonzero(free)[0]
        targets = states[idx] ^ (1 << j)
        if basis.bc == PERIODIC and N == 1:
            idx = idx[targets == 0]
            targets = targets[targets == 0]
        src.append(idx)
        dst.append(basis.index(targets))
        up.append(((states[idx] >> j) & 1) == 0)
    return np.concatenate(src), np.concatenate(dst), np.concatenate(up)


def _pxp_sparse(params: ModelParams, basis: ConstrainedBasis):
    src, dst, up = _flip_terms(basis)
    vals = np.where(up, params.raise_amplitude, params.lower_amplitude)
    diag = 2 * params.m * basis.popcount()
    n = basis.dim
    rows = np.concatenate([dst, np.arange(n)])
    cols = np.concatenate([src, np.arange(n)])
    data = np.concatenate([vals, diag.astype(np.complex128)])
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def build_pxp_hamiltonian(params: ModelParams, basis: ConstrainedBasis | None = None) -> OperatorMatrix:
    if params.model != DETUNED_PXP:
        raise ValueError("build_pxp_hamiltonian needs model='detuned_pxp'")
    if basis is None:
        basis = enumerate_basis(params.N, params.bc)
    if basis.N != params.N or basis.bc != params.bc:
        raise BasisError(f"basis (N={basis.N}, {basis.bc}) does not match params (N={params.N}, {params.bc})")
    return OperatorMatrix(_pxp_sparse(params, basis), _basis_tag(basis.N, basis.bc))


@lru_cache(maxsize=512)
def _sector_parts(basis: ConstrainedBasis, k_index: int, raise_amp: complex, lower_amp: complex):
    """Dense kinetic block and diagonal popcount of one momentum sector."""
    from .basis import build_momentum_sectors

    sector = build_momentum_sectors(basis, [k_index])[0]
    lift = lift_operator(basis, sector)
    src, dst, up = _flip_terms(basis)
    vals = np.where(up, raise_amp, lower_amp)
    kin = sp.csr_matrix((vals, (dst, src)), shape=(basis.dim, basis.dim))
    block = (lift.conj().T @ kin @ lift).toarray()
    pop = np.array([bin(int(w)).count("1") for w in sector.reps], dtype=np.float64)
    if np.all(np.abs(block.imag) == 0):
        block = block.real.copy()
    block.setflags(write=False)
    return block, pop


def build_sector_hamiltonian(params: ModelParams, sector: MomentumSector | int,
                             basis: ConstrainedBasis | None = None) -> OperatorMatrix:
    """Dense block of the detuned PXP Hamiltonian in one momentum sector.

    The block is the compression L^dagger H L of the full-basis matrix onto the
    isometry L whose columns are the normalized momentum states. It is stored
    as a real array when every element is real (k = 0, pi at alpha = pi/2).
    """
    if params.model != DETUNED_PXP:
        raise ValueError("sector blocks are only defined for the detuned PXP model")
    if params.bc != PERIODIC:
        raise BasisError("momentum sectors require periodic boundary conditions")
    if basis is None:
        basis = enumerate_basis(params.N, params.bc)
    k_index = sector if isinstance(sector, (int, np.integer)) else sector.k_index
    if not 0 <= k_index < params.N:
        raise BasisError(f"k_index {k_index} outside [0, {params.N})")
    block, pop = _sector_parts(basis, int(k_index), complex(params.raise_amplitude),
                               complex(params.lower_amplitude))
    h = block + np.diag(2 * params.m * pop)
    return OperatorMatrix(h, _basis_tag(basis.N, basis.bc, int(k_index)))


def _pauli_chain(N: int, bc: str):
    words = np.arange(2**N, dtype=np.int64)
    occ = (words[:, None] >> np.arange(N)[None, :]) & 1
    z = 2.0 * occ - 1.0
    return words, occ, z


def build_ising_hamiltonian(params: ModelParams, N: int | None = None) -> OperatorMatrix:
    """Parent non-Hermitian Ising chain on the unconstrained 2^N space.

    ising_parent:      J zz + h_x X + g e^{i alpha} Y + h_z Z
    transformed_ising: J zz + sqrt(h_x^2 - g^2) X + h_z Z  (complex root for |g| > h_x)
    Z = +1 on an excited (bit 1) site; Y follows the constrained-model convention.
    """
    if params.model not in (ISING_PARENT, TRANSFORMED_ISING):
        raise ValueError("build_ising_hamiltonian needs an Ising model")
    N = params.N if N is None else N
    if N < 1 or N > ISING_MAX_N:
        raise BasisError(f"N={N} outside the unconstrained budget 1..{ISING_MAX_N}")
    words, occ, z = _pauli_chain(N, params.bc)
    dim = 2**N
    bonds = [(j, (j + 1) % N) for j in range(N if params.bc == PERIODIC else N - 1)]
    if N == 1:
        bonds = bonds if params.bc == PERIODIC else []
    diag = np.zeros(dim)
    for a, b in bonds:
        diag += params.J * z[:, a] * z[:, b]
    diag += params.h_z * z.sum(axis=1)
    if params.model == ISING_PARENT:
        up = params.raise_amplitude
        down = params.lower_amplitude
    else:
        root = np.sqrt(complex(params.h_x**2 - params.g**2))
        up = down = root
    rows, cols, data = [np.arange(dim)], [np.arange(dim)], [diag.astype(np.complex128)]
    for j in range(N):
        target = words ^ (1 << j)
        rows.append(target)
        cols.append(words)
        data.append(np.where(occ[:, j] == 0, up, down))
    h = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim))
    return OperatorMatrix(h, f"ising:N={N}:bc={params.bc}")


def similarity_map(params: ModelParams) -> ModelParams:
    """Hermitian, isospectral parameter point of the alpha = pi/2 constrained model.

    The flip amplitudes (h_x - g) and (h_x + g) are balanced by a diagonal
    similarity, leaving a Hermitian flip amplitude sqrt(h_x^2 - g^2).
    """
    if params.model != DETUNED_PXP:
        raise ValueError("similarity_map applies to the detuned PXP model")
    if not np.isclose(params.alpha, np.pi / 2, rtol=0, atol=1e-12):
        raise UnsupportedRangeError("similarity_map requires alpha = pi/2")
    if abs(params.g) >= params.h_x:
        raise UnsupportedRangeError(
            f"|g| = {abs(params.g)} >= h_x: sqrt(h_x^2 - g^2) is not positive real")
    if params.g == 0:
        return params
    return params.replace(h_x=float(np.sqrt(params.h_x**2 - params.g**2)), g=0.0)


def similarity_diagonal(params: ModelParams, basis: ConstrainedBasis) -> np.ndarray:
    """Diagonal D with D^{-1} H D = sqrt(ab) (P X P) + detuning for the alpha = pi/2 model.

    a, b are the raise and lower amplitudes; D_w = (a/b)^{n_w/2} with n_w the
    excitation count of word w. Complex for |g| > h_x.
    """
    a, b = params.raise_amplitude, params.lower_amplitude
    ratio = np.sqrt(complex(a) / complex(b))
    return ratio ** basis.popcount()


def write_sparse_text(op: OperatorMatrix, fh) -> None:
    """Header 'dim nnz', then one 'row col re im' line per nonzero."""
    rows, cols, vals = op.coo_entries()
    fh.write(f"{op.dim} {len(vals)}\n")
    for r, c, v in zip(rows, cols, vals):
        fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def read_sparse_text(fh) -> sp.csr_matrix:
    lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    dim, nnz = (int(x) for x in lines[0].split())
    if len(lines) - 1 != nnz:
        raise ValueError(f"expected {nnz} entries, found {len(lines) - 1}")
    arr = np.array([ln.split() for ln in lines[1:]], dtype=float).reshape(-1, 4)
    return sp.csr_matrix((arr[:, 2] + 1j * arr[:, 3], (arr[:, 0].astype(int), arr[:, 1].astype(int))),
                         shape=(dim, dim))
