"""Per-parameter-point driver: sector blocks, cached spectra, lifted eigenstates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import PERIODIC, enumerate_basis, build_momentum_sectors, lift_to_full, project_to_sector
from .hamiltonian import ModelParams, build_pxp_hamiltonian, build_sector_hamiltonian
from .spectrum import (
    BiorthogonalSpectrum, DefectivePairError, REALITY_TOL, eigenvalues_only, full_eig,
    select_ground_state, sort_order,
)

GROUND_SECTORS = (0,)


@dataclass(frozen=True, eq=False)
class EigenPair:
    energy: complex
    k_index: int | None
    index: int
    right: np.ndarray  # full-basis amplitudes
    left: np.ndarray
    spectrum: BiorthogonalSpectrum


class PXPChain:
    """Detuned PXP model at one parameter point.

    Periodic chains are handled sector by sector (k_index = 0..N-1); open
    chains use the full constrained basis with k_index None.
    """

    def __init__(self, params: ModelParams, cache=None):
        self.params = params
        self.basis = enumerate_basis(params.N, params.bc)
        self.cache = cache
        self._spectra = {}
        self._matrices = {}

    @property
    def periodic(self) -> bool:
        return self.params.bc == PERIODIC

    def sector_keys(self, ks=None):
        if not self.periodic:
            return [None]
        return list(range(self.params.N)) if ks is None else [int(k) for k in ks]

    def matrix(self, k=None):
        if k not in self._matrices:
            if k is None:
                self._matrices[k] = build_pxp_hamiltonian(self.params, self.basis)
            else:
                self._matrices[k] = build_sector_hamiltonian(self.params, k, self.basis)
        return self._matrices[k]

    def spectrum(self, k=None) -> BiorthogonalSpectrum:
        if k not in self._spectra:
            spec = None
            if self.cache is not None:
                spec = self.cache.load(self.params, k)
            if spec is None:
                spec = full_eig(self.matrix(k))
                if self.cache is not None:
                    self.cache.store(self.params, k, spec)
            self._spectra[k] = spec
        return self._spectra[k]

    def eigenvalues(self, ks=None, vectors: bool = False):
        """Sorted union of sector eigenvalues and their k labels."""
        vals, labels = [], []
        for k in self.sector_keys(ks):
            e = self.spectrum(k).eigenvalues if vectors else eigenvalues_only(self.matrix(k))
            vals.append(e)
            labels.append(np.full(len(e), -1 if k is None else k))
        vals, labels = np.concatenate(vals), np.concatenate(labels)
        order = sort_order(vals)
        return vals[order], labels[order]

    def lift(self, v, k):
        if k is None:
            return np.asarray(v, dtype=np.complex128)
        sector = build_momentum_sectors(self.basis, [k])[0]
        return lift_to_full(v, sector, self.basis)

    def project(self, w, k):
        if k is None:
            return np.asarray(w, dtype=np.complex128)
        sector = build_momentum_sectors(self.basis, [k])[0]
        return project_to_sector(w, sector, self.basis)

    def ground_state(self, ks=GROUND_SECTORS, tol: float = REALITY_TOL) -> EigenPair:
        """Ground pair over the requested sectors (lowest Re E, then Im E < 0)."""
        keys = self.sector_keys(ks)
        cand = []
        for k in keys:
            spec = self.spectrum(k)
            j = select_ground_state(spec, tol)
            cand.append((spec.eigenvalues[j], k, j))
        best = select_ground_state(np.array([c[0] for c in cand]), tol)
        e, k, j = cand[best]
        spec = self.spectrum(k)
        return EigenPair(energy=complex(e), k_index=k, index=j,
                         right=self.lift(spec.right[:, j], k), left=self.lift(spec.left[:, j], k),
                         spectrum=spec)

    def eigenpair(self, k, j) -> EigenPair:
        spec = self.spectrum(k)
        return EigenPair(energy=complex(spec.eigenvalues[j]), k_index=k, index=j,
                         right=self.lift(spec.right[:, j], k), left=self.lift(spec.left[:, j], k),
                         spectrum=spec)

    def propagate(self, w, t, dagger: bool = False, ks=None, weight_tol: float = 1e-8):
        """e^{-iHt} w (or e^{-iH^dag t} w) via spectral sums in every sector.

        Sectors whose projection of ``w`` vanishes are skipped; ``ks`` restricts
        the sectors considered (the caller guarantees w has no weight elsewhere).
        An array ``t`` gives one output column per time.
        """
        from .dynamics import evolve

        w = np.asarray(w, dtype=np.complex128)
        out = np.zeros(w.shape + np.shape(t), dtype=np.complex128)
        for k in self.sector_keys(ks):
            v = self.project(w, k)
            if not np.any(np.abs(v) > 1e-14 * max(1.0, np.abs(w).max())):
                continue
            out += self.lift(evolve(v, self.spectrum(k), t, dagger=dagger, weight_tol=weight_tol), k)
        return out
