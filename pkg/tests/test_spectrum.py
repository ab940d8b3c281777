from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import exact_eigenvalues, kron_pxp, match_error
from yledge.chain import PXPChain
from yledge.hamiltonian import ModelParams, build_pxp_hamiltonian, build_sector_hamiltonian
from yledge.spectrum import (
    DefectivePairError, EPProximityError, SpectrumError, classify_spectrum_reality, eigenvalues_only,
    energy_gap, full_eig, hermitian_eig, select_ground_state, sort_order,
)


def _rational(x):
    return Fraction(float(x)).limit_denominator(1000)


@pytest.mark.parametrize("N,bc", [(3, "periodic"), (4, "periodic"), (5, "periodic"), (6, "periodic"),
                                  (4, "open"), (5, "open")])
@pytest.mark.parametrize("g,m", [(0.3, 0.2), (0.0, -0.5), (1.0, 0.0), (1.5, 0.0), (1.5, 0.75), (0.9, -1.25)])
def test_spectrum_matches_exact_characteristic_polynomial(N, bc, g, m):
    H, _ = kron_pxp(N, bc, g=g, m=m)
    assert np.allclose(H.imag, 0, atol=1e-15)
    Hq = [[_rational(x) for x in row] for row in H.real]
    exact = exact_eigenvalues(Hq)
    e, _ = PXPChain(ModelParams(N=N, bc=bc, g=g, m=m)).eigenvalues()
    assert match_error(exact, e) < 1e-9


@given(st.floats(-2, 2), st.floats(0, 2 * np.pi), st.floats(-2, 2), st.integers(4, 9), st.data())
@settings(max_examples=40, deadline=None)
def test_biorthonormality_and_completeness(g, alpha, m, N, data):
    k = data.draw(st.integers(0, N - 1))
    op = build_sector_hamiltonian(ModelParams(N=N, g=g, alpha=alpha, m=m), k)
    try:
        spec = full_eig(op)
    except SpectrumError:
        return  # sampled within EP tolerance of an exceptional point
    if spec.condition.min() < 1e-6:
        return
    scale = max(1.0, np.abs(spec.eigenvalues).max())
    rr, lr = spec.residuals(op)
    assert rr < 1e-10 * scale and lr < 1e-10 * scale / spec.condition.min()
    assert spec.biorthogonality_error() < 1e-8 / spec.condition.min()
    assert spec.completeness_error() < 1e-8 / spec.condition.min() ** 2
    assert np.allclose(np.linalg.norm(spec.right, axis=0), 1)


def test_hermitian_point_agrees_with_eigh():
    op = build_pxp_hamiltonian(ModelParams(N=10, g=0.0, m=-0.3))
    a, b = full_eig(op), hermitian_eig(op)
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
    assert np.abs(a.eigenvalues.imag).max() < 1e-12
    # left = right up to the gauge for non-degenerate levels
    s = np.abs(np.einsum("ij,ij->j", a.left.conj(), b.right))
    assert np.all(s[a.condition > 0.999] > 0.999)


@given(st.floats(-2, 2), st.floats(0, 2 * np.pi), st.floats(-2, 2), st.integers(3, 10))
@settings(max_examples=30, deadline=None)
def test_g_sign_invariance(g, alpha, m, N):
    a = eigenvalues_only(build_pxp_hamiltonian(ModelParams(N=N, g=g, alpha=alpha, m=m)))
    b = eigenvalues_only(build_pxp_hamiltonian(ModelParams(N=N, g=-g, alpha=alpha, m=m)))
    assert match_error(a, b) < 1e-7 * max(1, np.abs(a).max())


@given(st.floats(-3, 3), st.floats(-2, 2), st.integers(3, 10))
@settings(max_examples=30, deadline=None)
def test_conjugation_closure_at_quarter_phase(g, m, N):
    e, _ = PXPChain(ModelParams(N=N, g=g, m=m)).eigenvalues()
    assert match_error(e, e.conj()) < 1e-7 * max(1, np.abs(e).max())


def test_mirror_symmetry_beyond_unit_ratio():
    # for |g| > h_x the coupling is imaginary, so the spectrum at -m is minus the conjugate at m
    a, _ = PXPChain(ModelParams(N=10, g=1.5, m=0.8)).eigenvalues()
    b, _ = PXPChain(ModelParams(N=10, g=1.5, m=-0.8)).eigenvalues()
    assert match_error(a, -b.conj()) < 1e-10


def test_exceptional_point_is_rejected():
    jordan = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises((DefectivePairError, EPProximityError)):
        full_eig(jordan)
    # eigenvalues alone remain available at the EP
    assert np.allclose(eigenvalues_only(jordan), 0)


def test_ground_state_selection_rules():
    e = np.array([1.0, -1 + 0.5j, -1 - 0.5j, 0.3])
    assert select_ground_state(e) == 2
    assert select_ground_state(np.array([2.0, -3.0, -3.0])) == 1
    with pytest.raises(ValueError):
        select_ground_state(np.array([]))


def test_gap_conventions():
    e = np.array([-1 + 0.5j, -1 - 0.5j, 0.5])
    assert energy_gap(e) == pytest.approx(1.0)
    assert energy_gap(e, real_gap=True) == pytest.approx(abs(0.5 - (-1 - 0.5j)))


def test_reality_flags():
    real = classify_spectrum_reality(np.array([-2.0, -1.0, 0.5]))
    assert real.all_real and real.ground_real
    br1 = classify_spectrum_reality(np.array([-2.0, -1 + 0.2j, -1 - 0.2j, 3.0]))
    assert not br1.all_real and br1.ground_real and br1.first_excited_complex_pair
    brf2 = classify_spectrum_reality(np.array([-2 + 0.1j, -2 - 0.1j, 1.0]))
    assert not brf2.ground_real and brf2.ground_real_part_degenerate
    pinned = classify_spectrum_reality(np.array([-2 + 0.1j, -2 - 0.1j, -1.0]), ground=2)
    assert pinned.ground_real


def test_sort_order_is_deterministic_under_permutation(rng):
    e = rng.normal(size=30) + 1j * rng.choice([-1, 0, 1], size=30)
    e[5] = e[7]
    order = sort_order(e)
    perm = rng.permutation(30)
    assert np.array_equal(e[order], e[perm][sort_order(e[perm])])
