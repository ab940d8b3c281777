import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yledge.chain import PXPChain
from yledge.criticality import (
    BR_1, BR_F1, BR_F2, PT_CONFINED, PT_DECONFINED, RL, RR, BisectionError, FitError, ScanBoundaryError,
    bisect_predicate, classify_phase, deconfinement_boundary, detect_derivative_jump, echo_change_point,
    fidelity_details, fidelity_susceptibility, find_pseudocritical, fit_scaling, ground_ep,
    named_transitions, refine_peak, scan_phase_diagram,
)
from yledge.dynamics import ComplexSpectrumError
from yledge.hamiltonian import ModelParams

sizes = np.array([8.0, 10, 12, 14, 16, 18, 20])


@given(st.floats(0.3, 3.0), st.floats(-5, 5).filter(lambda a: abs(a) > 0.05))
@settings(max_examples=40, deadline=None)
def test_power_law_recovery(p, a):
    fit = fit_scaling(sizes, a * sizes**p, "power")
    assert fit.exponent == pytest.approx(p, abs=1e-8)
    assert fit.amplitude == pytest.approx(a, rel=1e-8)
    assert fit.residual_rms < 1e-10 * abs(a) * sizes.max() ** p


@given(st.floats(0.5, 3.0), st.floats(-5, 5).filter(lambda a: abs(a) > 0.2), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_shifted_power_recovery(p, a, off):
    fit = fit_scaling(sizes, off + a * sizes ** (-p), "shifted")
    assert fit.exponent == pytest.approx(p, abs=1e-8)
    assert fit.offset == pytest.approx(off, abs=1e-8)
    assert fit.amplitude == pytest.approx(a, rel=1e-7)


@given(st.floats(0.05, 2.0), st.floats(-2, 2))
@settings(max_examples=30, deadline=None)
def test_log_law_recovery(c, b):
    fit = fit_scaling(sizes, c / 3 * np.log(sizes) + b, "log_law")
    assert fit.exponent == pytest.approx(c, abs=1e-8)
    assert fit.offset == pytest.approx(b, abs=1e-8)


def test_fit_input_errors():
    with pytest.raises(ValueError):
        fit_scaling([1, 2], [1, 2], "power")
    with pytest.raises(ValueError):
        fit_scaling([0, 1, 2], [1, 2, 3], "log")
    with pytest.raises(ValueError):
        fit_scaling([1, 2, 3], [1, -2, 3], "power")
    with pytest.raises(ValueError):
        fit_scaling([1, 2, 3], [1, 2, 3], "cubic")
    with pytest.raises(FitError):
        fit_scaling([2, 2, 2], [1, 2, 3], "log")


def test_fit_stderr_reflects_noise(rng):
    y = 2.0 * sizes**1.5 * (1 + 0.01 * rng.normal(size=len(sizes)))
    fit = fit_scaling(sizes, y, "power")
    assert 0 < fit.stderr["exponent"] < 0.05
    assert abs(fit.exponent - 1.5) < 5 * fit.stderr["exponent"]


def test_peak_finding():
    m = np.linspace(-1, 0, 11)
    pk = find_pseudocritical(m, -(m + 0.43) ** 2)
    assert pk.location == pytest.approx(-0.43, abs=1e-12)
    with pytest.raises(ScanBoundaryError):
        find_pseudocritical(m, m)
    pk = refine_peak(lambda x: np.exp(-(x - 0.3137) ** 2) * np.cos(x), np.linspace(-1, 1, 9))
    grad = -2 * (pk.location - 0.3137) * np.cos(pk.location) - np.sin(pk.location)
    assert abs(grad) < 1e-6


def _fidelity_by_hand(p, dm, kind):
    a, b = PXPChain(p).ground_state(), PXPChain(p.replace(m=p.m + dm)).ground_state()
    if kind == RR:
        f = abs(np.vdot(a.right, b.right)) / (np.linalg.norm(a.right) * np.linalg.norm(b.right))
    else:
        f = np.sqrt(np.vdot(b.left, a.right) * np.vdot(a.left, b.right)
                    / (np.vdot(a.left, a.right) * np.vdot(b.left, b.right)))
    return float(np.real(-2 * np.log(f)) / dm**2)


@pytest.mark.parametrize("kind,alpha", [(RR, 0.0), (RL, np.pi / 2), (RR, np.pi / 2)])
def test_fidelity_matches_direct_overlaps(kind, alpha):
    p = ModelParams(N=10, g=0.5, alpha=alpha, m=-0.5)
    chi = fidelity_susceptibility(p, 1e-3, kind)
    assert chi == pytest.approx(_fidelity_by_hand(p, 1e-3, kind), rel=1e-6)
    assert chi > 0


def test_fidelity_kinds_coincide_when_hermitian():
    p = ModelParams(N=10, g=0.0, m=-0.6)
    assert fidelity_susceptibility(p, 1e-4, RR) == pytest.approx(fidelity_susceptibility(p, 1e-4, RL), rel=1e-6)


def test_rl_fidelity_needs_real_spectrum():
    with pytest.raises(ComplexSpectrumError):
        fidelity_details(ModelParams(N=8, g=1.5, m=0.5), kind=RL)


def test_deconfinement_boundary_values():
    assert deconfinement_boundary(ModelParams(g=0.0)) == pytest.approx(-0.655)
    assert deconfinement_boundary(ModelParams(g=0.6)) == pytest.approx(-0.655 * 0.8)
    assert deconfinement_boundary(ModelParams(g=1.5)) is None


@pytest.mark.parametrize("g,m,label", [
    (0.1, -5.0, PT_DECONFINED), (0.1, 5.0, PT_CONFINED), (0.5, -0.7, PT_DECONFINED),
    (1.5, -3.0, PT_DECONFINED), (1.5, -1.9, BR_F1), (1.5, -1.0, BR_1), (1.5, 1.0, BR_F2),
    (1.5, 3.0, PT_CONFINED),
])
def test_phase_labels(g, m, label):
    assert classify_phase(ModelParams(N=12, g=g, m=m)).label == label


def test_exceptional_point_flag():
    lab = classify_phase(ModelParams(N=8, g=1.0, m=0.0))
    assert lab.ep and lab.boundary


def test_bisection():
    assert bisect_predicate(lambda x: x > 0.123, 0, 1, 1e-10) == pytest.approx(0.123, abs=1e-10)
    with pytest.raises(BisectionError):
        bisect_predicate(lambda x: True, 0, 1)


def test_ground_ep_matches_reality_change():
    m4 = ground_ep(ModelParams(N=8, g=1.5), 1.0, 3.0, tol=1e-10)
    assert m4 == pytest.approx(2.084543, abs=2e-6)
    e_in, _ = PXPChain(ModelParams(N=8, g=1.5, m=m4 - 1e-6)).eigenvalues([0])
    e_out, _ = PXPChain(ModelParams(N=8, g=1.5, m=m4 + 1e-6)).eigenvalues([0])
    assert abs(e_in[0].imag) > 1e-6 and abs(e_out[0].imag) < 1e-8


def test_echo_change_point_near_ground_ep():
    p = ModelParams(N=8, g=1.5)
    m_echo = echo_change_point(p, 1.0, 3.0)
    assert abs(m_echo - ground_ep(p, 1.0, 3.0)) < 0.02
    with pytest.raises(ScanBoundaryError):
        echo_change_point(p, 1.0, 1.5)


def test_derivative_jump_detection(rng):
    m = np.linspace(-1, 1, 41)
    mid, d, loc, jump, noise, ok = detect_derivative_jump(m, np.abs(m) + 1e-4 * rng.normal(size=41))
    assert ok and abs(loc) < 0.06 and jump > 1.5
    *_, ok = detect_derivative_jump(m, m**2)
    assert not ok


def test_named_transitions():
    trans = [(-2.1, PT_DECONFINED, BR_F1), (-1.6, BR_F1, BR_1), (0.0, BR_1, BR_F2), (2.1, BR_F2, PT_CONFINED)]
    assert named_transitions(trans) == {"m_c1": -2.1, "m_c2": -1.6, "m_c3": 0.0, "m_c4": 2.1}


def test_phase_diagram_budget_and_boundaries():
    pd = scan_phase_diagram([0.5], np.linspace(-1.0, 0.0, 5), 8, max_points=3)
    assert not pd.complete and pd.labels[0][4] is None
    pd = scan_phase_diagram([0.5], np.array([-0.8, -0.5]), 8, m_tol=1e-6)
    (mc, left, right), = pd.transitions[0.5]
    assert (left, right) == (PT_DECONFINED, PT_CONFINED)
    assert mc == pytest.approx(deconfinement_boundary(ModelParams(g=0.5)), abs=1e-6)
    assert {"g", "m", "label", "max_imag", "gap"} <= set(pd.points()[0])
