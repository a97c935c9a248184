from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import dense_oracle as do
from hexmpo.circuits import CircuitSpec
from hexmpo.exact import (
    StateVector,
    TooLargeError,
    apply_pauli,
    double_slit,
    double_slit_table,
    echo_value,
    evolve,
    evolve_inverse,
    expect_pauli,
    expect_z_after,
    magnetization,
    z_trace,
)
from hexmpo.pauli import PauliString

# C_{source, detector}(D) on the two-hexagon lattice, D = 0..10, computed with the
# vector oracle in dense_oracle.py
DOUBLE_SLIT_FLUX0 = [1.0, 0.5, 0.603553390593, 0.682903814417, 0.692064935839, 0.654887515887,
                     0.626617053924, 0.624289483586, 0.51757433908, 0.413562852183, 0.281773290268]
DOUBLE_SLIT_FLUXPI = [1.0, 0.5, 0.603553390593, 0.682903814417, 0.692064935839, 0.654887515887,
                      0.635782210727, 0.677270776231, 0.617865008443, 0.552225307766, 0.501283498445]
# <Z_detector(D)> at theta_J = -pi/2, D = 1..4
Z_DETECTOR = {
    0.3: [0.955336489126, 0.992373088145, 0.941930315881, 0.98453432091],
    0.7: [0.764842187284, 0.827761364034, 0.574752974384, 0.641843963851],
    1.2: [0.362357754477, 0.245365769299, 0.057101029026, 0.027671193918],
}


def test_size_ceiling(eagle):
    with pytest.raises(TooLargeError):
        StateVector.up(25)
    with pytest.raises(TooLargeError):
        expect_z_after(CircuitSpec(-math.pi / 2, 0.7, 1, eagle), 62)


@given(th=st.floats(-3.0, 3.0), site=st.integers(0, 11))
@settings(max_examples=20, deadline=None)
def test_first_round_is_cos(hex12, th, site):
    # ZZ commutes with Z, so one round gives cos(theta_h)
    assert expect_z_after(CircuitSpec(-0.4, th, 1, hex12), site) == pytest.approx(math.cos(th), abs=1e-12)


@pytest.mark.parametrize("variant", ["standard", "non_commuting", "extra_final_rx"])
def test_evolve_matches_dense_unitary(theta10, variant):
    spec = CircuitSpec(-0.7, 0.9, 3, theta10, variant=variant, flux_bond=(0, 1))
    ref = do.circuit_unitary(theta10, -0.7, 0.9, 3, variant, flux_bond=(0, 1)) @ do.up_state(10)
    psi = evolve(StateVector.up(10), spec)
    assert abs(np.vdot(ref, psi.flat())) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(psi.flat(), ref, atol=1e-12)


def test_inverse_undoes_forward(theta10):
    spec = CircuitSpec(-0.7, 0.9, 3, theta10, variant="non_commuting")
    psi = evolve_inverse(evolve(StateVector.up(10), spec), spec)
    np.testing.assert_allclose(psi.flat(), do.up_state(10), atol=1e-12)


def test_pauli_expectations(theta10):
    psi = evolve(StateVector.up(10), CircuitSpec(-0.7, 0.9, 2, theta10))
    v = psi.flat()
    P = PauliString.from_sites(10, {0: "X", 3: "Y", 7: "Z"})
    assert expect_pauli(psi, P) == pytest.approx(np.vdot(v, do.pauli_matrix("XIIYIIIZII") @ v).real)
    np.testing.assert_allclose(apply_pauli(psi, P).flat(), do.pauli_matrix("XIIYIIIZII") @ v, atol=1e-12)
    for letter in "XYZ":
        mags = magnetization(psi, letter)
        for s in (0, 5):
            ops = "".join(letter if k == s else "I" for k in range(10))
            assert mags[s] == pytest.approx(np.vdot(v, do.pauli_matrix(ops) @ v).real, abs=1e-12)


@pytest.mark.slow
def test_detector_z_frozen(twohex):
    det = twohex.label("detector")
    for th, values in Z_DETECTOR.items():
        trace = z_trace(CircuitSpec(-math.pi / 2, th, 4, twohex), det)
        np.testing.assert_allclose(trace[1:], values, atol=1e-10)


def test_echo_identity(hex12):
    for th in (0.3, 1.2):
        assert echo_value(hex12, th, th, 3, 4) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.slow
def test_echo_frozen(twohex):
    det = twohex.label("detector")
    assert echo_value(twohex, math.pi / 2, 0.7, 2, det) == pytest.approx(0.279780106362, abs=1e-10)
    assert echo_value(twohex, math.pi / 2, 1.2, 3, det) == pytest.approx(0.532211218076, abs=1e-10)


@pytest.mark.slow
def test_double_slit_frozen(twohex):
    src, det = twohex.label("source"), twohex.label("detector")
    t0 = double_slit_table(twohex, src, 10, 0.0)
    tp = double_slit_table(twohex, src, 10, math.pi)
    np.testing.assert_allclose(t0[:, det], DOUBLE_SLIT_FLUX0, atol=1e-10)
    np.testing.assert_allclose(tp[:, det], DOUBLE_SLIT_FLUXPI, atol=1e-10)
    # before the two fronts meet the flux is invisible everywhere
    np.testing.assert_allclose(t0[:6], tp[:6], atol=1e-12)
    assert abs(t0[10, det] - tp[10, det]) > 0.05
    assert double_slit(twohex, src, det, 3, 0.0) == pytest.approx(DOUBLE_SLIT_FLUX0[3], abs=1e-10)
