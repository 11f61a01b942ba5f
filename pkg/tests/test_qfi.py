import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtraj.qfi import bloch_to_pure, evolve_pure, qfi, qfi_curve
from qtraj.qubit import ModelParams, bloch_decompose, projector

from oracles import generator_variance_qfi

KET0 = np.array([1, 0], dtype=complex)
DEFAULT_MODEL = ModelParams(1.73, 1.0, 0.01)


def test_evolve_identity_at_t0():
    psi = np.array([0.6, 0.8j])
    np.testing.assert_array_equal(evolve_pure(DEFAULT_MODEL, psi, 0.0), psi)


def test_evolve_eigenstate_picks_up_phase():
    psi = evolve_pure(ModelParams(0.0, 2.0, 0.0), KET0, np.pi / 2)
    np.testing.assert_allclose(psi, np.exp(-1j * np.pi / 2) * KET0, atol=1e-15)
    assert abs(psi[0]) == pytest.approx(1.0, abs=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 20))
def test_evolution_preserves_norm(delta, omega, t):
    psi = evolve_pure(ModelParams(delta, omega, 0.0), np.array([0.6, 0.8j]), t)
    assert abs(np.vdot(psi, psi).real - 1) < 1e-12


def test_evolve_rejects_bad_state():
    with pytest.raises(ValueError):
        evolve_pure(DEFAULT_MODEL, np.array([1.0, 1.0]), 1.0)
    with pytest.raises(ValueError):
        evolve_pure(DEFAULT_MODEL, np.array([1.0, 0.0, 0.0]), 1.0)


def test_qfi_zero_at_t0():
    assert qfi(DEFAULT_MODEL, KET0, 0.0) == 0.0


@pytest.mark.parametrize("t", [0.3, 1.0, 5.0, 10.0])
def test_qfi_vanishes_for_eigenstate(t):
    assert qfi(ModelParams(0.0, 1.0, 0.0), KET0, t) < 1e-8


@pytest.mark.parametrize("t", np.linspace(0.1, 10, 12))
def test_qfi_matches_generator_variance(t):
    want = generator_variance_qfi(1.73, 1.0, t, KET0)
    assert qfi(DEFAULT_MODEL, KET0, t) == pytest.approx(want, rel=1e-6, abs=1e-12)


def test_qfi_delta_parameter_matches_oracle():
    psi0 = np.array([0.6, 0.8j])
    for t in (0.5, 3.0):
        want = generator_variance_qfi(1.73, 1.0, t, psi0, "delta")
        assert qfi(DEFAULT_MODEL, psi0, t, parameter="delta") == pytest.approx(want, rel=1e-6)


@given(st.floats(0, 2 * np.pi), st.floats(0.1, 10))
@settings(max_examples=30)
def test_qfi_global_phase_invariance(phase, t):
    psi0 = np.array([0.6, 0.8j])
    a = qfi(DEFAULT_MODEL, psi0, t)
    b = qfi(DEFAULT_MODEL, np.exp(1j * phase) * psi0, t)
    assert b == pytest.approx(a, rel=1e-8, abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 20))
def test_qfi_nonnegative(delta, omega, t):
    assert qfi(ModelParams(delta, omega, 0.0), KET0, t) >= -1e-10


def test_qfi_step_halving_converges_quadratically():
    t = 4.0
    deltas = [1e-3 / 2**k for k in range(5)]
    values = [qfi(DEFAULT_MODEL, KET0, t, d) for d in deltas]
    gaps = np.abs(np.diff(values))
    ratios = gaps[:-1] / gaps[1:]
    np.testing.assert_allclose(ratios, 4.0, rtol=0.1)


def test_qfi_errors():
    with pytest.raises(ValueError):
        qfi(DEFAULT_MODEL, KET0, 1.0, delta_theta=1e-9)
    with pytest.raises(ValueError):
        qfi(DEFAULT_MODEL, KET0, 1.0, parameter="eta_x")


def test_qfi_curve():
    times = np.linspace(0, 10, 11)
    curve = qfi_curve(DEFAULT_MODEL, KET0, times)
    assert curve.shape == (11,)
    assert curve[0] == 0
    assert curve[-1] == pytest.approx(qfi(DEFAULT_MODEL, KET0, 10.0))


@given(st.floats(0, np.pi), st.floats(-np.pi, np.pi))
def test_bloch_to_pure_round_trip(polar, azimuth):
    b = (np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar))
    psi = bloch_to_pure(b)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    assert bloch_decompose(projector(psi)) == pytest.approx(b, abs=1e-12)


def test_bloch_to_pure_rejects_mixed():
    with pytest.raises(ValueError):
        bloch_to_pure((0.5, 0, 0))
    np.testing.assert_allclose(bloch_to_pure((0, 0, 1)), KET0)
