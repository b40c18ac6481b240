import numpy as np
import pytest
from hypothesis import given, strategies as st

from hubbard_qst.errors import ParameterError, SizeLimitError
from hubbard_qst.fockspace import build_basis
from hubbard_qst.hamiltonian import build_gate, landscape, total_number, transistor_params
from hubbard_qst.measure import reduced_site_density
from hubbard_qst.states import (SPIN_UP, DensityMatrix, EnsembleState, QubitState,
                                compose_initial, compose_target, densify, gate_ground_ensemble,
                                gate_thermal_ensemble, initial_family, reduced_gate_ensemble)

GATE = build_basis(3, 1, leads=False)
TOTAL = build_basis(3, 3)


def gate_h(mode, eps, L=3, n=1, U=50.0):
    gb = build_basis(L, n, leads=False)
    return build_gate(transistor_params(landscape(mode, L, eps, 39), U=U), gb), gb


def open_state(a=1.0, b=0.0):
    return np.array([a, 0, b]) / np.hypot(a, b)


def member_overlaps(ens, probe_up):
    # project each member onto the up-sector probe (gate basis words sorted: ↑ block first)
    up = np.nonzero(GATE.sz_values == 0.5)[0]
    dn = np.nonzero(GATE.sz_values == -0.5)[0]
    V = ens.vectors
    P = np.zeros((GATE.dim, 2), dtype=complex)
    P[up, 0] = probe_up
    P[dn, 1] = probe_up
    return np.linalg.svd(P.conj().T @ V, compute_uv=False)


# -- gate ground and thermal ensembles -----------------------------------------

@pytest.mark.parametrize("mode,eps,probe", [
    ("open", 10, open_state(1, 1)),
    ("closed", 20, np.array([0, 1.0, 0])),
])
def test_single_electron_ground_is_spin_doublet(mode, eps, probe):
    H, gb = gate_h(mode, eps)
    ens = gate_ground_ensemble(H, gb)
    assert ens.rank == 2
    assert np.allclose(ens.weights, 0.5)
    # both members live in span{probe_↑, probe_↓} up to O((t/ε)^2)
    assert np.all(member_overlaps(ens, probe) ** 2 > 0.98)


def test_even_filling_gives_unique_singlet():
    H, gb = gate_h("open", 10, L=4, n=2)
    ens = gate_ground_ensemble(H, gb)
    assert ens.rank == 1
    v = ens.vectors[:, 0]
    assert abs(np.vdot(v, gb.sz_values * v)) < 1e-12
    assert abs(np.sum(np.abs(v[gb.sz_values != 0]) ** 2)) < 1e-12


def test_degeneracy_cap_diagnostic():
    gb = build_basis(3, 1, leads=False)
    zero = build_gate(transistor_params(landscape("open", 3, 0, 0), U=0, V=0), gb) * 0
    with pytest.raises(ParameterError, match="degeneracy"):
        gate_ground_ensemble(zero, gb, max_degeneracy=4)


def test_thermal_zero_temperature_is_ground():
    H, gb = gate_h("open", 10)
    a, b = gate_thermal_ensemble(H, gb, 0.0), gate_ground_ensemble(H, gb)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.vectors, b.vectors)


def test_thermal_weights_follow_closed_form_energies():
    kT = 0.26
    H, gb = gate_h("open", 10)
    ens = gate_thermal_ensemble(H, gb, kT)
    root = np.sqrt(100 + 8)
    E = np.array([0.5 * (-10 - root), -10.0, 0.5 * (-10 + root)])
    w = np.exp(-(E - E[0]) / kT)
    w = np.repeat(w, 2)   # spin doublets
    w /= w.sum()
    keep = w >= 1e-12
    expected = np.sort(w[keep] / w[keep].sum())[::-1]
    assert np.allclose(np.sort(ens.weights)[::-1], expected, atol=1e-10, rtol=0)


def test_infinite_temperature_weights_are_flat():
    gb = build_basis(3, 1, 0.5, leads=False)
    H = build_gate(transistor_params(landscape("open", 3, 10, 39)), GATE)
    up = np.nonzero(GATE.sz_values == 0.5)[0]
    blk = H[up][:, up]
    ens = gate_thermal_ensemble(blk, gb, 1e9)
    assert np.allclose(ens.weights, 1 / 3, atol=1e-8)


def test_negative_temperature_rejected():
    H, gb = gate_h("open", 10)
    with pytest.raises(ParameterError):
        gate_thermal_ensemble(H, gb, -0.1)


# -- value types ----------------------------------------------------------------

@given(theta=st.floats(0, np.pi), phi=st.floats(0, 2 * np.pi))
def test_bloch_states_are_normalized(theta, phi):
    q = QubitState.bloch(theta, phi)
    assert abs(np.linalg.norm(q.vector) - 1) < 1e-12


def test_unnormalized_qubit_rejected():
    with pytest.raises(ParameterError):
        QubitState(1.0, 1.0)


@pytest.mark.parametrize("weights,vectors", [
    ([0.5, 0.5], np.eye(3)[:, :1]),
    ([0.7, 0.7], np.eye(3)[:, :2]),
    ([1.5, -0.5], np.eye(3)[:, :2]),
    ([1.0], 2 * np.eye(3)[:, :1]),
])
def test_ensemble_validation(weights, vectors):
    with pytest.raises(ParameterError):
        EnsembleState(build_basis(1, 1, leads=False), weights, vectors)


def test_density_check_rejects_bad_matrices():
    b = build_basis(1, 1, leads=False)
    with pytest.raises(ParameterError):
        DensityMatrix(b, np.diag([0.7, 0.7])).check()
    with pytest.raises(ParameterError):
        DensityMatrix(b, np.diag([1.2, -0.2])).check()
    with pytest.raises(ParameterError):
        DensityMatrix(b, np.array([[0.5, 0.5], [0.1, 0.5]])).check()


def test_densify_guard():
    b = build_basis(4, 3)
    ens = EnsembleState(b, [1.0], np.eye(b.dim)[:, :1])
    with pytest.raises(SizeLimitError):
        densify(ens, cap=10)


# -- product composition --------------------------------------------------------

OPEN_ENS = gate_ground_ensemble(*gate_h("open", 10))


def test_initial_has_four_quarter_weight_members():
    ens = compose_initial(SPIN_UP, OPEN_ENS, TOTAL)
    assert ens.rank == 4
    assert np.allclose(ens.weights, 0.25)
    N = total_number(TOTAL)
    for v in ens.vectors.T:
        assert abs(np.vdot(v, N @ v) - 3) < 1e-12


def test_initial_members_are_orthonormal():
    V = compose_initial(QubitState.bloch(1.0, 2.0), OPEN_ENS, TOTAL).vectors
    assert np.allclose(V.conj().T @ V, np.eye(4), atol=1e-12)


@given(theta=st.floats(0, np.pi), phi=st.floats(0, 2 * np.pi))
def test_source_spin_is_the_input_qubit(theta, phi):
    psi = QubitState.bloch(theta, phi)
    rho_s = reduced_site_density(densify(compose_initial(psi, OPEN_ENS, TOTAL)), "s")
    expected = np.zeros((4, 4), dtype=complex)
    expected[1:3, 1:3] = np.outer(psi.vector, psi.vector.conj())
    assert np.allclose(rho_s, expected, atol=1e-12)


@given(theta=st.floats(0, np.pi), phi=st.floats(0, 2 * np.pi))
def test_open_target_moves_the_qubit_to_the_drain(theta, phi):
    psi = QubitState.bloch(theta, phi)
    rho = densify(compose_target("open", psi, OPEN_ENS, TOTAL))
    rho_d = reduced_site_density(rho, "d")
    assert np.allclose(rho_d[1:3, 1:3], np.outer(psi.vector, psi.vector.conj()), atol=1e-12)
    assert np.allclose(reduced_site_density(rho, "s")[1:3, 1:3], np.eye(2) / 2, atol=1e-12)


def test_closed_target_equals_initial():
    psi = QubitState.bloch(0.3, 0.4)
    a = compose_target("closed", psi, OPEN_ENS, TOTAL)
    b = compose_initial(psi, OPEN_ENS, TOTAL)
    assert np.array_equal(a.vectors, b.vectors)


def test_unknown_mode_and_basis_mismatch():
    with pytest.raises(ParameterError):
        compose_target("ajar", SPIN_UP, OPEN_ENS, TOTAL)
    with pytest.raises(ParameterError):
        compose_initial(SPIN_UP, OPEN_ENS, build_basis(3, 4))


def test_reduced_gate_ensemble_recovers_the_gate_state():
    fam = initial_family(OPEN_ENS, TOTAL)
    ens = fam.at(SPIN_UP)
    red = reduced_gate_ensemble(ens.vectors, ens.weights, GATE, TOTAL)
    rho = red.factor @ red.factor.conj().T
    ref = OPEN_ENS.factor @ OPEN_ENS.factor.conj().T
    assert np.allclose(rho, ref, atol=1e-12)
