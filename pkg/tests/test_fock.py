import numpy as np
import pytest

from gsbdyn.dynamics import closed_form_flat
from gsbdyn.errors import BasisTooLarge, TruncationOverflow
from gsbdyn.fock import (JointState, apply_system_operator, basis_size, basis_state,
                         build_basis, build_hamiltonian, evolve, evolve_grid,
                         extract_survival)
from gsbdyn.spectral import Flat, ModelSpec, Tabulated, discretize_bath

from oracles import brute_force_basis_count, dense_evolution


def small_bath(spec, W=2.0, M=4):
    return discretize_bath(spec, half_width=W, modes_per_channel=M)


def test_basis_single_excitation_layout(flat_qubit):
    bath = small_bath(flat_qubit, M=2)
    basis = build_basis(flat_qubit, bath, n_max=1)
    # ground+vacuum, excited+vacuum, then one photon in each mode
    assert basis.states == [(1, ()), (0, ()), (1, (0,)), (1, (1,))]
    assert basis.size == 4


def test_basis_two_excitations_count(flat_qubit):
    bath = small_bath(flat_qubit, M=2)
    basis = build_basis(flat_qubit, bath, n_max=2)
    assert basis.size == 9
    # double occupation retained
    assert (1, (0, 0)) in basis.index


def test_basis_vacuum_only(flat_qubit):
    basis = build_basis(flat_qubit, small_bath(flat_qubit, M=3), n_max=0)
    assert basis.states == [(1, ())]


def test_basis_count_matches_brute_force():
    for n in (1, 2):
        spec = ModelSpec(n=n, r=1, H_e=np.zeros((n, n)),
                         betas=np.array([[1.0] + [0.0] * (n - 1)]),
                         form_factors=(Flat(gamma=1.0),))
        for M in (2, 3, 4):
            bath = small_bath(spec, M=M)
            for n_max in (0, 1, 2, 3):
                expected = brute_force_basis_count(n, M, n_max)
                assert basis_size(n, M, n_max) == expected
                assert build_basis(spec, bath, n_max=n_max).size == expected


def test_basis_cap(flat_qubit):
    bath = discretize_bath(flat_qubit, half_width=20.0, modes_per_channel=400)
    with pytest.raises(BasisTooLarge):
        build_basis(flat_qubit, bath, n_max=2, cap=10_000)


def test_evolve_zero_coupling_phase():
    spec = ModelSpec(n=1, r=1, H_e=np.array([[0.7]]), betas=np.array([[1.0]]),
                     form_factors=(Tabulated(omega=np.linspace(-2, 2, 5), weight=np.zeros(5)),))
    bath = small_bath(spec)
    basis = build_basis(spec, bath, n_max=1)
    H = build_hamiltonian(spec, bath, basis)
    psi = evolve(H, basis_state(basis, 0), 1.3)
    assert psi.amplitude(0) == pytest.approx(np.exp(-1j * 0.7 * 1.3), abs=1e-10)


def test_ground_vacuum_stationary(flat_qubit):
    bath = small_bath(flat_qubit)
    basis = build_basis(flat_qubit, bath, n_max=1)
    H = build_hamiltonian(flat_qubit, bath, basis)
    psi = evolve(H, basis_state(basis, 1), 2.0)
    assert psi.amplitude(1) == pytest.approx(1.0, abs=1e-12)


def test_evolve_matches_dense_expm(flat_qubit):
    bath = small_bath(flat_qubit, W=2.0, M=6)
    basis = build_basis(flat_qubit, bath, n_max=2)
    H = build_hamiltonian(flat_qubit, bath, basis)
    rng = np.random.default_rng(1)
    amps = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
    amps /= np.linalg.norm(amps)
    psi = JointState(amplitudes=amps, basis=basis)
    got = evolve(H, psi, 1.7).amplitudes
    ref = dense_evolution(H.matrix, amps, 1.7)
    assert np.max(np.abs(got - ref)) < 1e-10


def test_hamiltonian_hermitian_and_sector_conserving(flat_qubit):
    bath = small_bath(flat_qubit, W=2.0, M=5)
    basis = build_basis(flat_qubit, bath, n_max=2)
    H = build_hamiltonian(flat_qubit, bath, basis)
    dense = H.matrix.toarray()
    assert np.max(np.abs(dense - dense.conj().T)) == 0.0
    # excitation number of each state
    def excitation(state):
        level, occ = state
        return len(occ) + (1 if level < basis.n else 0)
    for i, si in enumerate(basis.states):
        for j, sj in enumerate(basis.states):
            if dense[i, j] != 0:
                assert excitation(si) == excitation(sj)


def test_sector_amplitudes_conserved(flat_qubit):
    bath = small_bath(flat_qubit, W=2.0, M=6)
    basis = build_basis(flat_qubit, bath, n_max=2)
    H = build_hamiltonian(flat_qubit, bath, basis)
    psi = evolve(H, basis_state(basis, 0), 2.0)  # starts in the 1-excitation sector
    for k, (level, occ) in enumerate(basis.states):
        N = len(occ) + (1 if level < 1 else 0)
        if N != 1:
            assert abs(psi.amplitudes[k]) < 1e-12
    assert psi.norm == pytest.approx(1.0, abs=1e-8)


def test_flat_survival_probability_spot(flat_qubit):
    bath = discretize_bath(flat_qubit, half_width=20.0, modes_per_channel=400)
    basis = build_basis(flat_qubit, bath, n_max=1)
    H = build_hamiltonian(flat_qubit, bath, basis)
    psi = evolve(H, basis_state(basis, 0), 1.0)
    assert abs(psi.amplitude(0)) ** 2 == pytest.approx(np.exp(-1), rel=2e-2)


def test_normalization_identity_single_excitation(flat_qubit):
    bath = discretize_bath(flat_qubit, half_width=10.0, modes_per_channel=100)
    basis = build_basis(flat_qubit, bath, n_max=1)
    H = build_hamiltonian(flat_qubit, bath, basis)
    psi = evolve(H, basis_state(basis, 0), 1.5)
    excited = abs(psi.amplitude(0)) ** 2
    photons = float(np.sum(np.abs(psi.amplitudes[basis.single_photon_indices]) ** 2))
    assert excited + photons == pytest.approx(1.0, abs=1e-10)


def test_recurrence_window(flat_qubit):
    # coarse spacing: the finite bath echoes after 2*pi/delta_omega; inside
    # 80% of that window the decay still tracks the exponential law
    bath = discretize_bath(flat_qubit, half_width=20.0, modes_per_channel=40)
    assert bath.recurrence_time == pytest.approx(2 * np.pi)
    basis = build_basis(flat_qubit, bath, n_max=1)
    H = build_hamiltonian(flat_qubit, bath, basis)
    traj = evolve_grid(H, basis_state(basis, 0), horizon=5.0, step=0.25)
    ts = np.arange(21) * 0.25
    P = np.abs(traj[:, basis.state_index(0, ())]) ** 2
    inside = ts <= 0.8 * bath.recurrence_time
    rel = np.abs(P[inside] - np.exp(-ts[inside])) / np.exp(-ts[inside])
    assert rel.max() < 0.08


def test_extract_survival_identity_and_flat(flat_qubit):
    bath = discretize_bath(flat_qubit, half_width=20.0, modes_per_channel=400)
    A = extract_survival(flat_qubit, bath, horizon=2.0, step=0.25)
    assert np.allclose(A.samples[0], np.eye(1))
    assert A.provenance == "fock_extracted"
    exact = closed_form_flat(flat_qubit, horizon=2.0, step=0.25)
    assert np.max(np.abs(A.samples - exact.samples)) < 0.03


def test_extract_survival_uncoupled_level():
    spec = ModelSpec(n=2, r=1, H_e=np.diag([0.0, 0.5]).astype(complex),
                     betas=np.array([[1.0, 0.0]]), form_factors=(Flat(gamma=1.0),))
    bath = discretize_bath(spec, half_width=5.0, modes_per_channel=40)
    A = extract_survival(spec, bath, horizon=1.0, step=0.25)
    # level 2 has no coupling overlap: free phase evolution, no leakage
    col = A.samples[-1][:, 1]
    assert abs(col[0]) < 1e-10
    assert col[1] == pytest.approx(np.exp(-1j * 0.5), abs=1e-10)


def test_evolve_grid_matches_single_shots(flat_qubit):
    bath = small_bath(flat_qubit, W=2.0, M=6)
    basis = build_basis(flat_qubit, bath, n_max=1)
    H = build_hamiltonian(flat_qubit, bath, basis)
    traj = evolve_grid(H, basis_state(basis, 0), horizon=1.0, step=0.5)
    for k, t in enumerate((0.0, 0.5, 1.0)):
        single = evolve(H, basis_state(basis, 0), t)
        assert np.max(np.abs(traj[k] - single.amplitudes)) < 1e-10


def test_apply_system_operator_identity(flat_qubit):
    bath = small_bath(flat_qubit)
    basis = build_basis(flat_qubit, bath, n_max=1)
    rng = np.random.default_rng(2)
    amps = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
    psi = JointState(amplitudes=amps, basis=basis)
    out = apply_system_operator(np.eye(2), psi)
    assert np.allclose(out.amplitudes, amps)


def test_apply_system_operator_raising_needs_headroom(flat_qubit):
    bath = small_bath(flat_qubit, M=3)
    raise_op = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |e><g|
    basis1 = build_basis(flat_qubit, bath, n_max=1)
    photon = basis_state(basis1, 1, (0,))  # ground + one photon
    with pytest.raises(TruncationOverflow):
        apply_system_operator(raise_op, photon)
    basis2 = build_basis(flat_qubit, bath, n_max=2)
    photon2 = basis_state(basis2, 1, (0,))
    lifted = apply_system_operator(raise_op, photon2)
    assert lifted.amplitude(0, (0,)) == pytest.approx(1.0)


def test_apply_system_operator_linearity(flat_qubit):
    bath = small_bath(flat_qubit, M=3)
    basis = build_basis(flat_qubit, bath, n_max=2)
    rng = np.random.default_rng(3)
    amps = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
    for k, (level, occ) in enumerate(basis.states):
        if len(occ) + (1 if level < 1 else 0) > 1:
            amps[k] = 0.0  # keep headroom for the raising component
    psi = JointState(amplitudes=amps, basis=basis)
    X = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    Y = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    combined = apply_system_operator(0.3 * X + 0.7j * Y, psi).amplitudes
    separate = (0.3 * apply_system_operator(X, psi).amplitudes
                + 0.7j * apply_system_operator(Y, psi).amplitudes)
    assert np.max(np.abs(combined - separate)) < 1e-12
