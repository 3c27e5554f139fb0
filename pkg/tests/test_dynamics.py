import numpy as np
import pytest
import scipy.linalg

from gsbdyn.dynamics import (GKLSGenerator, closed_form_flat, gkls_generator,
                             operator_norm, semigroup_residual, solve_survival,
                             survival_from_csv, survival_to_csv, SurvivalOperator)
from gsbdyn.errors import MixedKinds, StepTooCoarse, TimeNotOnGrid
from gsbdyn.spectral import BoxWindow, Flat, Lorentzian, ModelSpec, Tabulated

from conftest import qubit_model
from oracles import pseudomode_a

# frozen from the pseudomode oracle (gamma = lam = 1, t = 1):
# a(1) = e^{-1/2} (cos(1/2) + sin(1/2))
A_AT_ONE = 0.8230670184283626


def test_volterra_matches_pseudomode_oracle(lorentzian_qubit):
    A = solve_survival(lorentzian_qubit, horizon=2.0, step=1e-3)
    oracle = pseudomode_a(A.times, gamma=1.0, lam=1.0)
    assert np.max(np.abs(A.samples[:, 0, 0] - oracle)) < 1e-6
    assert A.at(1.0)[0, 0] == pytest.approx(A_AT_ONE, abs=1e-6)
    assert A.provenance == "volterra"


def test_volterra_detuned_channel():
    spec = ModelSpec(n=1, r=1, H_e=np.array([[0.8]]), betas=np.array([[1.0]]),
                     form_factors=(Lorentzian(gamma=0.6, lam=1.3, omega0=-0.5),))
    A = solve_survival(spec, horizon=2.0, step=1e-3)
    oracle = pseudomode_a(A.times, gamma=0.6, lam=1.3, omega0=-0.5, omega_e=0.8)
    assert np.max(np.abs(A.samples[:, 0, 0] - oracle)) < 1e-6


def test_initial_condition_identity(lorentzian_qubit):
    A = solve_survival(lorentzian_qubit, horizon=0.5, step=1e-3)
    assert np.allclose(A.samples[0], np.eye(1))


def test_second_order_convergence(lorentzian_qubit):
    errs = []
    for h in (2e-3, 1e-3):
        A = solve_survival(lorentzian_qubit, horizon=2.0, step=h)
        oracle = pseudomode_a(A.times, gamma=1.0, lam=1.0)
        errs.append(np.max(np.abs(A.samples[:, 0, 0] - oracle)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)


def test_zero_coupling_free_evolution():
    # tabulated zeros: the kernel vanishes and the excited sector evolves freely
    H_e = np.array([[0.9, 0.2 + 0.1j], [0.2 - 0.1j, -0.4]])
    tab = Tabulated(omega=np.linspace(-5, 5, 11), weight=np.zeros(11))
    spec = ModelSpec(n=2, r=1, H_e=H_e, betas=np.array([[1.0, 0.0]]), form_factors=(tab,))
    A = solve_survival(spec, horizon=1.0, step=1e-3)
    expected = scipy.linalg.expm(-1j * H_e * 1.0)
    # free evolution is still integrated by the second-order stepper
    assert np.max(np.abs(A.samples[-1] - expected)) < 1e-6


def test_closed_form_flat_qubit(flat_qubit):
    A = closed_form_flat(flat_qubit, horizon=2.0, step=0.01)
    assert np.allclose(A.samples[0], np.eye(1))
    assert abs(A.at(1.0)[0, 0]) ** 2 == pytest.approx(np.exp(-1), abs=1e-12)
    assert A.provenance == "closed_form_flat"


def test_closed_form_flat_uncoupled_level():
    spec = ModelSpec(n=2, r=1, H_e=np.zeros((2, 2)), betas=np.array([[1.0, 0.0]]),
                     form_factors=(Flat(gamma=1.0),))
    A = closed_form_flat(spec, horizon=1.0, step=0.25)
    expected = np.diag([np.exp(-0.5), 1.0])
    assert np.max(np.abs(A.at(1.0) - expected)) < 1e-12


def test_mixed_kinds_rejected():
    spec = ModelSpec(n=2, r=2, H_e=np.zeros((2, 2)),
                     betas=np.array([[1.0, 0.0], [0.0, 1.0]]),
                     form_factors=(Flat(gamma=1.0), Lorentzian(gamma=1.0, lam=1.0)))
    with pytest.raises(MixedKinds):
        closed_form_flat(spec, horizon=1.0, step=0.1)
    with pytest.raises(MixedKinds):
        gkls_generator(spec)
    # all non-flat is equally outside the closed form
    lor = qubit_model(Lorentzian(gamma=1.0, lam=1.0))
    with pytest.raises(MixedKinds):
        closed_form_flat(lor, horizon=1.0, step=0.1)


def test_step_too_coarse_guard():
    spec = qubit_model(Lorentzian(gamma=8.0, lam=2.0))  # ||G(0)|| = 8
    with pytest.raises(StepTooCoarse):
        solve_survival(spec, horizon=1.0, step=0.05)
    A = solve_survival(spec, horizon=1.0, step=0.05, allow_coarse=True)
    assert A.times.size == 21


def test_norm_bound_all_solvers(flat_qubit, lorentzian_qubit):
    runs = [
        closed_form_flat(flat_qubit, horizon=4.0, step=0.01),
        solve_survival(lorentzian_qubit, horizon=4.0, step=2e-3),
        solve_survival(qubit_model(Lorentzian(gamma=8.0, lam=1.0)), horizon=3.0, step=2e-3),
        solve_survival(qubit_model(BoxWindow(gamma=1.0, half_width=10.0)), horizon=3.0, step=1e-3),
    ]
    for A in runs:
        norms = [operator_norm(M) for M in A.samples]
        assert max(norms) <= 1 + 1e-8


def test_semigroup_residual_flat(flat_qubit):
    A = closed_form_flat(flat_qubit, horizon=4.0, step=0.01)
    assert semigroup_residual(A) <= 1e-10


def test_semigroup_residual_lorentzian(lorentzian_qubit):
    A = solve_survival(lorentzian_qubit, horizon=4.0, step=5e-3)
    assert semigroup_residual(A) > 1e-2


def test_semigroup_residual_vacuous():
    A = SurvivalOperator(times=np.array([0.0]), samples=np.eye(1)[None], provenance="volterra")
    assert semigroup_residual(A) == 0.0


def test_gkls_generator_qubit(flat_qubit):
    gen = gkls_generator(flat_qubit)
    assert gen.Gamma.shape == (1, 1)
    assert gen.Gamma[0, 0] == pytest.approx(1.0)
    assert gen.rank == 1


def test_gkls_generator_orthonormal_pair():
    spec = ModelSpec(n=2, r=2, H_e=np.zeros((2, 2)),
                     betas=np.array([[1.0, 0.0], [0.0, 1.0]]),
                     form_factors=(Flat(gamma=1.0), Flat(gamma=1.0)))
    gen = gkls_generator(spec)
    assert np.allclose(gen.Gamma, np.eye(2))
    assert gen.rank == 2


def test_gkls_generator_rank_counts_channels():
    spec = ModelSpec(n=2, r=1, H_e=np.zeros((2, 2)),
                     betas=np.array([[0.6, 0.8]]), form_factors=(Flat(gamma=2.0),))
    assert gkls_generator(spec).rank == 1
    parallel = ModelSpec(n=2, r=2, H_e=np.zeros((2, 2)),
                         betas=np.array([[1.0, 0.0], [2.0, 0.0]]),
                         form_factors=(Flat(gamma=1.0), Flat(gamma=1.0)))
    with pytest.raises(ValueError, match="linearly independent"):
        gkls_generator(parallel)


def test_closed_form_consistent_with_generator():
    H_e = np.array([[0.4, 0.1], [0.1, -0.2]])
    spec = ModelSpec(n=2, r=1, H_e=H_e, betas=np.array([[0.8, 0.6]]),
                     form_factors=(Flat(gamma=1.3),))
    gen = gkls_generator(spec)
    A = closed_form_flat(spec, horizon=0.7, step=0.1)
    direct = scipy.linalg.expm(-(1j * gen.H_eff + gen.Gamma / 2) * 0.7)
    assert np.max(np.abs(A.at(0.7) - direct)) < 1e-12


def test_box_window_approaches_flat(flat_qubit):
    # widening the window drives the solution to the exponential family
    ref = closed_form_flat(flat_qubit, horizon=3.0, step=1e-3)
    max_errs, end_errs = [], []
    for W in (5.0, 10.0, 20.0, 40.0):
        A = solve_survival(qubit_model(BoxWindow(gamma=1.0, half_width=W)),
                           horizon=3.0, step=1e-3)
        diff = np.abs(A.samples[:, 0, 0] - ref.samples[:, 0, 0])
        max_errs.append(float(diff.max()))
        end_errs.append(float(diff[-1]))
    assert all(a > b for a, b in zip(max_errs, max_errs[1:]))
    # the pointwise error at the horizon rings; it is monotone from W=10 on
    assert end_errs[1] > end_errs[2] > end_errs[3]
    assert end_errs[3] < end_errs[0]


def test_operator_norm_matches_svd():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 5):
        for _ in range(10):
            M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            assert operator_norm(M) == pytest.approx(
                np.linalg.svd(M, compute_uv=False)[0], rel=1e-10)


def test_operator_norm_symmetric_start_trap():
    # all-ones start is orthogonal to the dominant singular direction here;
    # the ramp tie-break must still find the true norm
    M = np.array([[1.2, -0.5], [-0.5, 1.2]])
    assert operator_norm(M) == pytest.approx(1.7, abs=1e-10)


def test_survival_csv_round_trip(lorentzian_qubit):
    A = solve_survival(lorentzian_qubit, horizon=0.5, step=0.05)
    text = survival_to_csv(A, extra_metadata={"flat": 0})
    back, meta = survival_from_csv(text)
    assert meta["provenance"] == "volterra" and meta["n"] == "1"
    assert np.allclose(back.times, A.times)
    assert np.max(np.abs(back.samples - A.samples)) == 0.0


def test_time_lookup_guards(lorentzian_qubit):
    A = solve_survival(lorentzian_qubit, horizon=0.5, step=0.05)
    with pytest.raises(TimeNotOnGrid):
        A.at(0.512)
    with pytest.raises(TimeNotOnGrid):
        A.at(0.7)
    assert A.index_of(0.25) == 5


def test_gkls_invariants_validated():
    with pytest.raises(ValueError):
        GKLSGenerator(H_eff=np.zeros((2, 2)), Gamma=np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        GKLSGenerator(H_eff=np.zeros((1, 1)), Gamma=np.array([[-0.5]]))
