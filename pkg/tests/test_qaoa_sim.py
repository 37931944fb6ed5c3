from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm

from prosumer_qaoa.exact_solver import brute_force_minimum
from prosumer_qaoa.problem_model import ScheduleAssignment, instance_from_dict
from prosumer_qaoa.qaoa_sim import (
    DiagonalHamiltonian,
    QaoaConfig,
    QubitCapError,
    apply_mixer,
    apply_phase_separator,
    expectation,
    initial_state,
    optimize_parameters,
    qaoa_expectation,
    qaoa_state,
    sample,
    solve_qaoa,
)
from prosumer_qaoa.reduction import (
    IsingModel,
    bits_of_index,
    encode_schedule,
    index_of_bits,
    ising_energy,
    qubo_value,
    reduce_instance,
    spins_from_bits,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)

TWO_SPIN = IsingModel(2, (0.5, 0.0), {(0, 1): -1.0}, 0.5)


def random_ising(rng, n):
    h = tuple(rng.normal(size=n))
    J = {(i, j): float(rng.normal()) for i in range(n) for j in range(i + 1, n)}
    return IsingModel(n, h, J, float(rng.normal()))


def dense_sum_x(n):
    """sum_i X_i as a dense matrix; qubit i acts on bit i of the basis index."""
    total = np.zeros((1 << n, 1 << n), dtype=complex)
    for q in range(n):
        # kron order is most significant first, so qubit q sits at position n-1-q
        ops = [X if k == n - 1 - q else I2 for k in range(n)]
        total += reduce(np.kron, ops)
    return total


def dense_energies(ising):
    n = ising.num_spins
    return np.array([ising_energy(ising, spins_from_bits(bits_of_index(k, n))) for k in range(1 << n)])


def dense_qaoa_state(ising, gammas, betas):
    n = ising.num_spins
    H = np.diag(dense_energies(ising))
    B = dense_sum_x(n)
    psi = np.full(1 << n, 2 ** (-n / 2), dtype=complex)
    for g, b in zip(gammas, betas):
        psi = expm(-1j * b * B) @ (expm(-1j * g * H) @ psi)
    return psi


def assert_equal_up_to_phase(a, b, tol=1e-9):
    k = int(np.argmax(np.abs(b)))
    phase = a[k] / b[k]
    assert abs(abs(phase) - 1) < tol
    assert np.max(np.abs(a - phase * b)) < tol


# -- state preparation ---------------------------------------------------------


def test_initial_state_small():
    assert np.allclose(initial_state(1), [2 ** -0.5] * 2)
    assert np.allclose(initial_state(2), [0.5] * 4)


def test_initial_state_cap():
    with pytest.raises(QubitCapError, match="cap of 24"):
        initial_state(25, cap=24)


# -- phase separator -----------------------------------------------------------


def test_phase_zero_is_identity(rng):
    diag = DiagonalHamiltonian(random_ising(rng, 3))
    psi = initial_state(3)
    assert np.allclose(apply_phase_separator(psi.copy(), diag, 0.0), psi)


def test_phase_half_pi():
    diag = DiagonalHamiltonian.from_values([0.0, 2.0])
    out = apply_phase_separator(initial_state(1), diag, np.pi / 2)
    assert np.allclose(out, [2 ** -0.5, -(2 ** -0.5)], atol=1e-12)


@pytest.mark.parametrize("materialize", [False, True])
def test_phase_matches_dense_exponential(rng, materialize):
    ising = random_ising(rng, 3)
    diag = DiagonalHamiltonian(ising, materialize=materialize)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    gamma = rng.uniform(0, 2 * np.pi)
    want = expm(-1j * gamma * np.diag(dense_energies(ising))) @ psi
    assert np.max(np.abs(apply_phase_separator(psi.copy(), diag, gamma) - want)) < 1e-9


# -- mixer -----------------------------------------------------------------------


def test_mixer_zero_is_identity(rng):
    psi = rng.normal(size=8) + 0j
    assert np.allclose(apply_mixer(psi.copy(), 0.0), psi)


def test_mixer_half_pi_flips():
    out = apply_mixer(np.array([1, 0], dtype=complex), np.pi / 2)
    assert np.allclose(out, [0, -1j], atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 6])
def test_mixer_matches_dense_exponential(rng, n):
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    psi /= np.linalg.norm(psi)
    beta = rng.uniform(0, np.pi)
    want = expm(-1j * beta * dense_sum_x(n)) @ psi
    assert np.max(np.abs(apply_mixer(psi.copy(), beta) - want)) < 1e-9


def test_mixer_pairwise_rule(rng):
    # the single-qubit pair map, applied qubit by qubit
    n = 4
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    beta = 0.83
    want = psi.copy()
    for q in range(n):
        nxt = want.copy()
        for k in range(1 << n):
            if not (k >> q) & 1:
                a, b = want[k], want[k | (1 << q)]
                nxt[k] = np.cos(beta) * a - 1j * np.sin(beta) * b
                nxt[k | (1 << q)] = -1j * np.sin(beta) * a + np.cos(beta) * b
        want = nxt
    assert np.max(np.abs(apply_mixer(psi.copy(), beta) - want)) < 1e-12


# -- expectation -------------------------------------------------------------------


def test_expectation_uniform_is_mean(rng):
    ising = random_ising(rng, 4)
    diag = DiagonalHamiltonian(ising)
    assert expectation(initial_state(4), diag) == pytest.approx(dense_energies(ising).mean(), abs=1e-12)


def test_expectation_basis_state(rng):
    ising = random_ising(rng, 3)
    diag = DiagonalHamiltonian(ising)
    psi = np.zeros(8, dtype=complex)
    psi[5] = 1
    assert expectation(psi, diag) == pytest.approx(diag.energy(5), abs=1e-12)


def test_expectation_row_one_basis_state(inst):
    ilp, _, ising = reduce_instance(inst)
    bits = encode_schedule(inst, ilp, ScheduleAssignment.from_bits(inst, [1, 1, 0, 0, 1, 0]))
    psi = np.zeros(1 << 12, dtype=complex)
    psi[index_of_bits(bits)] = 1
    assert expectation(psi, DiagonalHamiltonian(ising)) == 107


def test_zero_parameters_give_offset(inst, rng):
    _, _, ising = reduce_instance(inst)
    assert qaoa_expectation(ising, [0.0], [0.0]) == pytest.approx(2019.5, abs=1e-9)
    small = random_ising(rng, 4)
    assert qaoa_expectation(small, [0, 0], [0, 0]) == pytest.approx(small.offset, abs=1e-12)


def test_qaoa_matches_dense_circuit(rng):
    ising = random_ising(rng, 3)
    gammas, betas = rng.uniform(0, 2 * np.pi, 2), rng.uniform(0, np.pi, 2)
    got = qaoa_state(DiagonalHamiltonian(ising), gammas, betas)
    assert_equal_up_to_phase(got, dense_qaoa_state(ising, gammas, betas))
    want = float(np.abs(dense_qaoa_state(ising, gammas, betas)) ** 2 @ dense_energies(ising))
    assert qaoa_expectation(ising, gammas, betas) == pytest.approx(want, abs=1e-9)


def test_norm_preserved_every_layer(inst, rng):
    _, _, ising = reduce_instance(inst)
    diag = DiagonalHamiltonian(ising, materialize=True)
    psi = initial_state(12)
    for _ in range(4):
        apply_phase_separator(psi, diag, rng.uniform(0, 2 * np.pi))
        assert abs(np.vdot(psi, psi).real - 1) < 1e-9
        apply_mixer(psi, rng.uniform(0, np.pi))
        assert abs(np.vdot(psi, psi).real - 1) < 1e-9


def test_expectation_never_below_ground_energy(rng):
    for n in (3, 6, 9):
        ising = random_ising(rng, n)
        _, ground = brute_force_minimum(ising)
        diag = DiagonalHamiltonian(ising, materialize=True)
        for _ in range(10):
            p = int(rng.integers(1, 4))
            value = qaoa_expectation(diag, rng.uniform(0, 2 * np.pi, p), rng.uniform(0, np.pi, p))
            assert value >= ground - 1e-9


def test_lazy_and_materialized_agree(inst):
    _, _, ising = reduce_instance(inst)
    lazy = DiagonalHamiltonian(ising)
    full = DiagonalHamiltonian(ising, materialize=True)
    args = ([0.3, 1.1], [0.2, 0.7])
    assert qaoa_expectation(lazy, *args) == pytest.approx(qaoa_expectation(full, *args), abs=1e-9)


# -- optimisation ------------------------------------------------------------------


def test_two_spin_optimisation_beats_baseline():
    opt = optimize_parameters(TWO_SPIN, QaoaConfig(reps=1, restarts=5, seed=3))
    assert opt.expectation < 0.5
    assert opt.expectation >= -1 - 1e-9


def test_optimisation_is_deterministic():
    cfg = QaoaConfig(reps=2, restarts=2, max_evals=60, seed=11)
    a = optimize_parameters(TWO_SPIN, cfg)
    b = optimize_parameters(TWO_SPIN, cfg)
    assert a.trace == b.trace
    assert (a.gammas, a.betas) == (b.gammas, b.betas)


def test_config_validation():
    with pytest.raises(ValueError):
        QaoaConfig(reps=0)
    with pytest.raises(ValueError):
        QaoaConfig(shots=0)


# -- sampling ------------------------------------------------------------------------


def test_sample_basis_state():
    psi = np.zeros(8, dtype=complex)
    psi[6] = 1
    assert sample(psi, 500, seed=1) == {6: 500}


def test_sample_uniform_statistics():
    counts = sample(initial_state(2), 10 ** 6, seed=5)
    sigma = np.sqrt(10 ** 6 * 0.25 * 0.75)
    assert sum(counts.values()) == 10 ** 6
    for k in range(4):
        assert abs(counts[k] - 250_000) < 3 * sigma


def test_sample_reproducible(rng):
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi /= np.linalg.norm(psi)
    assert sample(psi, 1000, seed=9) == sample(psi, 1000, seed=9)


# -- end to end ------------------------------------------------------------------------


def test_forced_instance_ranks_unique_schedule():
    inst = instance_from_dict({"hours": 2, "e_max": 1, "tariff": [3, 4],
                               "loads": [{"id": "a", "alpha": 1, "beta": 2, "delta": 2, "power": 1}]})
    result = solve_qaoa(inst, QaoaConfig(reps=1, restarts=2, max_evals=80, seed=0))
    best = result.samples[0]
    assert best.feasible and best.bits.startswith("11") and best.cost == 7


def test_samples_are_consistent_and_ranked(inst):
    _, qubo, ising = reduce_instance(inst)
    result = solve_qaoa(inst, QaoaConfig(reps=1, restarts=2, max_evals=60, seed=2))
    assert sum(r.count for r in result.samples) == 1024
    for rec in result.samples:
        bits = [int(c) for c in rec.bits]
        assert rec.energy == qubo_value(qubo, bits) == ising_energy(ising, spins_from_bits(bits))
    keys = [(not r.feasible, r.cost, r.bits) for r in result.samples]
    assert keys == sorted(keys)
    assert result.baseline_expectation == pytest.approx(2019.5)


def test_solve_respects_cap(inst):
    with pytest.raises(QubitCapError):
        solve_qaoa(inst, QaoaConfig(max_qubits=10))
