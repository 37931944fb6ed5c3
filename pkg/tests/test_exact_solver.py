import itertools
from math import comb

import pytest

from prosumer_qaoa.exact_solver import (
    ProblemSizeError,
    brute_force_minimum,
    enumerate_feasible,
    records_to_csv,
    verify_reduction,
)
from prosumer_qaoa.problem_model import (
    ScheduleAssignment,
    cost_of_schedule,
    instance_from_dict,
    is_feasible,
    widened_fixture,
)
from prosumer_qaoa.reduction import IsingModel, QuboModel, qubo_value, reduce_instance

from conftest import TABLE_I, random_instance

FORCED = {"hours": 2, "e_max": 1, "tariff": [3, 4],
          "loads": [{"id": "a", "alpha": 1, "beta": 2, "delta": 2, "power": 1}]}


def naive_feasible(inst):
    """Scan every load-variable assignment."""
    keys = inst.load_keys
    out = []
    for bits in itertools.product((0, 1), repeat=len(keys)):
        s = ScheduleAssignment(dict(zip(keys, bits)))
        if is_feasible(inst, s):
            out.append((cost_of_schedule(inst, s), "".join(map(str, bits))))
    return sorted(out)


def test_reference_table(inst):
    records = enumerate_feasible(inst)
    assert [(r.bitstring, r.cost) for r in records] == TABLE_I
    assert [r.rank for r in records] == list(range(1, 10))
    assert dict(records[0].schedule) == {
        ("1", 1): 1, ("1", 2): 1, ("1", 3): 0, ("2", 1): 0, ("2", 2): 1, ("2", 3): 0
    }


def test_forced_instance():
    records = enumerate_feasible(instance_from_dict(FORCED))
    assert [(r.bitstring, r.cost) for r in records] == [("11", 7)]


def test_enumeration_bound():
    with pytest.raises(ProblemSizeError):
        enumerate_feasible(widened_fixture(16))


def test_count_is_product_of_binomials(inst):
    predicted = 1
    for load in inst.loads:
        predicted *= comb(load.window_length, load.delta)
    assert predicted == 9 == len(enumerate_feasible(inst))


def test_matches_naive_scan(rng):
    for _ in range(30):
        inst = random_instance(rng, max_vars=20)
        got = [(r.cost, r.bitstring) for r in enumerate_feasible(inst)]
        assert got == naive_feasible(inst)


def test_two_spin_minimum():
    assert brute_force_minimum(IsingModel(2, (0.5, 0.0), {(0, 1): -1.0}, 0.5)) == ("11", -1.0)


def test_reference_ising_minimum(inst):
    _, qubo, ising = reduce_instance(inst)
    bits, value = brute_force_minimum(ising)
    assert value == 107
    assert bits[:6] == "110010"
    assert brute_force_minimum(qubo) == (bits, value)


def test_zero_model_ties_go_to_all_zeros():
    assert brute_force_minimum(IsingModel(3, (0.0,) * 3, {}, 4.0)) == ("000", 4.0)


def test_lexicographic_tie_break():
    # minima at x = 01 and 10; "01" wins although its basis index is larger
    qubo = QuboModel(2, (-1.0, -1.0), {(0, 1): 1.0})
    assert brute_force_minimum(qubo) == ("01", -1.0)


def test_brute_force_bound():
    with pytest.raises(ProblemSizeError):
        brute_force_minimum(IsingModel(31, (0.0,) * 31, {}, 0.0))


def test_brute_force_matches_itertools(rng):
    for n in (1, 4, 7):
        lin = tuple(rng.integers(-5, 6, size=n).astype(float))
        quad = {(i, j): float(rng.integers(-5, 6)) for i in range(n) for j in range(i + 1, n)}
        qubo = QuboModel(n, lin, quad, 1.5)
        best = min(
            (qubo_value(qubo, b), "".join(map(str, b))) for b in itertools.product((0, 1), repeat=n)
        )
        assert brute_force_minimum(qubo) == (best[1], best[0])


def test_verify_reference(inst):
    report = verify_reduction(inst)
    assert report.passed, str(report)
    assert report.exhaustive
    assert {c.name for c in report.checks} == {
        "qubo_equivalence", "ising_equivalence", "penalty_separation", "optimum_decodes"
    }


def test_verify_zero_penalty_fails(inst):
    report = verify_reduction(inst, penalty=0)
    sep = report.check("penalty_separation")
    assert not sep.passed
    assert sep.witness is not None and len(sep.witness) == 12
    assert not report.passed


def test_verify_trivial():
    one = {"hours": 1, "e_max": 1, "tariff": [9],
           "loads": [{"id": "a", "alpha": 1, "beta": 1, "delta": 1, "power": 1}]}
    assert verify_reduction(instance_from_dict(one)).passed


def test_reduced_optimum_equals_enumerated_optimum(rng):
    for _ in range(25):
        inst = random_instance(rng, max_vars=20)
        records = enumerate_feasible(inst)
        _, qubo, _ = reduce_instance(inst)
        bits, value = brute_force_minimum(qubo)
        if records:
            assert value == records[0].cost
            assert is_feasible(inst, ScheduleAssignment.from_bits(inst, [int(c) for c in bits]))
        assert verify_reduction(inst).passed


def test_csv_columns(inst):
    text = records_to_csv(inst, enumerate_feasible(inst))
    lines = text.splitlines()
    assert lines[0] == "rank,x_1^1,x_1^2,x_1^3,x_2^1,x_2^2,x_2^3,cost_cents,cost_eur"
    assert lines[1] == "1,1,1,0,0,1,0,107,1.07"
    assert len(lines) == 10
