from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from prosumer_qaoa.problem_model import fixture_a, instance_from_dict

REPO = Path(__file__).resolve().parents[1]
FIXTURE_A_PATH = REPO / "instances" / "fixture_a.json"

# Feasible schedules of the reference instance: x_1^1..x_1^3, x_2^1..x_2^3, cost in cents.
TABLE_I = [
    ("110010", 107),
    ("110100", 108),
    ("110001", 110),
    ("011010", 111),
    ("011100", 112),
    ("101010", 113),
    ("011001", 114),
    ("101100", 114),
    ("101001", 116),
]


@pytest.fixture
def inst():
    return fixture_a()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def num_vars_of(doc: dict) -> int:
    slack_bits = math.ceil(math.log2(doc["e_max"] + 1))
    loads = sum(l["beta"] - l["alpha"] + 1 for l in doc["loads"])
    return loads + slack_bits * doc["hours"]


def random_instance_doc(rng: np.random.Generator, max_vars: int = 14) -> dict:
    """Random valid instance document with at most ``max_vars`` binary variables."""
    while True:
        hours = int(rng.integers(1, 4))
        e_max = int(rng.integers(1, 5))
        loads = []
        for k in range(int(rng.integers(1, 4))):
            alpha = int(rng.integers(1, hours + 1))
            beta = int(rng.integers(alpha, hours + 1))
            loads.append(
                {
                    "id": f"L{k}",
                    "alpha": alpha,
                    "beta": beta,
                    "delta": int(rng.integers(1, beta - alpha + 2)),
                    "power": int(rng.integers(1, e_max + 1)),
                }
            )
        doc = {
            "hours": hours,
            "e_max": e_max,
            "tariff": [int(p) for p in rng.integers(0, 30, size=hours)],
            "loads": loads,
        }
        if num_vars_of(doc) <= max_vars:
            return doc


def random_instance(rng: np.random.Generator, max_vars: int = 14):
    return instance_from_dict(random_instance_doc(rng, max_vars))


@st.composite
def instance_docs(draw, max_hours: int = 3, max_loads: int = 3, max_e: int = 4):
    hours = draw(st.integers(1, max_hours))
    e_max = draw(st.integers(1, max_e))
    loads = []
    for k in range(draw(st.integers(1, max_loads))):
        alpha = draw(st.integers(1, hours))
        beta = draw(st.integers(alpha, hours))
        loads.append(
            {
                "id": f"L{k}",
                "alpha": alpha,
                "beta": beta,
                "delta": draw(st.integers(1, beta - alpha + 1)),
                "power": draw(st.integers(1, e_max)),
            }
        )
    tariff = draw(st.lists(st.integers(0, 40), min_size=hours, max_size=hours))
    return {"hours": hours, "e_max": e_max, "tariff": tariff, "loads": loads}
