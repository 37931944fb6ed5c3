"""Prosumer load-scheduling instances and their classical semantics.

An instance describes a single user with a handful of interruptible loads,
an hourly tariff and a cap on the total power drawn in any hour. Every load
has to run for exactly ``delta`` one-hour slots inside its preference window
``[alpha, beta]`` (inclusive). Cost is integer cents: tariff (cents/kWh) times
load power (kW) times one hour.
"""

from __future__ import annotations

import json
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from importlib import resources
from typing import Any


class InstanceError(ValueError):
    """Base class for problems with an instance document."""


class InstanceParseError(InstanceError):
    """The document is not well-formed or a field has the wrong type."""


class InstanceValidationError(InstanceError):
    """The document parsed but breaks an instance invariant."""


class ScheduleKeyError(ValueError):
    """Schedule keys do not match the instance windows."""


@dataclass(frozen=True)
class Load:
    id: str
    alpha: int
    beta: int
    delta: int
    power: int

    @property
    def window(self) -> range:
        """Hours the load may run in, ascending."""
        return range(self.alpha, self.beta + 1)

    @property
    def window_length(self) -> int:
        return self.beta - self.alpha + 1


@dataclass(frozen=True)
class ProsumerInstance:
    loads: tuple[Load, ...]
    hours: tuple[int, ...]
    tariff: Mapping[int, int]
    e_max: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "hours", tuple(self.hours))
        object.__setattr__(self, "tariff", dict(self.tariff))
        _validate(self)

    def __hash__(self) -> int:
        return hash((self.loads, self.hours, tuple(sorted(self.tariff.items())), self.e_max))

    @property
    def num_hours(self) -> int:
        return len(self.hours)

    @property
    def load_keys(self) -> list[tuple[str, int]]:
        """``(load id, hour)`` pairs in canonical variable order."""
        return [(load.id, h) for load in self.loads for h in load.window]

    @property
    def num_load_vars(self) -> int:
        return sum(load.window_length for load in self.loads)

    def load(self, load_id: str) -> Load:
        for load in self.loads:
            if load.id == load_id:
                return load
        raise KeyError(load_id)

    def with_changes(self, **changes: Any) -> ProsumerInstance:
        """Return a modified copy, revalidated."""
        doc = instance_to_dict(self)
        doc.update(changes)
        return instance_from_dict(doc)


def _validate(inst: ProsumerInstance) -> None:
    if not inst.loads:
        raise InstanceValidationError("loads: at least one load is required")
    if not inst.hours:
        raise InstanceValidationError("hours: at least one hour is required")
    if list(inst.hours) != list(range(1, len(inst.hours) + 1)):
        raise InstanceValidationError("hours: must be 1..|H| in ascending order")
    if inst.e_max < 1:
        raise InstanceValidationError(f"e_max: must be >= 1, got {inst.e_max}")
    for h in inst.hours:
        if h not in inst.tariff:
            raise InstanceValidationError(f"tariff: no price for hour {h}")
        if inst.tariff[h] < 0:
            raise InstanceValidationError(f"tariff[{h}]: price must be >= 0, got {inst.tariff[h]}")
    seen: set[str] = set()
    last = inst.hours[-1]
    for load in inst.loads:
        where = f"load {load.id!r}"
        if load.id in seen:
            raise InstanceValidationError(f"{where}: duplicate load id")
        seen.add(load.id)
        if not (1 <= load.alpha <= load.beta <= last):
            raise InstanceValidationError(
                f"{where}: window [{load.alpha}, {load.beta}] must lie within hours 1..{last}"
            )
        if load.delta < 1:
            raise InstanceValidationError(f"{where}: duration must be >= 1, got {load.delta}")
        if load.delta > load.window_length:
            raise InstanceValidationError(
                f"{where}: duration {load.delta} exceeds window of {load.window_length} slot(s)"
            )
        if not (1 <= load.power <= inst.e_max):
            raise InstanceValidationError(
                f"{where}: power {load.power} must be in 1..e_max ({inst.e_max})"
            )


class ScheduleAssignment(Mapping):
    """On/off bits keyed by ``(load id, hour)``, defined exactly on the windows."""

    __slots__ = ("_bits",)

    def __init__(self, bits: Mapping[tuple[str, int], int]):
        clean = {}
        for key, value in bits.items():
            if value not in (0, 1):
                raise ValueError(f"schedule bit for {key} must be 0 or 1, got {value!r}")
            clean[(str(key[0]), int(key[1]))] = int(value)
        self._bits = clean

    @classmethod
    def from_bits(cls, instance: ProsumerInstance, bits) -> ScheduleAssignment:
        """Build from a flat bit sequence in canonical load-variable order.

        Extra trailing bits (slack variables) are ignored.
        """
        keys = instance.load_keys
        if len(bits) < len(keys):
            raise ScheduleKeyError(f"need {len(keys)} load bits, got {len(bits)}")
        return cls({k: int(bits[i]) for i, k in enumerate(keys)})

    @classmethod
    def from_rows(cls, instance: ProsumerInstance, rows: Mapping[str, Any]) -> ScheduleAssignment:
        """Build from per-load bit rows over each load's window, e.g. ``{"1": (1, 1, 0)}``."""
        bits = {}
        for load in instance.loads:
            row = rows[load.id]
            if len(row) != load.window_length:
                raise ScheduleKeyError(
                    f"load {load.id!r}: expected {load.window_length} bits, got {len(row)}"
                )
            for h, b in zip(load.window, row):
                bits[(load.id, h)] = b
        return cls(bits)

    def to_bits(self, instance: ProsumerInstance) -> list[int]:
        _check_keys(instance, self)
        return [self._bits[k] for k in instance.load_keys]

    def bitstring(self, instance: ProsumerInstance) -> str:
        return "".join(str(b) for b in self.to_bits(instance))

    def __getitem__(self, key: tuple[str, int]) -> int:
        return self._bits[key]

    def __iter__(self) -> Iterator[tuple[str, int]]:
        return iter(self._bits)

    def __len__(self) -> int:
        return len(self._bits)

    def __hash__(self) -> int:
        return hash(frozenset(self._bits.items()))

    def __repr__(self) -> str:
        return f"ScheduleAssignment({self._bits!r})"


def _check_keys(instance: ProsumerInstance, schedule: Mapping) -> None:
    expected = set(instance.load_keys)
    got = set(schedule.keys())
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise ScheduleKeyError(f"schedule keys mismatch: missing={missing} extra={extra}")


def cost_of_schedule(instance: ProsumerInstance, schedule: Mapping[tuple[str, int], int]) -> int:
    """Total energy cost in cents."""
    _check_keys(instance, schedule)
    total = 0
    for load in instance.loads:
        for h in load.window:
            if schedule[(load.id, h)]:
                total += instance.tariff[h] * load.power
    return total


@dataclass(frozen=True)
class Violation:
    kind: str  # "power" or "duration"
    subject: str
    actual: int
    limit: int

    def __str__(self) -> str:
        if self.kind == "power":
            return f"hour {self.subject}: power {self.actual} > e_max {self.limit}"
        return f"load {self.subject}: on for {self.actual} h, requires exactly {self.limit} h"


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.feasible


def is_feasible(instance: ProsumerInstance, schedule: Mapping[tuple[str, int], int]) -> FeasibilityReport:
    """Check the hourly power cap and the exact-duration requirement of every load."""
    _check_keys(instance, schedule)
    violations = []
    for h in instance.hours:
        drawn = sum(
            load.power * schedule[(load.id, h)] for load in instance.loads if h in load.window
        )
        if drawn > instance.e_max:
            violations.append(Violation("power", str(h), drawn, instance.e_max))
    for load in instance.loads:
        on = sum(schedule[(load.id, h)] for h in load.window)
        if on != load.delta:
            violations.append(Violation("duration", load.id, on, load.delta))
    return FeasibilityReport(not violations, tuple(violations))


# -- instance documents -----------------------------------------------------

_LOAD_FIELDS = ("id", "alpha", "beta", "delta", "power")


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool):
        raise InstanceParseError(f"{where}: expected an integer, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        raise InstanceParseError(
            f"{where}: fractional value {value} not allowed; rescale units "
            "(e.g. multiply every value by 10) so all quantities are integers"
        )
    raise InstanceParseError(f"{where}: expected an integer, got {type(value).__name__}")


def instance_from_dict(doc: Mapping[str, Any]) -> ProsumerInstance:
    if not isinstance(doc, Mapping):
        raise InstanceParseError("document: top level must be an object")
    for key in ("hours", "e_max", "tariff", "loads"):
        if key not in doc:
            raise InstanceParseError(f"{key}: missing required field")
    n_hours = _as_int(doc["hours"], "hours")
    if n_hours < 1:
        raise InstanceValidationError(f"hours: must be >= 1, got {n_hours}")
    e_max = _as_int(doc["e_max"], "e_max")
    tariff = doc["tariff"]
    if not isinstance(tariff, list):
        raise InstanceParseError("tariff: expected an array of integers")
    if len(tariff) != n_hours:
        raise InstanceValidationError(
            f"tariff: expected {n_hours} entries (one per hour), got {len(tariff)}"
        )
    prices = {h: _as_int(p, f"tariff[{h - 1}]") for h, p in enumerate(tariff, start=1)}
    raw_loads = doc["loads"]
    if not isinstance(raw_loads, list):
        raise InstanceParseError("loads: expected an array of objects")
    loads = []
    for i, raw in enumerate(raw_loads):
        where = f"loads[{i}]"
        if not isinstance(raw, Mapping):
            raise InstanceParseError(f"{where}: expected an object")
        for key in _LOAD_FIELDS:
            if key not in raw:
                raise InstanceParseError(f"{where}.{key}: missing required field")
        if not isinstance(raw["id"], (str, int)) or isinstance(raw["id"], bool):
            raise InstanceParseError(f"{where}.id: expected a string")
        loads.append(
            Load(
                id=str(raw["id"]),
                alpha=_as_int(raw["alpha"], f"{where}.alpha"),
                beta=_as_int(raw["beta"], f"{where}.beta"),
                delta=_as_int(raw["delta"], f"{where}.delta"),
                power=_as_int(raw["power"], f"{where}.power"),
            )
        )
    return ProsumerInstance(
        loads=tuple(loads), hours=tuple(range(1, n_hours + 1)), tariff=prices, e_max=e_max
    )


def instance_to_dict(instance: ProsumerInstance) -> dict[str, Any]:
    return {
        "hours": instance.num_hours,
        "e_max": instance.e_max,
        "tariff": [instance.tariff[h] for h in instance.hours],
        "loads": [
            {"id": l.id, "alpha": l.alpha, "beta": l.beta, "delta": l.delta, "power": l.power}
            for l in instance.loads
        ],
    }


def load_instance(text: str) -> ProsumerInstance:
    """Parse and validate a JSON instance document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc)


def dump_instance(instance: ProsumerInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def read_instance(path) -> ProsumerInstance:
    with open(path, encoding="utf-8") as fh:
        return load_instance(fh.read())


def fixture_a() -> ProsumerInstance:
    """The two-load, three-hour reference instance shipped with the package."""
    text = resources.files("prosumer_qaoa").joinpath("data/fixture_a.json").read_text("utf-8")
    return load_instance(text)


def widened_fixture(n_hours: int) -> ProsumerInstance:
    """Reference instance stretched to ``n_hours``; tariff repeats 22/21/24."""
    base = fixture_a()
    pattern = [base.tariff[h] for h in base.hours]
    doc = instance_to_dict(base)
    doc["hours"] = n_hours
    doc["tariff"] = [pattern[i % len(pattern)] for i in range(n_hours)]
    for load in doc["loads"]:
        load["alpha"], load["beta"] = 1, n_hours
    return instance_from_dict(doc)
