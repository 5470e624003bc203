"""Fuel and budgets shared by the reducer, typechecker, kernel and search."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional


class FuelExhausted(Exception):
    """Raised when a computation runs out of fuel or time.

    ``trace`` holds the reduction steps performed before exhaustion, when the
    computation was a reduction.
    """

    def __init__(self, message: str = "fuel exhausted", trace=None, reason: str = "fuel"):
        super().__init__(message)
        self.trace = list(trace or [])
        self.reason = reason


class Fuel:
    """A mutable step counter, optionally paired with a wall-clock deadline."""

    __slots__ = ("remaining", "spent", "deadline")

    def __init__(self, steps: int, deadline: Optional[float] = None):
        if steps < 0:
            raise ValueError("fuel must be non-negative")
        self.remaining = steps
        self.spent = 0
        self.deadline = deadline

    def spend(self, n: int = 1) -> None:
        if self.remaining < n:
            raise FuelExhausted(reason="fuel")
        self.remaining -= n
        self.spent += n
        if self.deadline is not None and (self.spent & 63) == 0:
            if time.monotonic() > self.deadline:
                raise FuelExhausted("timeout", reason="timeout")

    def check_deadline(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise FuelExhausted("timeout", reason="timeout")


def as_fuel(fuel) -> Fuel:
    if fuel is None:
        return Fuel(DEFAULT_FUEL)
    if isinstance(fuel, Fuel):
        return fuel
    return Fuel(int(fuel))


DEFAULT_FUEL = 1_000_000
DEFAULT_DEPTH = 64
DEFAULT_TIMEOUT_MS = 5000


@dataclass(frozen=True)
class Budget:
    """Resource vector: fuel steps, search depth (proof size bound), timeout."""

    fuel: int = DEFAULT_FUEL
    depth: int = DEFAULT_DEPTH
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    def __post_init__(self):
        if self.fuel < 0 or self.depth < 0 or self.timeout_ms < 0:
            raise ValueError("budget components must be non-negative")

    def __le__(self, other: "Budget") -> bool:
        return (
            self.fuel <= other.fuel
            and self.depth <= other.depth
            and self.timeout_ms <= other.timeout_ms
        )

    def start(self) -> Fuel:
        """A fresh fuel pool whose deadline starts now."""
        return Fuel(self.fuel, time.monotonic() + self.timeout_ms / 1000.0)


# --- outcomes of bounded decision procedures --------------------------------


@dataclass(frozen=True)
class Found:
    proof: object


@dataclass(frozen=True)
class Refuted:
    """The goal is refuted; ``counterproof`` inhabits ``goal -> Empty``."""

    counterproof: object


@dataclass(frozen=True)
class Unknown:
    """No answer within budget.

    ``reason`` is ``"fuel"`` or ``"timeout"`` when a resource ran out,
    ``"depth"`` when the size bound was searched exhaustively without an
    answer, and ``"undecided"`` when no decision procedure applies.
    """

    reason: str = "fuel"


Outcome = Found | Refuted | Unknown
