"""Closed-form energetics of two spring-suspended boxes sharing a liquid.

Box 1 starts holding all of the liquid (mass M), box 2 starts empty. The
liquid moves over in N equal drops until each box holds M/2. Positions are
magnitudes of the spring extension measured from the unloaded length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact SI value

#: Largest drop count accepted by the simulator.
MAX_DROP_COUNT = 2**32

_PLAN_RTOL = 1e-12


class DomainError(ValueError):
    """Raised when an input violates a physical or structural precondition."""


def _require_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class SpringBoxParams:
    """Total liquid mass (kg), spring stiffness (N/m) and gravity (m/s^2)."""

    total_mass: float
    stiffness: float
    gravity: float

    def __post_init__(self):
        for name in ("total_mass", "stiffness", "gravity"):
            object.__setattr__(self, name, _require_positive(name, getattr(self, name)))

    @property
    def weight(self) -> float:
        return self.total_mass * self.gravity


@dataclass(frozen=True)
class TransferPlan:
    """Discretisation of the transfer into ``drop_count`` equal drops.

    Use :meth:`from_drops` or :meth:`from_photon` rather than the constructor;
    they derive ``drop_mass`` and ``step`` from the parameters.
    """

    drop_count: int
    drop_mass: float
    step: float
    photon_energy: Optional[float] = None

    def __post_init__(self):
        n = self.drop_count
        if isinstance(n, bool) or not isinstance(n, int):
            raise DomainError(f"drop_count must be an even integer >= 2, got {n!r}")
        if n < 2 or n % 2:
            raise DomainError(
                f"drop_count must be an even integer >= 2 (the transfer stops after "
                f"N/2 drops), got {n}"
            )
        _require_positive("drop_mass", self.drop_mass)
        _require_positive("step", self.step)
        if self.photon_energy is not None:
            _require_positive("photon_energy", self.photon_energy)

    @property
    def mass_source(self) -> str:
        return "liquid" if self.photon_energy is None else "photon"

    @property
    def half(self) -> int:
        """Number of drops actually transferred."""
        return self.drop_count // 2

    @classmethod
    def from_drops(cls, params: SpringBoxParams, drop_count: int) -> "TransferPlan":
        if isinstance(drop_count, float) and drop_count.is_integer():
            drop_count = int(drop_count)
        if isinstance(drop_count, bool) or not isinstance(drop_count, int):
            raise DomainError(f"drop_count must be an even integer >= 2, got {drop_count!r}")
        if drop_count < 2 or drop_count % 2:
            raise DomainError(
                f"drop_count must be an even integer >= 2 (the transfer stops after "
                f"N/2 drops), got {drop_count}"
            )
        m = params.total_mass / drop_count
        return cls(drop_count, m, m * params.gravity / params.stiffness)

    @classmethod
    def from_photon(cls, params: SpringBoxParams, photon_energy: float) -> "TransferPlan":
        """Plan in which every transferred quantum is a photon of the given energy."""
        m = photon_drop_mass(photon_energy)
        ratio = params.total_mass / m
        if not math.isfinite(ratio) or ratio > 2**62:
            raise DomainError(f"total_mass / photon mass = {ratio:.6g} is not a usable drop count")
        n = round(ratio)
        if n < 2 or abs(n * m - params.total_mass) > _PLAN_RTOL * params.total_mass:
            raise DomainError(
                f"total_mass is not an integer multiple of the photon mass "
                f"({ratio!r} photons); drop_count must be an even integer"
            )
        if n % 2:
            raise DomainError(f"photon count {n} is odd; drop_count must be an even integer")
        return cls(n, m, m * params.gravity / params.stiffness, float(photon_energy))

    def check_consistent(self, params: SpringBoxParams) -> None:
        """Raise :class:`DomainError` unless ``m*N == M`` and ``q == m*g/k``."""
        if abs(self.drop_mass * self.drop_count - params.total_mass) > _PLAN_RTOL * params.total_mass:
            raise DomainError(
                f"plan inconsistent with params: drop_mass * drop_count = "
                f"{self.drop_mass * self.drop_count!r} != total_mass {params.total_mass!r}"
            )
        q = self.drop_mass * params.gravity / params.stiffness
        if abs(self.step - q) > _PLAN_RTOL * q:
            raise DomainError(f"plan inconsistent with params: step {self.step!r} != m*g/k = {q!r}")


@dataclass(frozen=True)
class EnergyBreakdown:
    initial_total: float
    initial_box1: float
    final_per_box: float
    final_total: float
    delta_total: float
    domain: str = "mechanical"

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "initial_total": self.initial_total,
            "initial_box1": self.initial_box1,
            "final_per_box": self.final_per_box,
            "final_total": self.final_total,
            "delta_total": self.delta_total,
        }


def equilibrium_position(params: SpringBoxParams, mass_fraction: float = 1.0) -> float:
    """Spring extension at which a box holding ``mass_fraction * M`` hangs still."""
    f = float(mass_fraction)
    if not 0.0 <= f <= 1.0:
        raise DomainError(f"mass_fraction must lie in [0, 1], got {mass_fraction!r}")
    return f * params.total_mass * params.gravity / params.stiffness


def elastic_energy(stiffness: float, displacement: float) -> float:
    stiffness = _require_positive("stiffness", stiffness)
    x = float(displacement)
    if not x >= 0.0:
        raise DomainError(f"displacement must be non-negative, got {displacement!r}")
    return 0.5 * stiffness * x * x


def energy_breakdown(params: SpringBoxParams) -> EnergyBreakdown:
    """Elastic energies before and after the boxes reach equal masses."""
    e_in1 = elastic_energy(params.stiffness, equilibrium_position(params, 1.0))
    per_box = elastic_energy(params.stiffness, equilibrium_position(params, 0.5))
    final = 2.0 * per_box
    return EnergyBreakdown(
        initial_total=e_in1 + 0.0,
        initial_box1=e_in1,
        final_per_box=per_box,
        final_total=final,
        delta_total=final - e_in1,
    )


def _kq2(params: SpringBoxParams, plan: TransferPlan) -> float:
    plan.check_consistent(params)
    return params.stiffness * plan.step * plan.step


def delta2_paper_sum(params: SpringBoxParams, plan: TransferPlan) -> float:
    """Gain of box 2 summing the large-n increments ``n k q^2`` over n = 1..N/2."""
    h = plan.half
    return 0.5 * h * (1 + h) * _kq2(params, plan)


def delta1_paper_sum(params: SpringBoxParams, plan: TransferPlan) -> float:
    """Loss of box 1 summing the large-n increments over n = 1..N/2.

    Box 1 loses ``(N - n + 1) k q^2`` per drop in this approximation, so the
    summands run N, N-1, ..., N/2 + 1.
    """
    h = plan.half
    return -0.5 * h * (1 + 3 * h) * _kq2(params, plan)


def photon_drop_mass(photon_energy: float) -> float:
    """Mass equivalent E/c^2 of a photon leaving the box."""
    e = _require_positive("photon_energy", photon_energy)
    return e / (SPEED_OF_LIGHT * SPEED_OF_LIGHT)
