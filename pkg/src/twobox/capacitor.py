"""Two identical capacitors, one charged, joined through a series resistor.

Also holds the parameter map to the spring-box system: charge <-> weight
(Q = M g), capacitance <-> stiffness (C = k), so that voltage Q/C maps to the
equilibrium extension M g / k and Q^2 / 2C to M^2 g^2 / 2k.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .core import DomainError, EnergyBreakdown, SpringBoxParams, _require_positive


@dataclass(frozen=True)
class CapacitorCircuit:
    capacitance: float
    initial_charge: float
    resistance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "capacitance", _require_positive("capacitance", self.capacitance))
        object.__setattr__(self, "initial_charge", _require_positive("initial_charge", self.initial_charge))
        r = float(self.resistance)
        if not math.isfinite(r) or r < 0.0:
            raise DomainError(f"resistance must be finite and >= 0, got {self.resistance!r}")
        object.__setattr__(self, "resistance", r)

    @property
    def time_constant(self) -> float:
        """Decay time of the charge imbalance, R C / 2."""
        return 0.5 * self.resistance * self.capacitance


@dataclass(frozen=True)
class AnalogyMap:
    """Unit conversion factors of the mechanical/electrical dictionary.

    All three are 1 in SI units: 1 C per N of weight, 1 F per N/m of
    stiffness, 1 V per m of extension.
    """

    charge_per_weight: float = 1.0
    capacitance_per_stiffness: float = 1.0
    voltage_per_displacement: float = 1.0

    def energy_residual(self, params: SpringBoxParams) -> float:
        """Relative mismatch between Q^2/2C and M^2 g^2/2k under the map."""
        c = mechanical_to_electrical(params)
        e_el = c.initial_charge**2 / (2.0 * c.capacitance)
        e_mech = params.weight**2 / (2.0 * params.stiffness)
        return abs(e_el - e_mech) / e_mech


def capacitor_energy_breakdown(circuit: CapacitorCircuit) -> EnergyBreakdown:
    c, q0 = circuit.capacitance, circuit.initial_charge
    initial = q0 * q0 / (2.0 * c)
    # charge splits evenly once both voltages match
    per_cap = (0.5 * q0) ** 2 / (2.0 * c)
    final = 2.0 * per_cap
    return EnergyBreakdown(
        initial_total=initial + 0.0,
        initial_box1=initial,
        final_per_box=per_cap,
        final_total=final,
        delta_total=final - initial,
        domain="electrical",
    )


def _require_resistive(circuit: CapacitorCircuit) -> None:
    if circuit.resistance <= 0.0:
        raise DomainError(
            "resistance must be > 0 for a transient; the ideal circuit only has "
            "endpoint energies (use capacitor_energy_breakdown)"
        )


def rc_transient_closed_form(circuit: CapacitorCircuit, t: float) -> tuple:
    """Charges on both capacitors and the resistor power at time ``t``."""
    _require_resistive(circuit)
    if not t >= 0.0:
        raise DomainError(f"t must be >= 0, got {t!r}")
    c, q0, r = circuit.capacitance, circuit.initial_charge, circuit.resistance
    decay = math.exp(-t / circuit.time_constant)
    q1 = 0.5 * q0 * (1.0 + decay)
    q2 = 0.5 * q0 * (1.0 - decay)
    current = (q1 - q2) / (r * c)
    return q1, q2, current * current * r


def dissipated_closed_form(circuit: CapacitorCircuit) -> float:
    """Energy burnt in the resistor over the whole transient, Q0^2 / 4C."""
    return circuit.initial_charge**2 / (4.0 * circuit.capacitance)


@dataclass(frozen=True)
class RCSeries:
    t: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    cumulative_dissipated: np.ndarray

    def __len__(self):
        return len(self.t)

    def write_csv(self, fh) -> None:
        fh.write("t,q1,q2,cumulative_dissipated\n")
        cols = [list(map(repr, a.tolist())) for a in (self.t, self.q1, self.q2, self.cumulative_dissipated)]
        fh.writelines(",".join(row) + "\n" for row in zip(*cols))

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def rc_transient_numeric(circuit: CapacitorCircuit, step: float, horizon: float) -> RCSeries:
    """Fixed-step RK4 integration of the discharge, sampled every ``step``.

    The state is (q1, q2, W) with dq1/dt = -I, dq2/dt = I, dW/dt = I^2 R and
    I = (q1 - q2) / (R C). Requires ``step <= tau/50`` and
    ``horizon >= 10 tau`` where tau = R C / 2.
    """
    _require_resistive(circuit)
    tau = circuit.time_constant
    if not 0.0 < step <= tau / 50.0 * (1.0 + 1e-12):
        raise DomainError(f"step must satisfy 0 < step <= tau/50 = {tau / 50.0!r}, got {step!r}")
    if not horizon >= 10.0 * tau * (1.0 - 1e-12):
        raise DomainError(f"horizon must be >= 10 tau = {10.0 * tau!r}, got {horizon!r}")

    c, r = circuit.capacitance, circuit.resistance
    rc = r * c

    def rhs(q1, q2):
        i = (q1 - q2) / rc
        return -i, i, i * i * r

    n_steps = int(math.ceil(horizon / step * (1.0 - 1e-12)))
    t = np.arange(n_steps + 1) * step
    q1s = np.empty(n_steps + 1)
    q2s = np.empty(n_steps + 1)
    ws = np.empty(n_steps + 1)
    q1, q2, w = circuit.initial_charge, 0.0, 0.0
    q1s[0], q2s[0], ws[0] = q1, q2, w
    h = step
    for j in range(1, n_steps + 1):
        a1, b1, c1 = rhs(q1, q2)
        a2, b2, c2 = rhs(q1 + 0.5 * h * a1, q2 + 0.5 * h * b1)
        a3, b3, c3 = rhs(q1 + 0.5 * h * a2, q2 + 0.5 * h * b2)
        a4, b4, c4 = rhs(q1 + h * a3, q2 + h * b3)
        q1 += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        q2 += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        w += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        q1s[j], q2s[j], ws[j] = q1, q2, w
    return RCSeries(t, q1s, q2s, ws)


def mechanical_to_electrical(params: SpringBoxParams) -> CapacitorCircuit:
    return CapacitorCircuit(capacitance=params.stiffness, initial_charge=params.weight, resistance=0.0)


def electrical_to_mechanical(circuit: CapacitorCircuit, gravity: float) -> SpringBoxParams:
    g = _require_positive("gravity", gravity)
    return SpringBoxParams(total_mass=circuit.initial_charge / g, stiffness=circuit.capacitance, gravity=g)
