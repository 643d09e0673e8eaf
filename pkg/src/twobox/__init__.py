"""Two spring-suspended boxes exchanging liquid drops: a mechanical analog of
the two-capacitor paradox with an exact per-step energy ledger."""

from .capacitor import (
    AnalogyMap,
    CapacitorCircuit,
    RCSeries,
    capacitor_energy_breakdown,
    dissipated_closed_form,
    electrical_to_mechanical,
    mechanical_to_electrical,
    rc_transient_closed_form,
    rc_transient_numeric,
)
from .cli import ScenarioConfig, load_config, run_cli
from .core import (
    MAX_DROP_COUNT,
    SPEED_OF_LIGHT,
    DomainError,
    EnergyBreakdown,
    SpringBoxParams,
    TransferPlan,
    delta1_paper_sum,
    delta2_paper_sum,
    elastic_energy,
    energy_breakdown,
    equilibrium_position,
    photon_drop_mass,
)
from .transfer import (
    BOX1,
    BOX2,
    AuditReport,
    Check,
    Ledger,
    StepRecord,
    SweepRow,
    TransferSummary,
    audit_ledger,
    convergence_slope,
    convergence_sweep,
    simulate_transfer,
)

__version__ = "0.1.0"
