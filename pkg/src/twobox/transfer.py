"""Drop-by-drop transfer between the two boxes with a per-step energy ledger.

Every drop produces two hops: box 1 loses mass ``m`` and rises by ``q``,
box 2 gains mass ``m`` and sinks by ``q``. Each hop is quasi-static, so the
box arrives at its new equilibrium at rest and the ledger closes as

    delta_elastic_exact = gravity_work - settle_dissipation

with ``settle_dissipation = k q^2 / 2`` for every hop. The kinetic energy of
the falling drop is not modelled.

Records are kept column-wise in numpy arrays; :class:`Ledger` hands out
:class:`StepRecord` views on demand.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .core import (
    MAX_DROP_COUNT,
    DomainError,
    SpringBoxParams,
    TransferPlan,
    delta1_paper_sum,
    delta2_paper_sum,
    elastic_energy,
    energy_breakdown,
)

BOX1 = "Box1"
BOX2 = "Box2"

#: Ledgers longer than this many records are not retained by default.
DEFAULT_RECORD_LIMIT = 1_000_000

CSV_HEADER = (
    "drop_index",
    "box",
    "mass_before",
    "mass_after",
    "position_before",
    "position_after",
    "delta_elastic_exact",
    "delta_elastic_paper",
    "gravity_work",
    "settle_dissipation",
)
_FLOAT_COLUMNS = CSV_HEADER[2:]

_CHUNK_DROPS = 1 << 18


@dataclass(frozen=True)
class StepRecord:
    drop_index: int
    box: str
    mass_before: float
    mass_after: float
    position_before: float
    position_after: float
    delta_elastic_exact: float
    delta_elastic_paper: float
    gravity_work: float
    settle_dissipation: float


class Ledger(Sequence):
    """Immutable, column-oriented list of :class:`StepRecord`.

    Records are ordered by drop, box 1 before box 2 for each drop.
    ``box`` is stored as 1 or 2.
    """

    def __init__(self, columns: dict):
        cols = {}
        for name in ("drop_index", "box") + _FLOAT_COLUMNS:
            arr = np.array(columns[name], copy=True)
            arr.flags.writeable = False
            cols[name] = arr
        n = {len(a) for a in cols.values()}
        if len(n) != 1:
            raise ValueError("ledger columns differ in length")
        self._cols = cols

    def __len__(self) -> int:
        return len(self._cols["drop_index"])

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        c = self._cols
        return StepRecord(
            int(c["drop_index"][i]),
            BOX1 if c["box"][i] == 1 else BOX2,
            *(float(c[name][i]) for name in _FLOAT_COLUMNS),
        )

    def __iter__(self) -> Iterator[StepRecord]:
        for i in range(len(self)):
            yield self[i]

    def column(self, name: str) -> np.ndarray:
        return self._cols[name]

    def replace(self, index: int, **values) -> "Ledger":
        """Copy of the ledger with fields of one record overwritten."""
        cols = {k: v.copy() for k, v in self._cols.items()}
        for name, value in values.items():
            if name == "box":
                value = 1 if value == BOX1 else 2
            cols[name][index] = value
        return Ledger(cols)

    def write_csv(self, fh) -> None:
        fh.write(",".join(CSV_HEADER) + "\n")
        c = self._cols
        text = [list(map(str, c["drop_index"].tolist()))]
        text.append([BOX1 if b == 1 else BOX2 for b in c["box"].tolist()])
        text.extend(list(map(repr, c[name].tolist())) for name in _FLOAT_COLUMNS)
        fh.writelines(",".join(row) + "\n" for row in zip(*text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, fh) -> "Ledger":
        rows = list(csv.DictReader(fh))
        cols = {
            "drop_index": np.array([int(r["drop_index"]) for r in rows], dtype=np.int64),
            "box": np.array([1 if r["box"] == BOX1 else 2 for r in rows], dtype=np.int8),
        }
        for name in _FLOAT_COLUMNS:
            cols[name] = np.array([float(r[name]) for r in rows], dtype=np.float64)
        return cls(cols)


@dataclass(frozen=True)
class TransferSummary:
    delta1_exact: float
    delta2_exact: float
    delta_total_exact: float
    delta1_paper: float
    delta2_paper: float
    gravity_work_total: float
    dissipation_total: float
    final_elastic_box1: float
    final_elastic_box2: float
    records: Optional[Ledger] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        d = {
            name: getattr(self, name)
            for name in (
                "delta1_exact",
                "delta2_exact",
                "delta_total_exact",
                "delta1_paper",
                "delta2_paper",
                "gravity_work_total",
                "dissipation_total",
                "final_elastic_box1",
                "final_elastic_box2",
            )
        }
        d["record_count"] = None if self.records is None else len(self.records)
        return d


def _chunk(params: SpringBoxParams, plan: TransferPlan, lo: int, hi: int) -> dict:
    # drops lo..hi-1 (1-based), interleaved box1/box2
    N = plan.drop_count
    m, q = plan.drop_mass, plan.step
    g, k = params.gravity, params.stiffness
    kq2 = k * q * q
    half_kq2 = 0.5 * kq2

    n = np.arange(lo, hi, dtype=np.int64)
    # drop counts held by each box before/after the hop
    b1_before = (N - n + 1).astype(np.float64)
    b1_after = (N - n).astype(np.float64)
    b2_before = (n - 1).astype(np.float64)
    b2_after = n.astype(np.float64)

    def pair(a, b):
        return np.column_stack((a, b)).ravel()

    size = 2 * len(n)
    return {
        "drop_index": np.repeat(n, 2),
        "box": np.tile(np.array([1, 2], dtype=np.int8), len(n)),
        "mass_before": pair(b1_before * m, b2_before * m),
        "mass_after": pair(b1_after * m, b2_after * m),
        "position_before": pair(b1_before * q, b2_before * q),
        "position_after": pair(b1_after * q, b2_after * q),
        # (a^2 - b^2) = (a - b)(a + b) keeps the increment exact in drop units
        "delta_elastic_exact": pair(-(2.0 * b1_after + 1.0) * half_kq2, (2.0 * b2_after - 1.0) * half_kq2),
        "delta_elastic_paper": pair(-b1_before * kq2, b2_after * kq2),
        "gravity_work": pair(-(b1_after * m) * g * q, (b2_after * m) * g * q),
        "settle_dissipation": np.full(size, half_kq2),
    }


class _Totals:
    _names = ("d1", "d2", "p1", "p2", "work", "diss")

    def __init__(self):
        self.parts = {name: [] for name in self._names}

    def add(self, cols: dict) -> None:
        b1 = cols["box"] == 1
        b2 = ~b1
        exact = cols["delta_elastic_exact"]
        paper = cols["delta_elastic_paper"]
        self.parts["d1"].append(math.fsum(exact[b1].tolist()))
        self.parts["d2"].append(math.fsum(exact[b2].tolist()))
        self.parts["p1"].append(math.fsum(paper[b1].tolist()))
        self.parts["p2"].append(math.fsum(paper[b2].tolist()))
        self.parts["work"].append(math.fsum(cols["gravity_work"].tolist()))
        self.parts["diss"].append(math.fsum(cols["settle_dissipation"].tolist()))

    def __getitem__(self, name: str) -> float:
        return math.fsum(self.parts[name])


def simulate_transfer(
    params: SpringBoxParams,
    plan: TransferPlan,
    *,
    keep_records: Optional[bool] = None,
    record_limit: int = DEFAULT_RECORD_LIMIT,
) -> TransferSummary:
    """Run the transfer for drops n = 1 .. N/2 and return totals plus the ledger.

    Parameters
    ----------
    keep_records : bool, optional
        Retain the per-hop ledger. By default it is kept only when the number
        of records (N) does not exceed ``record_limit``; otherwise only the
        totals are accumulated and ``records`` is None.
    """
    plan.check_consistent(params)
    N = plan.drop_count
    if N > MAX_DROP_COUNT:
        raise OverflowError(f"drop_count {N} exceeds the supported maximum 2**32")
    if N % 2:
        raise DomainError(f"drop_count must be an even integer, got {N}")
    if keep_records is None:
        keep_records = N <= record_limit

    totals = _Totals()
    chunks = []
    for lo in range(1, plan.half + 1, _CHUNK_DROPS):
        cols = _chunk(params, plan, lo, min(lo + _CHUNK_DROPS, plan.half + 1))
        totals.add(cols)
        if keep_records:
            chunks.append(cols)

    records = None
    if keep_records:
        records = Ledger({name: np.concatenate([c[name] for c in chunks]) for name in chunks[0]})

    d1, d2 = totals["d1"], totals["d2"]
    k = params.stiffness
    return TransferSummary(
        delta1_exact=d1,
        delta2_exact=d2,
        delta_total_exact=d1 + d2,
        delta1_paper=totals["p1"],
        delta2_paper=totals["p2"],
        gravity_work_total=totals["work"],
        dissipation_total=totals["diss"],
        final_elastic_box1=elastic_energy(k, N * plan.step) + d1,
        final_elastic_box2=elastic_energy(k, 0.0) + d2,
        records=records,
    )


# --------------------------------------------------------------------- audit


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    relative_residual: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "residual": self.residual,
            "relative_residual": self.relative_residual,
        }


@dataclass(frozen=True)
class AuditReport:
    checks: tuple
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "checks": [c.to_dict() for c in self.checks],
        }


def _rel(actual: float, expected: float) -> tuple:
    diff = abs(actual - expected)
    scale = max(abs(actual), abs(expected))
    return diff, (diff / scale if scale > 0 else 0.0)


def _rel_arrays(actual: np.ndarray, expected: np.ndarray, *scales: np.ndarray) -> tuple:
    diff = np.abs(actual - expected)
    if diff.size == 0:
        return 0.0, 0.0
    scale = np.maximum(np.abs(actual), np.abs(expected))
    for s in scales:
        scale = np.maximum(scale, np.abs(s))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, diff / scale, np.where(diff > 0, np.inf, 0.0))
    return float(diff.max()), float(rel.max())


def audit_ledger(
    summary: TransferSummary,
    params: SpringBoxParams,
    plan: TransferPlan,
    tolerance: float = 1e-10,
) -> AuditReport:
    """Re-derive every ledger invariant independently and report residuals.

    Failures are reported, never raised. When the summary was produced in
    streaming mode only the totals are audited.
    """
    checks = []

    def add(name, residual, relative):
        checks.append(Check(name, bool(relative <= tolerance), float(residual), float(relative)))

    N = plan.drop_count
    k, q, m = params.stiffness, plan.step, plan.drop_mass
    kq2 = k * q * q
    e_in = energy_breakdown(params).initial_total

    led = summary.records
    if led is not None:
        n_rec = len(led)
        add("record_count", abs(n_rec - N), 0.0 if n_rec == N else math.inf)
        expected_idx = np.repeat(np.arange(1, N // 2 + 1), 2) if n_rec == N else None
        order_ok = (
            expected_idx is not None
            and np.array_equal(led.column("drop_index"), expected_idx)
            and np.array_equal(led.column("box"), np.tile([1, 2], N // 2))
        )
        add("record_order", 0.0 if order_ok else 1.0, 0.0 if order_ok else math.inf)

        n = led.column("drop_index").astype(np.float64)
        box1 = led.column("box") == 1
        mb, ma = led.column("mass_before"), led.column("mass_after")
        pb, pa = led.column("position_before"), led.column("position_after")
        exact = led.column("delta_elastic_exact")
        paper = led.column("delta_elastic_paper")
        work = led.column("gravity_work")
        diss = led.column("settle_dissipation")

        # box 1 loses mass and rises, box 2 gains mass and sinks
        sign = np.where(box1, -1.0, 1.0)
        add("mass_step", *_rel_arrays(sign * (ma - mb), np.full(n.shape, m), ma, mb))
        add("position_step", *_rel_arrays(sign * (pa - pb), np.full(n.shape, q), pa, pb))
        add("ledger_identity", *_rel_arrays(exact, work - diss, work, diss))

        j = np.where(box1, N - n, n)  # drops held after the hop, up to sign
        add("delta_elastic_exact_form", *_rel_arrays(exact, sign * (j - sign * 0.5) * kq2))
        add("delta_elastic_paper_form", *_rel_arrays(paper, np.where(box1, -(N - n + 1), n) * kq2))
        add("gravity_work_form", *_rel_arrays(work, sign * j * kq2))
        add("settle_dissipation_form", *_rel_arrays(diss, np.full(n.shape, 0.5 * kq2)))

        bad = int(np.count_nonzero(exact[box1] >= 0) + np.count_nonzero(exact[~box1] <= 0))
        add("monotonic_energy", bad, 0.0 if bad == 0 else math.inf)

        add("record_sum_delta1", *_rel(math.fsum(exact[box1].tolist()), summary.delta1_exact))
        add("record_sum_delta2", *_rel(math.fsum(exact[~box1].tolist()), summary.delta2_exact))
        add("record_sum_paper1", *_rel(math.fsum(paper[box1].tolist()), summary.delta1_paper))
        add("record_sum_paper2", *_rel(math.fsum(paper[~box1].tolist()), summary.delta2_paper))
        add("record_sum_work", *_rel(math.fsum(work.tolist()), summary.gravity_work_total))
        add("record_sum_dissipation", *_rel(math.fsum(diss.tolist()), summary.dissipation_total))

    s = summary
    kn2q2 = k * (N * q) ** 2
    add("total_is_sum", *_rel(s.delta_total_exact, s.delta1_exact + s.delta2_exact))
    add("total_is_half_loss", *_rel(s.delta_total_exact, -0.5 * e_in))
    add("delta1_closed_form", *_rel(s.delta1_exact, -3.0 * kn2q2 / 8.0))
    add("delta2_closed_form", *_rel(s.delta2_exact, kn2q2 / 8.0))
    add("work_minus_dissipation", *_rel(s.gravity_work_total - s.dissipation_total, s.delta_total_exact))
    add("dissipation_total_form", *_rel(s.dissipation_total, N * 0.5 * kq2))
    add("final_box1_quarter", *_rel(s.final_elastic_box1, 0.25 * e_in))
    add("final_box2_quarter", *_rel(s.final_elastic_box2, 0.25 * e_in))
    add("delta1_paper_sum", *_rel(s.delta1_paper, delta1_paper_sum(params, plan)))
    add("delta2_paper_sum", *_rel(s.delta2_paper, delta2_paper_sum(params, plan)))
    return AuditReport(tuple(checks), tolerance)


# --------------------------------------------------------------- convergence


@dataclass(frozen=True)
class SweepRow:
    drop_count: int
    relative_error_delta1: float
    relative_error_delta2: float
    relative_error_total: float


def _sweep_row(params: SpringBoxParams, n: int) -> SweepRow:
    plan = TransferPlan.from_drops(params, n)
    s = simulate_transfer(params, plan, keep_records=False)
    e_in = energy_breakdown(params).initial_total
    total_paper = s.delta1_paper + s.delta2_paper
    return SweepRow(
        n,
        abs(s.delta1_paper - s.delta1_exact) / e_in,
        abs(s.delta2_paper - s.delta2_exact) / e_in,
        abs(total_paper - s.delta_total_exact) / e_in,
    )


def convergence_sweep(params: SpringBoxParams, drop_counts, jobs: int = 1) -> list:
    """Relative error of the large-n approximations, one row per drop count."""
    counts = list(drop_counts)
    if not counts:
        raise DomainError("drop_counts must not be empty")
    for n in counts:
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
            raise DomainError(f"every drop count must be an even integer >= 2, got {n!r}")
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise DomainError("drop counts must be strictly increasing")
    counts = [int(n) for n in counts]
    if jobs > 1 and len(counts) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_row, [params] * len(counts), counts))
    return [_sweep_row(params, n) for n in counts]


def convergence_slope(rows) -> float:
    """Least-squares slope of log(relative_error_delta2) against log(N)."""
    n = np.array([r.drop_count for r in rows], dtype=float)
    err = np.array([r.relative_error_delta2 for r in rows])
    return float(np.polyfit(np.log(n), np.log(err), 1)[0])
