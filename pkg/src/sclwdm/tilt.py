"""Exhaustive launch-tilt and band-edge search."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .system import System, ThroughputSettings, gmi_per_channel
from .gmi import air_per_channel

MAX_EVALUATIONS = 10_000
OBJECTIVES = ("shannon-estimate", "gmi-estimate")


class GridError(ValueError):
    pass


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TiltScenario:
    """Search grid. ``trims`` maps band to the per-edge channel drops tried."""

    tilts: tuple[float, ...] = tuple(float(t) for t in range(9))
    trims: Mapping[str, tuple[int, ...]] = field(default_factory=dict)
    objective: str = "shannon-estimate"

    def __post_init__(self):
        object.__setattr__(self, "tilts", tuple(sorted({float(t) for t in self.tilts})))
        object.__setattr__(
            self, "trims", {b: tuple(sorted({int(r) for r in v})) for b, v in self.trims.items()}
        )
        if not self.tilts:
            raise GridError("tilt candidate list is empty")
        for b, opts in self.trims.items():
            if not opts:
                raise GridError(f"trim candidate list for band {b} is empty")
            if min(opts) < 0:
                raise GridError(f"trims for band {b} must be >= 0")
        if self.objective not in OBJECTIVES:
            raise GridError(f"objective must be one of {OBJECTIVES}")

    @property
    def size(self) -> int:
        n = len(self.tilts)
        for opts in self.trims.values():
            n *= len(opts)
        return n

    def points(self):
        """Grid points in tie-break order: tilt, total trims, then lexicographic."""
        names = sorted(self.trims)
        combos = list(itertools.product(*(self.trims[b] for b in names)))
        combos.sort(key=lambda c: (sum(c), c))
        for t in self.tilts:
            for c in combos:
                yield t, dict(zip(names, c))


@dataclass(frozen=True)
class TiltResult:
    best_tilt: float
    best_trims: dict
    objective: float
    table: tuple  # rows of (tilt, trims dict, value Tb/s)

    def to_csv(self) -> str:
        names = sorted(self.best_trims)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tilt_dB"] + [f"trim_{b}" for b in names] + ["throughput_Tbps"])
        for t, trims, v in self.table:
            w.writerow([f"{t:.3f}"] + [trims[b] for b in names] + [f"{v:.6f}"])
        return buf.getvalue()


def evaluate(tilt: float, trims, system: System, scenario: TiltScenario | None = None,
             gmi: ThroughputSettings | None = None, seed: int = 0) -> float:
    """Estimated aggregate throughput (Tb/s) for one grid point."""
    objective = scenario.objective if scenario else "shannon-estimate"
    try:
        plan = system.launch_plan(tilt, trims)
        est = system.estimate(plan)
        if objective == "shannon-estimate":
            return est.shannon_total()
        if gmi is None:
            raise EvaluationError("gmi-estimate objective needs throughput settings")
        g, _, _ = gmi_per_channel(plan.bands, est.snr_total, gmi, seed)
        return float(np.sum(air_per_channel(g, plan.symbol_rate, gmi.fec))) / 1e3
    except EvaluationError:
        raise
    except Exception as exc:
        raise EvaluationError(f"evaluation failed at tilt {tilt} dB, trims {dict(trims or {})}: {exc}") from exc


def optimize(system: System, scenario: TiltScenario, gmi: ThroughputSettings | None = None,
             seed: int = 0) -> TiltResult:
    """Evaluate every grid point; ties go to the smaller tilt, then fewer trims."""
    if scenario.size > MAX_EVALUATIONS:
        raise GridError(f"grid has {scenario.size} points, limit is {MAX_EVALUATIONS}")
    table = []
    best = None
    for t, trims in scenario.points():
        v = evaluate(t, trims, system, scenario, gmi, seed)
        table.append((t, trims, v))
        if best is None or v > best[2]:
            best = (t, trims, v)
    return TiltResult(best[0], dict(best[1]), best[2], tuple(table))
