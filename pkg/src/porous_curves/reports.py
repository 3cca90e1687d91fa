"""
Run reports and their files.

Tables are written as CSV with one header row, LF line endings and floats in repr form so
identical runs give identical bytes. The summary carries the resolved parameters, every
verdict and the wall-clock time, which is kept out of the tables.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from .engine.avoidance import AUDIT_COLUMNS

logger = logging.getLogger(__name__)

TABLE_IDS = (
    "measure-vs-round",
    "martingale",
    "martingale-histogram",
    "interval-strip",
    "audit",
    "trials",
    "tubes",
    "schedule",
)

HEADERS = {
    "measure-vs-round": ("round", "measure", "measure_error", "bound_rhs"),
    "martingale": ("round", "second_moment", "bound", "sup_norm", "exceedance"),
    "martingale-histogram": ("lo", "hi", "mass"),
    "interval-strip": ("round", "label", "lo", "hi"),
    "audit": AUDIT_COLUMNS,
    "trials": ("trial", "delta", "measure"),
    "tubes": ("tube", "radius", "length", "area"),
    "schedule": ("step", "piece", "measure"),
}


@dataclass(frozen=True)
class Verdict:
    """One audited inequality: what was measured, against which bound."""

    check: str
    passed: bool
    measured: Any = None
    bound: Any = None

    def as_dict(self) -> Dict[str, Any]:
        return {"check": self.check, "passed": self.passed, "measured": self.measured, "bound": self.bound}


@dataclass
class RunReport:
    kind: str
    config: Dict[str, Any]
    seed: int
    summary: Dict[str, Any] = field(default_factory=dict)
    verdicts: List[Verdict] = field(default_factory=list)
    tables: Dict[str, Tuple[Sequence[str], List[Sequence[Any]]]] = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def failures(self) -> List[Verdict]:
        return [v for v in self.verdicts if not v.passed]

    def add_table(self, which: str, rows: List[Sequence[Any]], header: Sequence[str] = ()) -> None:
        if which not in TABLE_IDS:
            raise ValueError(f"Unknown table id: {which}; available: {', '.join(TABLE_IDS)}")
        self.tables[which] = (tuple(header) or HEADERS[which], list(rows))

    def check(self, name: str, passed: bool, measured: Any = None, bound: Any = None) -> bool:
        self.verdicts.append(Verdict(name, bool(passed), measured, bound))
        return bool(passed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.kind,
            "seed": self.seed,
            "config": self.config,
            "summary": self.summary,
            "verdicts": [v.as_dict() for v in self.verdicts],
            "passed": self.passed,
            "tables": sorted(self.tables),
            "wall_clock": self.wall_clock,
        }


def format_cell(value: Any) -> str:
    """repr for floats (shortest round-trip form), lower-case booleans, str otherwise."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value)) if math.isfinite(value) else str(float(value))
    if hasattr(value, "item"):
        return format_cell(value.item())
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def _json_default(value: Any) -> Any:
    if hasattr(value, "item"):
        return value.item()
    return str(value)


def write_summary(report: RunReport, out_dir: Path) -> Path:
    path = Path(out_dir) / report.kind / "summary.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    return path


def emit_plot_data(report: RunReport, which: str, out_dir: Path) -> Path:
    """Write one table of the report as <out_dir>/<kind>/<which>.csv."""
    if which not in report.tables:
        available = ", ".join(sorted(report.tables)) or "none"
        raise ValueError(f"Unknown table id: {which}; available for {report.kind}: {available}")
    header, rows = report.tables[which]
    return write_csv(Path(out_dir) / report.kind / f"{which}.csv", header, rows)


def write_report(report: RunReport, out_dir: Path, fmt: str = "csv") -> List[Path]:
    """Summary always; every table as CSV unless fmt is 'summary'."""
    written = [write_summary(report, out_dir)]
    if fmt == "csv":
        for which in sorted(report.tables):
            written.append(emit_plot_data(report, which, out_dir))
    logger.info(f"Report for {report.kind} written to {Path(out_dir) / report.kind}")
    return written
