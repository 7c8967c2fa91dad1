import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..utils import Result
from .methods import MethodResult

REPORT_HEADER = "method,domain,top1,mean_loss,episodes"


@dataclass(frozen=True)
class ReportRow:
    method: str
    domain: str
    top1: float
    mean_loss: float
    episodes: int


@dataclass(frozen=True)
class RunReport:
    rows: tuple[ReportRow, ...] = ()
    fingerprint: str = ""

    def extend(self, rows: Iterable[ReportRow]) -> "RunReport":
        return RunReport((*self.rows, *rows), self.fingerprint)

    def row(self, method: str, domain: str) -> ReportRow:
        for row in self.rows:
            if row.method == method and row.domain == domain:
                return row
        raise KeyError((method, domain))


def config_fingerprint(canonical: str) -> str:
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def summarize(result: MethodResult, domain_names: Sequence[str], label: str | None = None) -> list[ReportRow]:
    """One row per domain, including domains without episodes. The loss is the pre-adaptation episode loss"""
    rows = []

    for domain in domain_names:
        episodes = [episode for episode in result.episodes if episode.domain == domain]
        correct = [bool(episode.correct) for episode in episodes]
        losses = [episode.pre_loss for episode in episodes if not math.isnan(episode.pre_loss)]

        rows.append(
            ReportRow(
                method=label or result.method,
                domain=domain,
                top1=float(np.mean(correct)) if correct else 0.0,
                mean_loss=float(np.mean(losses)) if losses else float("nan"),
                episodes=len(episodes),
            )
        )

    return rows


def _format_float(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.4f}"


def format_report(report: RunReport) -> str:
    lines = [REPORT_HEADER]
    for row in sorted(report.rows, key=lambda row: (row.method, row.domain)):
        lines.append(
            f"{row.method},{row.domain},{_format_float(row.top1)},{_format_float(row.mean_loss)},{row.episodes}"
        )
    lines.append(f"# fingerprint={report.fingerprint}")
    return "\n".join(lines) + "\n"


@Result.do(catch=(OSError,))
def emit_report(report: RunReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(report), encoding="utf-8", newline="\n")
    return path
