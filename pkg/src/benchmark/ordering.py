import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ContractError
from ..utils import Result
from .report import RunReport

logger = logging.getLogger(__name__)

ORDERING_FILE = "ordering.json"

MIN_MARGIN = 0.03
"top-1 lead of mint over zero-shot a shifted domain needs to count as adapted"

ORDERED_METHODS = ("mint", "text+general", "text-only")
"expected ranking by shifted-domain accuracy, best first"


@dataclass(frozen=True)
class OrderingCheck:
    """Seed-median comparison of the ablation methods on the shifted domains"""

    shifted_domains: tuple[str, ...]
    seeds: int

    median_accuracy: dict[str, float]
    "per method: median over seeds of the mean top-1 across shifted domains"

    margins: dict[str, float]
    "per shifted domain: median over seeds of mint minus zero-shot top-1"

    @property
    def domains_above_margin(self) -> tuple[str, ...]:
        return tuple(domain for domain, margin in self.margins.items() if margin >= MIN_MARGIN)

    @property
    def ranking_inversions(self) -> tuple[str, ...]:
        accuracy = self.median_accuracy
        return tuple(
            f"{better} ({accuracy[better]:.3f}) below {worse} ({accuracy[worse]:.3f})"
            for better, worse in zip(ORDERED_METHODS, ORDERED_METHODS[1:])
            if accuracy[better] < accuracy[worse]
        )

    @property
    def inversions(self) -> tuple[str, ...]:
        messages = list(self.ranking_inversions)
        for domain, margin in self.margins.items():
            if margin <= 0:
                messages.append(f"{domain}: mint trails zero-shot by {-margin:.3f}")
        return tuple(messages)

    @property
    def hard_failure(self) -> bool:
        """mint no better than zero-shot on every shifted domain"""
        return all(margin <= 0 for margin in self.margins.values())

    @property
    def passed(self) -> bool:
        required = math.ceil(2 * len(self.shifted_domains) / 3)
        return not self.ranking_inversions and len(self.domains_above_margin) >= required

    def to_json(self) -> dict:
        return {
            "shifted_domains": list(self.shifted_domains),
            "seeds": self.seeds,
            "median_accuracy": self.median_accuracy,
            "margins": self.margins,
            "inversions": list(self.inversions),
            "hard_failure": self.hard_failure,
            "passed": self.passed,
        }


def shifted_accuracy(report: RunReport, method: str, domains: Sequence[str]) -> float:
    return float(np.mean([report.row(method, domain).top1 for domain in domains]))


def check_ordering(reports: Sequence[RunReport], shifted_domains: Sequence[str]) -> OrderingCheck:
    """`reports` holds one ablation report per seed; each needs zero-shot and the ordered methods"""
    if not reports or not shifted_domains:
        raise ContractError("the ordering check needs at least one report and one shifted domain")

    median_accuracy = {
        method: float(np.median([shifted_accuracy(report, method, shifted_domains) for report in reports]))
        for method in (*ORDERED_METHODS, "zero-shot")
    }
    margins = {
        domain: float(
            np.median([report.row("mint", domain).top1 - report.row("zero-shot", domain).top1 for report in reports])
        )
        for domain in shifted_domains
    }

    return OrderingCheck(tuple(shifted_domains), len(reports), median_accuracy, margins)


@Result.do(catch=(OSError,))
def emit_ordering(check: OrderingCheck, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(check.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
