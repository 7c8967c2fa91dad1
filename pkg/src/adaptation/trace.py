import json
import math
from pathlib import Path
from typing import Iterable, TypedDict

from ..utils import Result
from .engine import Episode


class EpisodeRecordJson(TypedDict):
    sample_id: int
    domain: str | None
    pre_loss: float | None
    post_loss: float | None
    selected_views: list[int]
    retrieval: list[list[int]]
    prediction: int
    label: int | None
    correct: bool | None
    aborted: bool


def _finite_or_none(value: float) -> float | None:
    return None if math.isnan(value) else value


def episode_record(episode: Episode) -> EpisodeRecordJson:
    return {
        "sample_id": episode.sample_id,
        "domain": episode.domain,
        "pre_loss": _finite_or_none(episode.pre_loss),
        "post_loss": _finite_or_none(episode.post_loss),
        "selected_views": list(episode.selected_views),
        "retrieval": episode.retrieval.to_json() if episode.retrieval is not None else [],
        "prediction": episode.prediction,
        "label": episode.label,
        "correct": episode.correct,
        "aborted": episode.aborted,
    }


def format_trace(episodes: Iterable[Episode], method: str | None = None) -> str:
    lines = []
    for episode in episodes:
        record = dict(episode_record(episode))
        if method is not None:
            record["method"] = method
        lines.append(json.dumps(record, sort_keys=True))
    return "".join(line + "\n" for line in lines)


@Result.do(catch=(OSError,))
def write_episode_trace(path: str | Path, episodes: Iterable[Episode], method: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_trace(episodes, method), encoding="utf-8")
    return path
