import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..adaptation import AblationMode, AdaptConfig, Episode, MintEngine, MintParams, Sample
from ..autodiff import entropy
from ..encoders import DualEncoder
from ..errors import ConfigError
from ..registry import METHODS_TO_REGISTER, register_method
from ..utils import GeneratorWithState

logger = logging.getLogger(__name__)

ABLATION_METHODS = ("zero-shot", "text-only", "visual-only-general", "visual-only-associative", "text+general", "mint")

ZERO_SHOT_CHUNK = 256


@dataclass(frozen=True)
class MethodResult:
    method: str
    episodes: tuple[Episode, ...]
    params: MintParams | None = None
    "adapted parameters after the last sample, None for methods that do not adapt"


def run_method(method: str, encoder: DualEncoder, config: AdaptConfig, samples: Sequence[Sample]) -> MethodResult:
    if method not in METHODS_TO_REGISTER:
        raise ConfigError(f"unknown method {method!r}, expected one of {', '.join(sorted(METHODS_TO_REGISTER))}")

    result = METHODS_TO_REGISTER[method](encoder, config, samples)

    correct = [episode.correct for episode in result.episodes if episode.correct is not None]
    aborted = sum(episode.aborted for episode in result.episodes)
    logger.info(
        "%s: %d episodes, top-1 %.4f, %d aborted",
        method,
        len(result.episodes),
        float(np.mean(correct)) if correct else float("nan"),
        aborted,
    )

    return replace(result, method=method)


@register_method("zero-shot")
def run_zero_shot(encoder: DualEncoder, config: AdaptConfig, samples: Sequence[Sample]) -> MethodResult:
    """Hand-crafted prompt, no adaptation. The episode loss is the prediction entropy of the unmodified view"""
    episodes: list[Episode] = []

    for start in range(0, len(samples), ZERO_SHOT_CHUNK):
        chunk = samples[start : start + ZERO_SHOT_CHUNK]
        probabilities = encoder.zero_shot_predict(np.stack([sample.image for sample in chunk]))
        entropies = entropy(probabilities, axis=-1).data

        for sample, sample_probabilities, sample_entropy in zip(chunk, probabilities, entropies):
            loss = float(sample_entropy)
            episodes.append(
                Episode(
                    sample_id=sample.id,
                    view_probabilities=sample_probabilities[None],
                    view_entropies=np.array([loss]),
                    selected_views=(0,),
                    pre_loss=loss,
                    post_loss=loss,
                    losses=(),
                    prediction=int(np.argmax(sample_probabilities)),
                    retrieval=None,
                    label=sample.label,
                    domain=sample.domain,
                )
            )

    return MethodResult("zero-shot", tuple(episodes))


def run_adaptive(
    mode: AblationMode, encoder: DualEncoder, config: AdaptConfig, samples: Sequence[Sample]
) -> MethodResult:
    engine = MintEngine(encoder, replace(config, mode=mode))
    episodes, (params, _) = GeneratorWithState(engine.iter_episodes(samples, engine.initial_params())).collect()
    return MethodResult(mode, tuple(episodes), params)


@register_method("text-only")
def run_text_only(encoder: DualEncoder, config: AdaptConfig, samples: Sequence[Sample]) -> MethodResult:
    return run_adaptive("text-only", encoder, config, samples)


@register_method("visual-only-general")
def run_visual_only_general(encoder: DualEncoder, config: AdaptConfig, samples: Sequence[Sample]) -> MethodResult:
    return run_adaptive("visual-only-general", encoder, config, samples)


@register_method("visual-only-associative")
def run_visual_only_associative(encoder: DualEncoder, config: AdaptConfig, samples: Sequence[Sample]) -> MethodResult:
    return run_adaptive("visual-only-associative", encoder, config, samples)


@register_method("text+general")
def run_text_and_general(encoder: DualEncoder, config: AdaptConfig, samples: Sequence[Sample]) -> MethodResult:
    return run_adaptive("general-visual-prompt", encoder, config, samples)


@register_method("mint")
def run_mint(encoder: DualEncoder, config: AdaptConfig, samples: Sequence[Sample]) -> MethodResult:
    return run_adaptive("mint", encoder, config, samples)
