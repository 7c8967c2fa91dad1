import logging
from dataclasses import dataclass
from typing import Generator, Iterable

import numpy as np

from ..autodiff import Tape, Tensor, backward, entropy, ops, reshape, scale, sub
from ..encoders import DualEncoder, predict
from ..errors import NonFiniteError
from ..memory import LayerSelection, RetrievalResult, compose_views, retrieve_views, similarity_rewards
from ..utils import GeneratorWithState
from .augment import augment
from .config import AdaptConfig, confident_count
from .optimizer import OptimizerState, adapt_step
from .params import TEXT_PROMPT_ID, MintParams

logger = logging.getLogger(__name__)

_GENERAL_PROMPT_SELECTION = RetrievalResult((LayerSelection((0,), (1.0,)),))


@dataclass(frozen=True)
class Sample:
    id: int
    image: np.ndarray
    label: int | None = None
    domain: str | None = None


@dataclass(frozen=True)
class ViewBatch:
    probabilities: Tensor
    "(B, K)"

    entropies: Tensor
    "(B,)"

    rewards: Tensor | None
    "(B,) similarity reward per view, None when no bank is queried"

    retrievals: tuple[RetrievalResult, ...]


@dataclass(frozen=True)
class Episode:
    sample_id: int
    view_probabilities: np.ndarray
    view_entropies: np.ndarray
    selected_views: tuple[int, ...]
    pre_loss: float
    post_loss: float
    losses: tuple[float, ...]
    "loss of every optimizer step, before that step's update"

    prediction: int
    retrieval: RetrievalResult | None
    "retrieval of the final prediction pass on the unmodified view"

    label: int | None = None
    domain: str | None = None
    aborted: bool = False

    @property
    def correct(self) -> bool | None:
        return None if self.label is None else self.prediction == self.label


def confidence_select(entropies: np.ndarray, confidence: float) -> tuple[int, ...]:
    """Indices of the max(1, floor(kappa * B)) lowest entropies, ties to the lower view index, ascending"""
    entropies = np.asarray(entropies)
    count = confident_count(len(entropies), confidence)
    return tuple(sorted(int(i) for i in np.argsort(entropies, kind="stable")[:count]))


def mint_loss(entropies: Tensor, rewards: Tensor | None, selected: tuple[int, ...], reward_weight: float) -> Tensor:
    """mean over the selected views of H(P(y|view)) - lambda * similarity reward"""
    per_view = ops.take(entropies, list(selected))
    if rewards is not None:
        per_view = sub(per_view, scale(ops.take(rewards, list(selected)), reward_weight))
    return ops.mean(per_view)


class MintEngine:
    """Online test-time adaptation of MintParams over a stream of unlabeled samples"""

    encoder: DualEncoder
    config: AdaptConfig

    def __init__(self, encoder: DualEncoder, config: AdaptConfig):
        self.encoder = encoder
        self.config = config

    def initial_params(self) -> MintParams:
        return MintParams.initialize(self.encoder, self.config)

    def text_features(self, params: MintParams) -> Tensor:
        if self.config.uses_text_prompt:
            return self.encoder.text_features(params.text_prompt)
        return self.encoder.zero_shot_text_features()

    def forward_views(
        self,
        views: np.ndarray,
        params: MintParams,
        *,
        text: Tensor | None = None,
        retrievals: tuple[RetrievalResult, ...] | None = None,
    ) -> ViewBatch:
        """
        Two-pass protocol: a prompt-free pass supplies the hierarchical queries, the bank is queried per view,
        and the injected pass produces the prediction. `retrievals` pins the selections instead of querying
        """
        config = self.config
        text = text if text is not None else self.text_features(params)
        views_count = views.shape[0]

        prompts = None
        rewards = None
        used_retrievals: tuple[RetrievalResult, ...] = ()

        if config.uses_bank:
            plain = self.encoder.encode_images(views)
            queries = np.stack([q.data for q in plain.queries], axis=1)
            if retrievals is None:
                retrievals = tuple(retrieve_views(params.bank, queries, config.selected_per_layer))
            used_retrievals = retrievals
            prompts = compose_views(retrievals, params.bank.values, config.union_mode)
            rewards = similarity_rewards(queries, params.bank.keys, retrievals)
        elif config.uses_visual_prompt:
            general = reshape(params.visual_prompt.track(), (1, *params.visual_prompt.shape))
            prompts = compose_views([_GENERAL_PROMPT_SELECTION] * views_count, general)

        encoded = self.encoder.encode_images(views, prompts)
        probabilities = predict(encoded.v, text, self.encoder.config.temperature)

        return ViewBatch(probabilities, entropy(probabilities, axis=-1), rewards, used_retrievals)

    def view_forward(self, view: np.ndarray, params: MintParams) -> tuple[np.ndarray, RetrievalResult | None]:
        batch = self.forward_views(np.asarray(view)[None], params)
        retrieval = batch.retrievals[0] if batch.retrievals else None
        return batch.probabilities.data[0], retrieval

    def infer(self, x: np.ndarray, params: MintParams) -> int:
        """argmax of the unmodified view's distribution, ties to the lower class index"""
        probabilities, _ = self.view_forward(x, params)
        return int(np.argmax(probabilities))

    def pinned_loss(
        self,
        views: np.ndarray,
        params: MintParams,
        selected: tuple[int, ...],
        retrievals: tuple[RetrievalResult, ...] | None,
    ) -> float:
        """Loss over the `selected` views with their retrieval indices held fixed"""
        subset = views[list(selected)]
        pinned = tuple(retrievals[i] for i in selected) if retrievals else None
        batch = self.forward_views(subset, params, retrievals=pinned)
        everything = tuple(range(len(selected)))
        return mint_loss(batch.entropies, batch.rewards, everything, self.config.reward_weight).item()

    def adapt(
        self, sample: Sample, params: MintParams, optimizer: OptimizerState
    ) -> tuple[Episode, MintParams, OptimizerState]:
        config = self.config
        rng = np.random.default_rng([config.augment_seed, sample.id])
        views = augment(sample.image, config.views, rng, self.encoder.config.patch)

        losses: list[float] = []
        first_batch: ViewBatch | None = None
        selected: tuple[int, ...] = ()
        retrievals: tuple[RetrievalResult, ...] = ()
        aborted = False
        # every abort restores the state the episode started from
        initial_params, initial_optimizer = params, optimizer

        for _ in range(config.steps):
            try:
                with Tape() as tape:
                    batch = self.forward_views(views, params)
                    selected = confidence_select(batch.entropies.data, config.confidence)
                    loss = mint_loss(batch.entropies, batch.rewards, selected, config.reward_weight)
                    gradients = backward(loss, tape)
            except NonFiniteError as error:
                logger.warning("sample %d: %s, episode aborted", sample.id, error)
                aborted = True
                break

            if first_batch is None:
                first_batch = batch
            retrievals = batch.retrievals
            losses.append(loss.item())

            step = adapt_step(params, optimizer, gradients, config)
            if step.is_error:
                logger.warning("sample %d: %s, episode aborted", sample.id, step.unwrap_error())
                aborted = True
                break
            params, optimizer = step.unwrap()

        if aborted:
            logger.warning("sample %d: parameters rolled back to the episode start", sample.id)
            params, optimizer = initial_params, initial_optimizer

        if aborted or not losses:
            post_loss = float("nan")
        else:
            post_loss = self.pinned_loss(views, params, selected, retrievals)

        probabilities, final_retrieval = self.view_forward(views[0], params)

        episode = Episode(
            sample_id=sample.id,
            view_probabilities=first_batch.probabilities.data if first_batch is not None else np.empty((0,)),
            view_entropies=first_batch.entropies.data if first_batch is not None else np.empty((0,)),
            selected_views=selected,
            pre_loss=losses[0] if losses else float("nan"),
            post_loss=post_loss,
            losses=tuple(losses),
            prediction=int(np.argmax(probabilities)),
            retrieval=final_retrieval,
            label=sample.label,
            domain=sample.domain,
            aborted=aborted,
        )

        logger.debug(
            "sample %d: loss %.4f -> %.4f, prediction %d, views %s",
            sample.id,
            episode.pre_loss,
            episode.post_loss,
            episode.prediction,
            list(selected),
        )

        return episode, params, optimizer

    def iter_episodes(
        self, samples: Iterable[Sample], params: MintParams, optimizer: OptimizerState | None = None
    ) -> Generator[Episode, None, tuple[MintParams, OptimizerState]]:
        """Processes samples strictly in order, carrying or resetting state per the persistence policy"""
        policy = self.config.persistence
        initial = params
        optimizer = optimizer if optimizer is not None else OptimizerState()

        for sample in samples:
            if policy == "episodic-text":
                params = params.reset(initial, text=True, visual=False)
                optimizer = optimizer.without({TEXT_PROMPT_ID})
            elif policy == "fully-episodic":
                params = initial
                optimizer = OptimizerState(step=optimizer.step)

            episode, params, optimizer = self.adapt(sample, params, optimizer)
            yield episode

        return params, optimizer

    def run_stream(self, samples: Iterable[Sample], params: MintParams) -> list[Episode]:
        episodes, _ = GeneratorWithState(self.iter_episodes(samples, params)).collect()
        return episodes
