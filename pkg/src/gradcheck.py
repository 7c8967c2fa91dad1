"""
Finite-difference check of the full adaptation loss against the reverse-mode gradients, over random toy
configurations. Selection and retrieval are pinned so both sides differentiate the same smooth function.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .adaptation import AdaptConfig, MintEngine, MintParams, augment, confidence_select, mint_loss
from .autodiff import Tape, backward
from .encoders import DualEncoder, EncoderConfig

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
MAX_RELATIVE_ERROR = 1e-5
MAGNITUDE_FLOOR = 1e-3
"the pass criterion takes relative errors against max(|analytic|, |numeric|, floor)"


@dataclass(frozen=True)
class GradientComparison:
    checked_entries: int
    max_relative_error: float
    "floored: entries with both gradients below MAGNITUDE_FLOOR are compared absolutely"

    max_pure_relative_error: float
    "against max(|analytic|, |numeric|) alone, entries where both vanish count as exact"


@dataclass(frozen=True)
class GradcheckCase:
    seed: int
    encoder: EncoderConfig
    adapt: AdaptConfig
    checked_entries: int
    max_relative_error: float
    max_pure_relative_error: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < MAX_RELATIVE_ERROR


def random_toy_config(rng: np.random.Generator) -> tuple[EncoderConfig, AdaptConfig]:
    """K <= 10, image depth <= 4, D_I <= 32"""
    heads = int(rng.choice([1, 2]))
    image_depth = int(rng.integers(1, 5))
    encoder = EncoderConfig(
        image_width=int(rng.choice([8, 16, 32])),
        text_width=int(rng.choice([8, 16])),
        image_depth=image_depth,
        text_depth=int(rng.integers(1, 3)),
        heads=heads,
        grid=int(rng.integers(2, 4)),
        patch=2,
        num_classes=int(rng.integers(2, 11)),
        text_prompt_length=int(rng.integers(1, 4)),
        class_name_length=int(rng.integers(1, 3)),
        query_layers=int(rng.integers(1, image_depth + 1)),
        weight_seed=int(rng.integers(2**31)),
    )
    bank_size = int(rng.integers(2, 9))
    adapt = AdaptConfig(
        views=4,
        confidence=0.5,
        reward_weight=float(rng.uniform(0.0, 1.0)),
        bank_size=bank_size,
        prompt_length=int(rng.integers(1, 3)),
        selected_per_layer=int(rng.integers(1, bank_size + 1)),
        bank_seed=int(rng.integers(2**31)),
        augment_seed=int(rng.integers(2**31)),
    )
    return encoder, adapt


def check_gradients(
    engine: MintEngine,
    image: np.ndarray,
    params: MintParams,
    *,
    step: float = FD_STEP,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradientComparison:
    """
    Compares the analytic gradient of every trainable entry (or a random subset of `max_entries` per
    parameter) with central differences
    """
    config = engine.config
    view_rng = np.random.default_rng([config.augment_seed, 0])
    views = augment(image, config.views, view_rng, engine.encoder.config.patch)

    with Tape() as tape:
        batch = engine.forward_views(views, params)
        selected = confidence_select(batch.entropies.data, config.confidence)
        retrievals = batch.retrievals
        gradients = backward(mint_loss(batch.entropies, batch.rewards, selected, config.reward_weight), tape)

    def loss_at(parameter_id: str, values: np.ndarray) -> float:
        return engine.pinned_loss(views, params.with_arrays({parameter_id: values}), selected, retrievals)

    checked, worst, worst_pure = 0, 0.0, 0.0
    arrays = params.arrays()

    for parameter_id in sorted(params.trainable_ids(config.mode)):
        value = arrays[parameter_id]
        analytic = gradients[parameter_id] if parameter_id in gradients else np.zeros_like(value)
        entries = np.arange(value.size)
        if max_entries is not None and value.size > max_entries:
            entries = (rng or np.random.default_rng(0)).choice(value.size, max_entries, replace=False)

        for entry in entries:
            plus, minus = value.copy(), value.copy()
            plus.flat[entry] += step
            minus.flat[entry] -= step
            numeric = (loss_at(parameter_id, plus) - loss_at(parameter_id, minus)) / (2.0 * step)
            exact = analytic.flat[entry]
            difference = abs(exact - numeric)
            magnitude = max(abs(exact), abs(numeric))
            worst = max(worst, difference / max(magnitude, MAGNITUDE_FLOOR))
            if magnitude > 0:
                worst_pure = max(worst_pure, difference / magnitude)
            checked += 1

    return GradientComparison(checked, worst, worst_pure)


def run_gradcheck(count: int = 20, seed: int = 0, max_entries: int | None = None) -> list[GradcheckCase]:
    cases = []

    for index in range(count):
        rng = np.random.default_rng([seed, index])
        encoder_config, adapt_config = random_toy_config(rng)
        encoder = DualEncoder(encoder_config)
        engine = MintEngine(encoder, adapt_config)
        params = engine.initial_params()
        image = rng.standard_normal(encoder_config.image_shape)

        comparison = check_gradients(engine, image, params, max_entries=max_entries, rng=rng)
        case = GradcheckCase(
            index,
            encoder_config,
            adapt_config,
            comparison.checked_entries,
            comparison.max_relative_error,
            comparison.max_pure_relative_error,
        )
        cases.append(case)

        logger.debug(
            "gradcheck case %d: %d entries, max relative error %.3e (unfloored %.3e)",
            index,
            case.checked_entries,
            case.max_relative_error,
            case.max_pure_relative_error,
        )

    return cases
