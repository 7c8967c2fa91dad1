import logging
from dataclasses import dataclass

import numpy as np

from ..autodiff import (
    Parameter,
    Tensor,
    add,
    broadcast_to,
    concat,
    constant,
    cosine_matrix,
    matmul,
    ops,
    reshape,
    scale,
    softmax,
)
from ..errors import ContractError, ShapeError
from .config import EncoderConfig
from .transformer import block, linear, norm, patchify, token_at
from .weights import FrozenWeights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodedImage:
    v: Tensor
    "final visual feature in the shared space, (D_I,) or (B, D_I)"

    queries: tuple[Tensor, ...]
    "q^(l) per designated layer: token 0 of that layer's output"

    layer_outputs: tuple[Tensor, ...]
    readout_index: int


def predict(v: Tensor, t: Tensor, temperature: float) -> Tensor:
    """softmax over cos(v, t_k) / tau. `v` is (D,) or (B, D), `t` is (K, D)"""
    if not temperature > 0:
        raise ContractError(f"temperature must be > 0, got {temperature}")

    v, t = constant(v), constant(t)
    single = v.ndim == 1
    if single:
        v = reshape(v, (1, v.shape[0]))

    probabilities = softmax(scale(cosine_matrix(v, t), 1.0 / temperature), axis=-1)

    return reshape(probabilities, (t.shape[0],)) if single else probabilities


class DualEncoder:
    """Frozen toy CLIP: a small ViT with first-layer prompt injection and a prefix-prompted text transformer"""

    config: EncoderConfig
    weights: FrozenWeights

    def __init__(self, config: EncoderConfig, weights: FrozenWeights | None = None):
        self.config = config
        self.weights = weights if weights is not None else FrozenWeights.initialize(config)
        self._zero_shot_text: Tensor | None = None

    @property
    def hand_prompt(self) -> np.ndarray:
        return self.weights["text.hand_prompt"]

    def encode_images(
        self, views, injected: Tensor | None = None, *, injection_layer: int | None = None
    ) -> EncodedImage:
        """Encodes a (B, C, H, W) batch. `injected` is (L_m, D_I) shared by the batch or (B, L_m, D_I)"""
        config, weights = self.config, self.weights
        views = constant(views)

        if views.ndim != 4 or views.shape[1:] != config.image_shape:
            raise ShapeError("encode_image", views.shape, (-1, *config.image_shape))

        batch = views.shape[0]
        injection_layer = config.injection_layer if injection_layer is None else injection_layer
        prompt = self._batched_prompt(injected, batch) if injected is not None else None

        patches = linear(patchify(views, config.grid, config.patch), weights, "image.patch")
        readout = np.broadcast_to(weights["image.class_token"], (batch, 1, config.image_width))
        tokens = add(concat([readout, patches], axis=1), weights["image.position"])

        query_layers = set(config.designated_query_layers)
        queries: list[Tensor] = []
        layer_outputs: list[Tensor] = []
        readout_index = 0

        for layer in range(config.image_depth):
            if prompt is not None and layer == injection_layer:
                tokens = concat([prompt, tokens], axis=1)
                readout_index = prompt.shape[1]

            tokens = block(tokens, weights, f"image.blocks.{layer}", config.heads)
            layer_outputs.append(tokens)

            if layer in query_layers:
                queries.append(token_at(tokens, 0))

        feature = norm(token_at(tokens, readout_index), weights, "image.ln_post")
        v = matmul(feature, weights["image.proj"])

        return EncodedImage(
            v=v, queries=tuple(queries), layer_outputs=tuple(layer_outputs), readout_index=readout_index
        )

    def encode_image(self, x, injected: Tensor | None = None, *, injection_layer: int | None = None) -> EncodedImage:
        """Single (C, H, W) view. Outputs drop the batch axis"""
        x = constant(x)
        encoded = self.encode_images(reshape(x, (1, *x.shape)), injected, injection_layer=injection_layer)

        def unbatch(t: Tensor) -> Tensor:
            return reshape(t, t.shape[1:])

        return EncodedImage(
            v=unbatch(encoded.v),
            queries=tuple(unbatch(q) for q in encoded.queries),
            layer_outputs=tuple(unbatch(o) for o in encoded.layer_outputs),
            readout_index=encoded.readout_index,
        )

    def text_features(self, prompt: Tensor | Parameter | np.ndarray | None) -> Tensor:
        """t_k for every class from [prompt ; E_class(c_k)], projected to the shared space. (K, D_I)"""
        config, weights = self.config, self.weights
        class_names = weights["text.class_names"]
        num_classes = config.num_classes

        if isinstance(prompt, Parameter):
            prompt = prompt.track()
        prompt = constant(prompt) if prompt is not None else None

        if prompt is not None and prompt.shape[0] > 0:
            if prompt.ndim != 2 or prompt.shape[1] != config.text_width or prompt.shape[0] > config.text_prompt_length:
                raise ShapeError("encode_text", prompt.shape, (config.text_prompt_length, config.text_width))
            prefix = broadcast_to(prompt, (num_classes, *prompt.shape))
            sequence = concat([prefix, class_names], axis=1)
        else:
            sequence = constant(class_names)

        length = sequence.shape[1]
        tokens = add(sequence, weights["text.position"][:length])

        for layer in range(config.text_depth):
            tokens = block(tokens, weights, f"text.blocks.{layer}", config.heads)

        feature = norm(token_at(tokens, length - 1), weights, "text.ln_final")
        return matmul(feature, weights["text.proj"])

    def encode_text(self, prompt: Tensor | Parameter | np.ndarray | None, class_index: int) -> Tensor:
        if not 0 <= class_index < self.config.num_classes:
            raise ContractError(f"class index {class_index} outside [0, {self.config.num_classes})")
        features = self.text_features(prompt)
        return reshape(ops.take(features, [class_index], axis=0), (features.shape[1],))

    def zero_shot_text_features(self) -> Tensor:
        if self._zero_shot_text is None:
            hand_prompt = self.hand_prompt if self.config.text_prompt_length > 0 else None
            self._zero_shot_text = Tensor(self.text_features(hand_prompt).data)
        return self._zero_shot_text

    def zero_shot_predict(self, x) -> np.ndarray:
        """Probabilities over K classes with the hand-crafted prompt; (K,) for one view, (B, K) for a batch"""
        x = constant(x)
        encoded = self.encode_image(x) if x.ndim == 3 else self.encode_images(x)
        return predict(encoded.v, self.zero_shot_text_features(), self.config.temperature).data

    def _batched_prompt(self, injected: Tensor, batch: int) -> Tensor:
        injected = constant(injected)
        width = self.config.image_width

        if injected.ndim == 2 and injected.shape[1] == width:
            return broadcast_to(injected, (batch, *injected.shape))
        if injected.ndim == 3 and injected.shape[0] == batch and injected.shape[2] == width:
            return injected

        raise ShapeError("inject_prompt", injected.shape, (batch, -1, width))
