import importlib.util
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]


def _import_package():
    """Loads `src/` as the `mint_tta` package when it is not installed"""
    try:
        import mint_tta  # noqa: F401
    except ModuleNotFoundError:
        spec = importlib.util.spec_from_file_location(
            "mint_tta", ROOT / "src" / "__init__.py", submodule_search_locations=[str(ROOT / "src")]
        )
        module = importlib.util.module_from_spec(spec)
        sys.modules["mint_tta"] = module
        spec.loader.exec_module(module)


_import_package()

from mint_tta.adaptation import AdaptConfig, MintEngine  # noqa: E402
from mint_tta.encoders import DualEncoder, EncoderConfig  # noqa: E402


@pytest.fixture
def encoder_config() -> EncoderConfig:
    return EncoderConfig(
        image_width=8,
        text_width=8,
        image_depth=3,
        text_depth=1,
        heads=2,
        grid=2,
        patch=2,
        num_classes=3,
        text_prompt_length=2,
        class_name_length=1,
        query_layers=2,
        weight_seed=3,
    )


@pytest.fixture
def encoder(encoder_config) -> DualEncoder:
    return DualEncoder(encoder_config)


@pytest.fixture
def adapt_config() -> AdaptConfig:
    return AdaptConfig(views=6, confidence=0.5, bank_size=5, prompt_length=2, selected_per_layer=2, bank_seed=1)


@pytest.fixture
def engine(encoder, adapt_config) -> MintEngine:
    return MintEngine(encoder, adapt_config)


@pytest.fixture
def image(encoder_config) -> np.ndarray:
    return np.random.default_rng(11).standard_normal(encoder_config.image_shape)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
