"""
Test-time adaptation of a frozen dual encoder with a learnable text prompt and a memory bank of
retrievable visual prompts, plus a synthetic distribution-shift benchmark to exercise it.
"""

__version__ = "0.1.0"

from .adaptation import AdaptConfig, Episode, MintEngine, MintParams, Sample, confidence_select, mint_loss
from .encoders import DualEncoder, EncoderConfig, FrozenWeights
from .errors import *
from .memory import MemoryPromptBank, compose, init_bank, retrieve
