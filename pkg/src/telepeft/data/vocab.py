"""Fixed 64-word vocabulary and prompt tokenization.

Token ids 0-3 are the reserved pad/bos/eos/unk markers shared with the
text encoder; sequences are padded or truncated to exactly 16 positions.
"""

from __future__ import annotations

import numpy as np

from ..errors import InputError
from ..model.backbone import BOS_ID, EOS_ID, PAD_ID, UNK_ID
from ..model.spec import TEXT_LEN

_WORDS = [
    "<pad>", "<bos>", "<eos>", "<unk>",
    "segment", "the", "disk", "square", "triangle",
    "a", "an", "please", "find", "show", "mark", "mask", "outline",
    "region", "area", "shape", "object", "target", "foreground",
    "background", "image", "picture", "scene", "in", "on", "of",
    "this", "that", "bright", "dark", "small", "large", "tiny", "big",
    "round", "boxy", "pointed", "left", "right", "top", "bottom",
    "center", "one", "two", "three", "first", "second", "third",
    "red", "green", "blue", "gray", "white", "black", "only", "all",
    "with", "and", "then", "now",
]

VOCAB = tuple(_WORDS)
WORD_TO_ID = {w: i for i, w in enumerate(VOCAB)}

assert len(VOCAB) == 64
assert WORD_TO_ID["<pad>"] == PAD_ID
assert WORD_TO_ID["<bos>"] == BOS_ID
assert WORD_TO_ID["<eos>"] == EOS_ID
assert WORD_TO_ID["<unk>"] == UNK_ID


def tokenize(prompt: str) -> np.ndarray:
    """Prompt -> fixed-length id sequence [bos, words..., eos, pad...]."""
    words = prompt.lower().split()
    ids = [BOS_ID]
    for word in words[: TEXT_LEN - 2]:
        if word not in WORD_TO_ID:
            raise InputError(f"word {word!r} is not in the 64-word vocabulary")
        ids.append(WORD_TO_ID[word])
    ids.append(EOS_ID)
    ids.extend([PAD_ID] * (TEXT_LEN - len(ids)))
    return np.asarray(ids, dtype=np.int64)
