from __future__ import annotations

import hashlib

import numpy as np


def _stream_key(seed: int, stream: tuple) -> int:
    text = repr((int(seed),) + tuple(str(s) for s in stream))
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:16], "little")


def generator(seed: int, *stream) -> np.random.Generator:
    """
    Counter-based generator for (seed, stream...).

    Each sample of a suite gets its own stream label, so the values drawn
    do not depend on how work is split across threads.
    """
    return np.random.Generator(np.random.Philox(key=_stream_key(seed, stream)))
