"""Counter-based random substreams.

Every random draw in the package comes from a Philox4x64-10 generator
(numpy's ``Philox`` bit generator). A substream is identified by the pair
``(seed, index)``; both are packed into the 128-bit Philox key as
``key = (index << 64) | seed`` and the counter starts at zero. Philox's
state transition is ``counter += 1`` followed by ten keyed bijective
rounds, so the output of substream ``(seed, index)`` is a pure function of
the pair and never depends on how many other substreams were consumed
or on which worker consumed them.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameter

_U64 = 1 << 64


def substream(seed: int, index: int = 0) -> np.random.Generator:
    if not 0 <= seed < _U64:
        raise InvalidParameter(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= index < _U64:
        raise InvalidParameter(f"substream index out of range: {index}")
    return np.random.Generator(np.random.Philox(key=(index << 64) | seed))


def normalize_seed(seed: int) -> int:
    """Map any Python int onto the unsigned 64-bit range."""
    return int(seed) % _U64
