"""Counter-based random number streams.

Every chain owns a Philox (4x64) generator keyed by (seed, stream id), so
parallel replicas never share state and any estimate can be replayed
bit-for-bit from its recorded provenance.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "philox4x64"


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(stream_id)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def provenance(seed: int, stream_id: int = 0) -> tuple[str, int, int]:
    return (GENERATOR_NAME, int(seed), int(stream_id))
