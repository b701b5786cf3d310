"""
Deterministic random streams.

Every stream is keyed by (master_seed, indices..., tag) through numpy's
SeedSequence and drives a Philox counter-based generator. A stream does not
depend on which other streams were drawn before it, so permutation b sees the
same numbers whether the test runs on one thread or many.
"""
import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .models import MAX_SEED
from .errors import ConfigError

logger = logging.getLogger(__name__)

PERMUTATION_TAG = "permutation"
FIT_TAG = "fit"
OBSERVED_FIT_TAG = "fit-observed"


def tag_code(tag: str) -> int:
    """Stable 32-bit code for a purpose tag (Python's hash() is salted per process)."""
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:4], "little")


@dataclass(frozen=True)
class RngPolicy:
    master_seed: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= MAX_SEED:
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}.")

    def _seed_sequence(self, indices, tag: str) -> np.random.SeedSequence:
        key = tuple(int(i) for i in indices) + (tag_code(tag),)
        if any(k < 0 for k in key):
            raise ValueError(f"Stream indices must be non-negative, got {indices}.")
        return np.random.SeedSequence(int(self.master_seed), spawn_key=key)

    def stream(self, *indices: int, tag: str = PERMUTATION_TAG) -> np.random.Generator:
        """Independent generator for (indices, tag)."""
        return np.random.Generator(np.random.Philox(self._seed_sequence(indices, tag)))

    def derive_seed(self, *indices: int, tag: str) -> int:
        """A 64-bit seed for a nested experiment, e.g. replicate r of grid point g."""
        words = self._seed_sequence(indices, tag).generate_state(2, dtype=np.uint32)
        return int(words[0]) | (int(words[1]) << 32)
