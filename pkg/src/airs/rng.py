"""Named random substreams derived from one root seed.

Every stochastic component (city layout, user walks, channel fading, policy
init, exploration noise) draws from its own generator so that re-seeding or
swapping one component never perturbs the others.
"""

import zlib

import numpy as np

# Canonical stream names used across the package.
STREAM_CITY = "city"
STREAM_USERS = "users"
STREAM_CHANNEL = "channel"
STREAM_RESET = "reset"
STREAM_POLICY_INIT = "policy-init"
STREAM_EXPLORATION = "exploration"


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a generator for (seed, name), stable across runs and platforms."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
