"""Seed derivation: one root seed fans out into named sub-streams.

Components (scene generation, episode layout, policy noise, pedestrian
behavior) each draw from their own stream so one can be varied while the
others stay fixed.
"""

from __future__ import annotations

import numpy as np

_STREAMS = {"scene": 0, "episode": 1, "policy": 2, "pedestrian": 3, "train": 4}


def stream_seed_seq(root_seed, stream, *indices):
    """SeedSequence for a named stream, optionally refined by integer indices."""
    sid = _STREAMS[stream] if isinstance(stream, str) else int(stream)
    return np.random.SeedSequence([int(root_seed) & 0xFFFFFFFFFFFFFFFF, sid, *map(int, indices)])


def stream_rng(root_seed, stream, *indices) -> np.random.Generator:
    return np.random.default_rng(stream_seed_seq(root_seed, stream, *indices))


def derive_u64(root_seed, stream, *indices) -> int:
    """Stable u64 child seed (used to stamp EpisodeSpec.seed)."""
    return int(stream_seed_seq(root_seed, stream, *indices).generate_state(1, np.uint64)[0])
