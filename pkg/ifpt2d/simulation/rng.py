"""
Reproducible random streams.

Paths are grouped in blocks of PATHS_PER_BLOCK. Block ``b`` of stream ``s``
under seed ``k`` owns a counter-based Philox generator keyed by
SeedSequence(k, spawn_key=(s, b)) and draws one (PATHS_PER_BLOCK, 2) array of
standard normals per time step, whatever the number of paths actually used.
The noise seen by a path therefore depends only on (seed, stream, path index):
batches are order independent and can be split across threads freely.
"""
import numpy as np

PATHS_PER_BLOCK = 1024


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    """Generator for one block of paths."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream, block))))


def block_count(n_paths: int) -> int:
    return -(-n_paths // PATHS_PER_BLOCK)


def block_of(path_index: int) -> int:
    return path_index // PATHS_PER_BLOCK
