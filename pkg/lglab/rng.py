import numpy as np

__all__ = ['splitmix64', 'spawn_seed', 'make_rng']

_MASK = (1 << 64) - 1


def splitmix64(state):
    """One output of the splitmix64 generator seeded at ``state``."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def spawn_seed(base_seed, index):
    """Seed of the ``index``-th worker stream derived from ``base_seed``."""
    return splitmix64((splitmix64(int(base_seed) & _MASK) + int(index)) & _MASK)


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
