"""Deterministic randomness with derivable substreams.

Every stochastic routine in the package takes a SeededRng. A stream is keyed
by (seed, path); identical keys give identical draw sequences on every
platform, and distinct paths give statistically independent streams, so
per-sample or per-trial work can be parallelized without draw-order coupling.
"""

import numpy as np


class SeededRng:
    """PCG64 generator keyed by a 64-bit seed plus an integer substream path."""

    def __init__(self, seed, path=()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def substream(self, *keys):
        """Derive an independent stream; the parent stream is not advanced."""
        return SeededRng(self.seed, self.path + tuple(int(k) for k in keys))

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator.choice(a, size=size, replace=replace, p=p)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, path={self.path})"
