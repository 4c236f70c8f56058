"""Vectors, seeded randomness and the three sign operators.

Dense vectors are plain ``float64`` numpy arrays; sign vectors are ``int8``
arrays with entries in {-1, 0, +1}.  Every stochastic operation takes an
explicit :class:`RandomSource`; there is no module-level generator.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

SIGN_DTYPE = np.int8
_SEED_LIMIT = 2**64


class InvalidInputError(ValueError):
    """Raised for non-finite entries, dimension mismatches and similar."""


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Return ``v`` as a finite, non-empty 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def check_same_dim(a: np.ndarray, b: np.ndarray, what: str = "vectors") -> None:
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch between {what}: {a.shape} vs {b.shape}")


class RandomSource:
    """Seeded generator with derivable independent child streams.

    Wraps :class:`numpy.random.Generator` (PCG64).  Two sources built from the
    same seed and spawn path produce bit-identical sample sequences.

    >>> RandomSource(7).uniform(3).tolist() == RandomSource(7).uniform(3).tolist()
    True
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed < _SEED_LIMIT:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.path = tuple(int(p) for p in _path)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def spawn(self, *keys: int) -> "RandomSource":
        """Child stream keyed by ``keys``; independent of this stream's state."""
        return RandomSource(self.seed, self.path + tuple(keys))

    def uniform(self, size=None):
        """Uniform reals in [0, 1)."""
        return self._gen.random(size)

    def normal(self, size=None):
        """Standard normal draws (numpy's ziggurat method)."""
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in ``[low, high)``."""
        return self._gen.integers(low, high, size=size)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, path={self.path})"


def sign(v) -> np.ndarray:
    """Element-wise signum with ``sign(0) = 0``.

    No snapping of tiny values: ``sign(1e-300) == 1``.
    """
    arr = as_vector(v)
    return np.sign(arr).astype(SIGN_DTYPE)


def _plus_probabilities(arr: np.ndarray, scale: float) -> np.ndarray:
    # rescale first so the norm cannot overflow
    w = arr / scale
    return 0.5 + 0.5 * w / np.sqrt(np.dot(w, w))


def stochastic_sign_probabilities(v) -> np.ndarray:
    """P(coordinate = +1) under the stochastic sign of ``v``.

    ``1/2 + v_i / (2 ||v||)`` per coordinate; all 1/2 for the zero vector (the
    operator itself returns zeros there, see :func:`stochastic_sign`).
    """
    arr = as_vector(v)
    scale = np.abs(arr).max()
    if scale == 0.0:
        return np.full(arr.shape, 0.5)
    return _plus_probabilities(arr, scale)


def stochastic_sign(v, rng: RandomSource) -> np.ndarray:
    """Randomised sign that is unbiased after scaling by ``||v||``.

    Each coordinate is independently +1 with probability
    ``1/2 + v_i/(2||v||)`` and -1 otherwise, so nonzero input never yields a 0
    entry (a zero coordinate of a nonzero vector is a fair coin).  The zero
    vector maps to the zero vector and consumes no randomness.
    """
    arr = as_vector(v)
    scale = np.abs(arr).max()
    if scale == 0.0:
        return np.zeros(arr.shape, dtype=SIGN_DTYPE)
    u = rng.uniform(arr.shape[0])
    return np.where(u < _plus_probabilities(arr, scale), 1, -1).astype(SIGN_DTYPE)


def stochastic_sign_samples(v, n: int, rng: RandomSource) -> np.ndarray:
    """``n`` independent stochastic signs of ``v`` as an ``(n, d)`` array.

    Row ``j`` equals what the ``j``-th of ``n`` consecutive
    :func:`stochastic_sign` calls on the same stream would return.
    """
    arr = as_vector(v)
    n = int(n)
    if n < 0:
        raise InvalidInputError("n must be nonnegative")
    scale = np.abs(arr).max()
    if scale == 0.0:
        return np.zeros((n, arr.shape[0]), dtype=SIGN_DTYPE)
    u = rng.uniform((n, arr.shape[0]))
    return np.where(u < _plus_probabilities(arr, scale), 1, -1).astype(SIGN_DTYPE)


def majority_vote(signs: Sequence) -> np.ndarray:
    """Coordinate-wise sign of the summed votes; a tied vote gives 0."""
    if len(signs) == 0:
        raise InvalidInputError("majority_vote needs at least one sign vector")
    arrays = [np.asarray(s).reshape(-1) for s in signs]
    if len({a.shape for a in arrays}) != 1:
        raise InvalidInputError("all sign vectors must share one dimension")
    stacked = np.stack(arrays)
    if np.any(np.abs(stacked) > 1) or np.any(stacked != np.round(stacked)):
        raise InvalidInputError("sign vectors must have entries in {-1, 0, 1}")
    total = stacked.astype(np.int64).sum(axis=0)
    return np.sign(total).astype(SIGN_DTYPE)
