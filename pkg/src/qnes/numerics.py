"""Deterministic random streams and the small dense-matrix helpers the optimizers need."""

from __future__ import annotations

import numpy as np

__all__ = [
    "SeededRng",
    "sample_standard_normal_vector",
    "matrix_exponential_symmetric",
    "scale_from_factor",
]

SYMMETRY_TOL = 1e-10


class SeededRng:
    """Counter-based random stream, reproducible across platforms and schedules.

    A stream is identified by (seed, spawn path); the same identity always replays
    the same draw sequence, and distinct identities are statistically independent.
    ``stream(i)`` derives child stream ``i``; children are cached on the parent so
    repeated lookups keep advancing the same child state. Per-walker child streams
    make results independent of evaluation order.
    """

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if stream_id < 0:
            raise ValueError("stream_id must be a non-negative integer")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = _path
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=_path + (self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(seq))
        self._children: dict[int, SeededRng] = {}

    def stream(self, child_id: int) -> "SeededRng":
        """Independent child stream; cached so its state persists across calls."""
        child = self._children.get(child_id)
        if child is None:
            child = SeededRng(self.seed, child_id, self._path + (self.stream_id,))
            self._children[child_id] = child
        return child

    def normal(self, d: int) -> np.ndarray:
        if d < 1:
            raise ValueError("dimension must be >= 1")
        return self._gen.standard_normal(d)

    def uniform(self, d: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        if d < 1:
            raise ValueError("dimension must be >= 1")
        return self._gen.uniform(low, high, size=d)

    def integers(self, low: int, high: int, size: int) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def sample_standard_normal_vector(rng: SeededRng, d: int) -> np.ndarray:
    """Draw d independent standard-normal values, advancing the stream."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return rng.normal(d)


def _check_square(g: np.ndarray, name: str) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
        raise ValueError(f"{name} must be a square matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError(f"{name} must have finite entries")
    return g


def matrix_exponential_symmetric(g: np.ndarray) -> np.ndarray:
    """exp(G) for symmetric G via eigendecomposition.

    Satisfies det(exp(G)) = exp(trace(G)); in particular traceless G maps to a
    unit-determinant result, which is what keeps the shape matrix normalized
    across full-covariance updates.
    """
    g = _check_square(g, "matrix")
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL:
        raise ValueError(f"matrix must be symmetric within {SYMMETRY_TOL:g}")
    w, v = np.linalg.eigh(g)
    return (v * np.exp(w)) @ v.T


def scale_from_factor(a: np.ndarray) -> tuple[float, np.ndarray]:
    """Split a covariance factor A into (sigma, B) with sigma = |det A|^(1/d), B = A/sigma.

    B then has |det B| = 1, the normalization the full-covariance strategy maintains.
    """
    a = _check_square(a, "covariance factor")
    d = a.shape[0]
    det = np.linalg.det(a)
    if abs(det) == 0.0:
        raise ValueError("degenerate covariance factor: |det A| must be positive")
    sigma = float(abs(det) ** (1.0 / d))
    return sigma, a / sigma
