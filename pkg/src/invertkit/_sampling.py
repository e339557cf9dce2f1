"""Deterministic sampling streams shared by the checkers.

Every sampling stream is derived from (seed, labels...) so that checkers
running concurrently, or in any order, draw identical points.
"""

from __future__ import annotations

import zlib

import numpy as np


def rng_for(seed: int, *labels) -> np.random.Generator:
    parts = [int(seed) & 0xFFFFFFFF]
    parts.extend(zlib.crc32(str(label).encode("utf-8")) for label in labels)
    return np.random.default_rng(np.random.SeedSequence(parts))


def sample_ball(rng: np.random.Generator, dim: int, radius: float, count: int) -> np.ndarray:
    """Uniform points in the closed ball of the given radius."""
    d = rng.standard_normal((count, dim))
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.random(count) ** (1.0 / dim)
    return d / norms * radii[:, None]


def sample_shell(
    rng: np.random.Generator, dim: int, r_lo: float, r_hi: float, count: int
) -> np.ndarray:
    """Uniform points in the annulus r_lo <= |x| <= r_hi."""
    d = rng.standard_normal((count, dim))
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    u = rng.random(count)
    radii = (r_lo**dim + u * (r_hi**dim - r_lo**dim)) ** (1.0 / dim)
    return d / norms * radii[:, None]


def sphere_points(dim: int, radius: float, count: int, rng=None) -> np.ndarray:
    """Deterministic points on the sphere of the given radius.

    dim 1 gives the two endpoints, dim 2 equally spaced angles; higher
    dimensions draw normalized Gaussian directions from `rng`.
    """
    if dim == 1:
        pts = np.array([[-radius], [radius]])
        reps = int(np.ceil(count / 2))
        return np.tile(pts, (reps, 1))[:count]
    if dim == 2:
        angles = 2.0 * np.pi * np.arange(count) / count
        return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if rng is None:
        rng = rng_for(0, "sphere", dim, count)
    d = rng.standard_normal((count, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return radius * d


def edge_directions(dim: int) -> np.ndarray:
    """Fixed unit directions used to probe shell edges exactly."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        angles = 2.0 * np.pi * np.arange(8) / 8
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    dirs = np.concatenate([np.eye(dim), -np.eye(dim)], axis=0)
    return dirs


def stratified_ball(
    rng: np.random.Generator, dim: int, radius: float, count: int, shells: int = 8
) -> np.ndarray:
    """Shell-stratified sample of the ball, plus exact edge probes per shell.

    Stratification keeps the outer shells represented, which matters when a
    quantity being minimized decays toward the boundary.
    """
    edges = np.linspace(0.0, radius, shells + 1)
    per = max(1, count // shells)
    parts = [np.zeros((1, dim))]
    probes = edge_directions(dim)
    for j in range(shells):
        parts.append(sample_shell(rng, dim, edges[j], edges[j + 1], per))
        parts.append(probes * edges[j + 1])
    return np.concatenate(parts, axis=0)
