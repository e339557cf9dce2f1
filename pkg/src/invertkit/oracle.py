"""Brute-force ground truth for low dimensions.

Grid scans give independent injectivity / coverage / boundary-growth
verdicts on boxes (dim <= 2), and 1-D bisection provides the root oracle
that the descent solver is checked against.  Nothing here shares code with
the solver paths it is used to verify.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .maps import MapUnderTest

GRID_POINT_LIMIT = 10**7
# Image-space closeness for a collision: a multiple of the largest image of
# one domain cell near the pair, estimated through the local Jacobian norm.
COLLISION_CELL_FACTOR = 3.0
# Domain separation required before near-equal images count as a collision;
# scaled so that pairs a Lipschitz bound could explain are never flagged.
SEPARATION_TOL_FACTOR = 4.0


@dataclass
class GridVerdict:
    box: float
    resolution: int
    injective_on_box: bool
    collision_pair: Optional[tuple]
    covered_targets: float
    min_f_norm_on_boundary: float

    def to_json(self) -> dict:
        pair = None
        if self.collision_pair is not None:
            pair = [np.asarray(p, dtype=float).tolist() for p in self.collision_pair]
        return {
            "box": float(self.box),
            "resolution": int(self.resolution),
            "injective_on_box": bool(self.injective_on_box),
            "collision_pair": pair,
            "covered_targets": float(self.covered_targets),
            "min_f_norm_on_boundary": float(self.min_f_norm_on_boundary),
        }


def _grid_points(R: float, resolution: int, dim: int) -> np.ndarray:
    axis = np.linspace(-R, R, resolution)
    if dim == 1:
        return axis[:, None]
    a, b = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([a.ravel(), b.ravel()], axis=1)


def _find_collision(
    pts: np.ndarray,
    images: np.ndarray,
    opnorm: np.ndarray,
    sigmin: np.ndarray,
    cell: float,
    cell_diag: float,
) -> Optional[tuple]:
    """First domain pair with near-equal images that a local Lipschitz bound
    cannot explain; None if the grid looks injective."""
    tol = COLLISION_CELL_FACTOR * cell_diag * opnorm
    tree = cKDTree(images)
    n = pts.shape[0]
    chunk = 20000
    floor = 1e-300
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        balls = tree.query_ball_point(images[lo:hi], r=tol[lo:hi], workers=-1)
        sizes = np.fromiter((len(b) for b in balls), dtype=np.int64, count=hi - lo)
        if sizes.sum() == 0:
            continue
        idx_i = np.repeat(np.arange(lo, hi), sizes)
        idx_j = np.concatenate([np.asarray(b, dtype=np.int64) for b in balls])
        keep = idx_j > idx_i
        idx_i, idx_j = idx_i[keep], idx_j[keep]
        if idx_i.size == 0:
            continue
        img_dist = np.linalg.norm(images[idx_i] - images[idx_j], axis=1)
        pair_tol = COLLISION_CELL_FACTOR * cell_diag * np.maximum(opnorm[idx_i], opnorm[idx_j])
        dom_dist = np.linalg.norm(pts[idx_i] - pts[idx_j], axis=1)
        sig = np.maximum(np.minimum(sigmin[idx_i], sigmin[idx_j]), floor)
        min_sep = np.maximum(2.0 * cell, SEPARATION_TOL_FACTOR * pair_tol / sig)
        mask = (img_dist <= pair_tol) & (dom_dist > min_sep)
        if not np.any(mask):
            continue
        ii, jj = idx_i[mask], idx_j[mask]
        order = np.lexsort((jj, ii))
        a, b = ii[order[0]], jj[order[0]]
        return (pts[a].copy(), pts[b].copy())
    return None


def grid_scan(
    m: MapUnderTest,
    R: float,
    resolution: int,
    image_tol: float,
    target_box: float = 2.0,
    targets_per_axis: int = 21,
) -> GridVerdict:
    """Evaluate the map on a full grid of the box [-R, R]^dim and report
    injectivity, coverage of an image-space target grid, and the minimum
    image norm on the box boundary."""
    if m.dim > 2:
        raise ValueError("grid oracle supports dim <= 2 only")
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    if resolution**m.dim > GRID_POINT_LIMIT:
        raise ValueError(f"grid of {resolution}^{m.dim} points exceeds the memory guard")

    pts = _grid_points(R, resolution, m.dim)
    images = m.f_many(pts)
    J = m.jac_many(pts)
    svals = np.linalg.svd(J, compute_uv=False)
    opnorm = svals[:, 0]
    sigmin = svals[:, -1]
    cell = 2.0 * R / (resolution - 1)
    cell_diag = cell * np.sqrt(m.dim)

    pair = _find_collision(pts, images, opnorm, sigmin, cell, cell_diag)

    taxis = np.linspace(-target_box, target_box, targets_per_axis)
    if m.dim == 1:
        targets = taxis[:, None]
    else:
        ta, tb = np.meshgrid(taxis, taxis, indexing="ij")
        targets = np.stack([ta.ravel(), tb.ravel()], axis=1)
    tree = cKDTree(images)
    dist, _ = tree.query(targets, k=1, workers=-1)
    covered = float(np.mean(dist <= image_tol))

    boundary = np.any(np.isclose(np.abs(pts), R), axis=1)
    min_boundary = float(np.min(np.linalg.norm(images[boundary], axis=1)))

    return GridVerdict(
        box=R,
        resolution=resolution,
        injective_on_box=pair is None,
        collision_pair=pair,
        covered_targets=covered,
        min_f_norm_on_boundary=min_boundary,
    )


def bisect_root_1d(g: Callable, a: float, b: float, tol: float = 1e-12) -> float:
    """Bisection root of a scalar function on a sign-changing bracket.

    Returns t with |g(t)| <= tol.  Raises ValueError when g(a) and g(b)
    share a sign."""
    fa = float(g(a))
    fb = float(g(b))
    if fa == 0.0:
        return float(a)
    if fb == 0.0:
        return float(b)
    if fa * fb > 0.0:
        raise ValueError("bracket endpoints must have opposite signs")
    lo, hi, flo = (a, b, fa) if fa < 0 else (b, a, fb)
    mid = 0.5 * (lo + hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = float(g(mid))
        if abs(fm) <= tol:
            return float(mid)
        if fm < 0.0:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(f"bisection stalled: |g| = {abs(float(g(mid))):.3g} > tol = {tol:.3g}")


def central_gradient(fun: Callable, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function; the independent
    check against analytic gradients."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        g[i] = (fun(hi) - fun(lo)) / (2.0 * step)
    return g
