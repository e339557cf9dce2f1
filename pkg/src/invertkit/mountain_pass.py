"""Saddle search between two preimages of the same target.

When a map takes the same value at two points u and u+e, the target
functional vanishes at both, yet stays above a positive barrier rho on a
small sphere around u (the barrier comes from the openness rate of the
map).  Minimizing the maximum of the functional along a discrete path
between the two points then produces a sequence of near-critical points at
a level >= rho: evidence that drives the injectivity falsifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._sampling import sphere_points
from .core import TargetFunctional, Weight, banach_constant, banach_constant_many
from .descent import (
    CLASS_BUDGET,
    CLASS_SOLVED,
    ARMIJO_C,
    CriticalSequenceWitness,
    DescentConfig,
    minimize,
)
from .maps import MapUnderTest

OPENNESS_SPHERE_SAMPLES = 32
OPENNESS_UNIFORMITY = 0.75
DYADIC_DEPTH = 20
ENDPOINT_SLACK = 1e-9


class BandEndpointError(ValueError):
    """Raised when a path endpoint sits above the barrier level."""

    def __init__(self, f_start: float, f_end: float, rho: float):
        super().__init__(
            f"endpoint values ({f_start:.6g}, {f_end:.6g}) exceed barrier rho={rho:.6g}"
        )
        self.f_start = f_start
        self.f_end = f_end
        self.rho = rho


@dataclass(frozen=True)
class MountainPassGeometry:
    """Barrier data around a base preimage u; e is the second preimage
    relative to u and rho = alpha^2 r^2 / 2 exactly."""

    u: np.ndarray
    e: np.ndarray
    r: float
    alpha: float
    rho: float

    def to_json(self) -> dict:
        return {
            "u": np.asarray(self.u, dtype=float).tolist(),
            "e": np.asarray(self.e, dtype=float).tolist(),
            "r": float(self.r),
            "alpha": float(self.alpha),
            "rho": float(self.rho),
        }


@dataclass
class PathState:
    nodes: np.ndarray  # (K, dim), endpoints fixed at 0 and e

    @property
    def K(self) -> int:
        return self.nodes.shape[0]


def estimate_openness(m: MapUnderTest, u) -> tuple:
    """Openness rate estimate (alpha, r) at u.

    alpha is half the smallest singular value at u; r is the largest dyadic
    radius 2^-k, k = 0..20, on whose sphere the sampled smallest singular
    value stays above three quarters of its value at u.
    """
    u = np.asarray(u, dtype=float).reshape(m.dim)
    sig0 = banach_constant(m, u)
    if sig0 <= 0.0:
        raise ValueError(f"{m.name} is not a local diffeomorphism at {u.tolist()}")
    alpha = 0.5 * sig0
    for k in range(DYADIC_DEPTH + 1):
        r = 2.0 ** (-k)
        pts = u + sphere_points(m.dim, r, OPENNESS_SPHERE_SAMPLES)
        if float(np.min(banach_constant_many(m, pts))) >= OPENNESS_UNIFORMITY * sig0:
            return alpha, r
    raise RuntimeError(
        f"no dyadic radius down to 2^-{DYADIC_DEPTH} gives a uniform Jacobian bound at {u.tolist()}"
    )


def make_geometry(m: MapUnderTest, u, second) -> MountainPassGeometry:
    """Build the barrier geometry from two absolute preimage points."""
    u = np.asarray(u, dtype=float).reshape(m.dim)
    second = np.asarray(second, dtype=float).reshape(m.dim)
    alpha, r = estimate_openness(m, u)
    e = second - u
    if float(np.linalg.norm(e)) < r:
        raise ValueError("second preimage lies inside the separating sphere")
    rho = 0.5 * alpha**2 * r**2
    return MountainPassGeometry(u=u, e=e, r=r, alpha=alpha, rho=rho)


@dataclass
class BandResult:
    witness: CriticalSequenceWitness
    level_history: np.ndarray
    path: PathState
    geometry: MountainPassGeometry

    @property
    def level(self) -> float:
        return self.witness.level


def _reparametrize(nodes: np.ndarray) -> np.ndarray:
    """Redistribute nodes uniformly in chord length along the polyline."""
    seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(seg)])
    total = t[-1]
    if total == 0.0:
        return nodes.copy()
    targets = np.linspace(0.0, total, nodes.shape[0])
    out = np.empty_like(nodes)
    for d in range(nodes.shape[1]):
        out[:, d] = np.interp(targets, t, nodes[:, d])
    out[0] = nodes[0]
    out[-1] = nodes[-1]
    return out


def elastic_band(
    F: TargetFunctional,
    geom: MountainPassGeometry,
    K: int = 64,
    w: Optional[Weight] = None,
    iters: int = 2000,
) -> BandResult:
    """Minimize the path maximum of F along a K-node band from 0 to e.

    Each iteration takes an Armijo-backtracked gradient step on the current
    maximal node (so the path maximum never increases), then redistributes
    nodes uniformly in chord length; a redistribution that would raise the
    maximum is skipped for that iteration.  The witness records the maximal
    node whenever its weighted criticality extends a non-increasing
    envelope.
    """
    if K < 16:
        raise ValueError("need at least 16 band nodes")
    if w is None:
        w = Weight.zero()
    m = F.map
    u = geom.u

    def batch_vals(Z):
        R = m.f_many(u + Z) - F.target
        return 0.5 * np.sum(R * R, axis=-1)

    e = np.asarray(geom.e, dtype=float)
    nodes = np.linspace(np.zeros_like(e), e, K)
    vals = batch_vals(nodes)
    slack = geom.rho * (1.0 + ENDPOINT_SLACK)
    if vals[0] > slack or vals[-1] > slack:
        raise BandEndpointError(float(vals[0]), float(vals[-1]), geom.rho)

    rec_pts: list = []
    rec_f: list = []
    rec_wc: list = []
    levels = np.empty(iters)
    note = ""
    n_done = 0

    for it in range(iters):
        j = 1 + int(np.argmax(vals[1:-1]))
        x = nodes[j]
        absolute = u + x
        J = m.jac_at(absolute)
        g = J.T @ (m.f_at(absolute) - F.target)
        gn = float(np.linalg.norm(g))
        wc = gn * (1.0 + float(w.h(float(np.linalg.norm(absolute)))))
        if not rec_pts or wc <= rec_wc[-1]:
            if not rec_pts or not np.array_equal(absolute, rec_pts[-1]):
                rec_pts.append(absolute.copy())
                rec_f.append(float(vals[j]))
                rec_wc.append(wc)
        if gn == 0.0:
            note = "maximal node is stationary"
            levels[it] = float(np.max(vals))
            n_done = it + 1
            break

        seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
        spacing = float(np.sum(seg)) / (K - 1)
        d = 2.0 * spacing
        moved = False
        while d > 1e-16 * (1.0 + float(np.linalg.norm(x))):
            x_try = x - (d / gn) * g
            f_try = batch_vals(x_try[None, :])[0]
            if np.isfinite(f_try) and f_try <= vals[j] - ARMIJO_C * d * gn:
                nodes[j] = x_try
                vals[j] = f_try
                moved = True
                break
            d *= 0.5
        if not moved:
            note = "maximal node stalled"
            levels[it] = float(np.max(vals))
            n_done = it + 1
            break

        new_nodes = _reparametrize(nodes)
        new_vals = batch_vals(new_nodes)
        if float(np.max(new_vals)) <= float(np.max(vals)):
            nodes = new_nodes
            vals = new_vals
        levels[it] = float(np.max(vals))
        n_done = it + 1
    else:
        note = "iteration budget exhausted"
        n_done = iters

    level = float(np.max(vals))
    witness = CriticalSequenceWitness(
        points=rec_pts,
        f_values=rec_f,
        weighted_criticalities=rec_wc,
        level=level,
        classification=CLASS_BUDGET,
        note=note,
    )
    return BandResult(
        witness=witness,
        level_history=levels[:n_done],
        path=PathState(nodes=nodes),
        geometry=geom,
    )


@dataclass
class FalsifierResult:
    verdict: str  # two_preimages_found | no_evidence
    preimages: Optional[tuple] = None
    geometry: Optional[MountainPassGeometry] = None
    band: Optional[BandResult] = None
    witnesses: Optional[list] = None

    @property
    def found(self) -> bool:
        return self.verdict == "two_preimages_found"


def injectivity_falsifier(
    m: MapUnderTest,
    y,
    preimage_search_starts,
    w: Optional[Weight] = None,
    residual_tol: float = 1e-10,
    K: int = 64,
    band_iters: int = 2000,
    escape_norm: float = 100.0,
) -> FalsifierResult:
    """Hunt two preimages of y and, if found, run the band between them.

    Solutions closer than 10 * residual_tol are treated as one preimage.
    """
    if w is None:
        w = Weight.zero()
    F = TargetFunctional(m, y)
    solutions: list = []
    witnesses: list = []
    for start in preimage_search_starts:
        cfg = DescentConfig(
            start=np.asarray(start, dtype=float),
            residual_tol=residual_tol,
            escape_norm=escape_norm,
        )
        wit = minimize(F, w, cfg)
        witnesses.append(wit)
        if wit.classification == CLASS_SOLVED:
            solutions.append(np.asarray(wit.points[-1], dtype=float))

    pair = None
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            if float(np.linalg.norm(solutions[i] - solutions[j])) > 10.0 * residual_tol:
                pair = (solutions[i], solutions[j])
                break
        if pair:
            break
    if pair is None:
        return FalsifierResult(verdict="no_evidence", witnesses=witnesses)

    geom = make_geometry(m, pair[0], pair[1])
    band = elastic_band(F, geom, K=K, w=w, iters=band_iters)
    return FalsifierResult(
        verdict="two_preimages_found",
        preimages=pair,
        geometry=geom,
        band=band,
        witnesses=witnesses,
    )
