"""Test maps with analytic Jacobians and known invertibility ground truth.

Every map is a total C1 function R^n -> R^n given in vectorized form:
`f` accepts arrays of shape (..., dim) and returns (..., dim), `jacobian`
returns (..., dim, dim).  Evaluation is pure (no state), so instances are
safe to call from multiple workers; the gallery itself is immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Order of the implication chain used by the criteria auditor: an earlier
# condition implies every later one.
CONDITION_KEYS = ("1", "2", "3", "starstar", "4", "5", "star", "6")


class NumericalFailure(RuntimeError):
    """A map evaluation produced a non-finite value.

    `point` holds the offending input when known.
    """

    def __init__(self, message: str, point: Optional[np.ndarray] = None):
        super().__init__(message)
        self.point = None if point is None else np.asarray(point, dtype=float)


@dataclass(frozen=True)
class MapUnderTest:
    name: str
    dim: int
    f: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    domain_hint: float = 10.0  # sampling box [-R, R]^dim
    vectorized: bool = True

    def f_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.f(x), dtype=float)

    def jac_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.jacobian(x), dtype=float)

    def f_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self.vectorized:
            return np.asarray(self.f(xs), dtype=float)
        return np.stack([self.f_at(x) for x in xs])

    def jac_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self.vectorized:
            return np.asarray(self.jacobian(xs), dtype=float)
        return np.stack([self.jac_at(x) for x in xs])


@dataclass(frozen=True)
class TruthRecord:
    """Known properties of a gallery map; None means unknown."""

    injective: Optional[bool]
    surjective: Optional[bool]
    norm_coercive: Optional[bool]
    conditions: dict  # keyed by CONDITION_KEYS, values True/False/None


@dataclass(frozen=True)
class GalleryEntry:
    map: MapUnderTest
    truth: TruthRecord
    provenance: str


def truth_chain_consistent(truth: TruthRecord) -> bool:
    """True when no condition marked yes sits upstream of one marked no."""
    vals = [truth.conditions.get(k) for k in CONDITION_KEYS]
    for i in range(len(vals)):
        if vals[i] is True and any(v is False for v in vals[i + 1 :]):
            return False
    return True


# ---------------------------------------------------------------------------
# map factories (coefficients adjustable; defaults match the shipped gallery)
# ---------------------------------------------------------------------------


def make_identity(dim: int = 2, name: str = "identity") -> MapUnderTest:
    eye = np.eye(dim)

    def f(x):
        return np.array(x, dtype=float, copy=True)

    def jac(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eye, x.shape[:-1] + (dim, dim)).copy()

    return MapUnderTest(name, dim, f, jac)


def make_diagonal(coeffs=(2.0, 3.0), name: str = "diag-2-3") -> MapUnderTest:
    d = np.asarray(coeffs, dtype=float)
    dim = d.size
    jmat = np.diag(d)

    def f(x):
        return np.asarray(x, dtype=float) * d

    def jac(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(jmat, x.shape[:-1] + (dim, dim)).copy()

    return MapUnderTest(name, dim, f, jac)


def make_shifted_sine(drift: float = 2.0, amplitude: float = 1.0) -> MapUnderTest:
    def f(x):
        t = np.asarray(x, dtype=float)
        return drift * t + amplitude * np.sin(t)

    def jac(x):
        t = np.asarray(x, dtype=float)
        return (drift + amplitude * np.cos(t))[..., None]

    return MapUnderTest("shifted-sine", 1, f, jac)


def make_cubic_drift(linear: float = 1.0, cubic: float = 1.0) -> MapUnderTest:
    def f(x):
        t = np.asarray(x, dtype=float)
        return linear * t + cubic * t**3

    def jac(x):
        t = np.asarray(x, dtype=float)
        return (linear + 3.0 * cubic * t**2)[..., None]

    return MapUnderTest("cubic-drift", 1, f, jac)


def make_arctan() -> MapUnderTest:
    def f(x):
        return np.arctan(np.asarray(x, dtype=float))

    def jac(x):
        t = np.asarray(x, dtype=float)
        return (1.0 / (1.0 + t**2))[..., None]

    return MapUnderTest("arctan", 1, f, jac)


def make_saturating(rate: float = 1.0) -> MapUnderTest:
    def f(x):
        t = np.asarray(x, dtype=float)
        return 1.0 - np.exp(-rate * t)

    def jac(x):
        t = np.asarray(x, dtype=float)
        return (rate * np.exp(-rate * t))[..., None]

    return MapUnderTest("saturating", 1, f, jac)


def make_complex_exp() -> MapUnderTest:
    """Planar map (x1, x2) -> e^{x1} (cos x2, sin x2).

    Everywhere a local diffeomorphism (Jacobian is e^{x1} times a rotation)
    but neither injective (period 2*pi in x2) nor surjective (misses 0).
    """

    def f(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(x[..., 0])
        return np.stack([e * np.cos(x[..., 1]), e * np.sin(x[..., 1])], axis=-1)

    def jac(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(x[..., 0])
        c = np.cos(x[..., 1])
        s = np.sin(x[..., 1])
        row0 = np.stack([e * c, -e * s], axis=-1)
        row1 = np.stack([e * s, e * c], axis=-1)
        return np.stack([row0, row1], axis=-2)

    return MapUnderTest("complex-exp", 2, f, jac)


# ---------------------------------------------------------------------------
# gallery
# ---------------------------------------------------------------------------


def _all_yes() -> dict:
    return {k: True for k in CONDITION_KEYS}


def _all_no() -> dict:
    return {k: False for k in CONDITION_KEYS}


def register_gallery() -> list[GalleryEntry]:
    """Shipped maps with ground-truth records.

    Truth entries respect the implication order of CONDITION_KEYS: a map
    marked yes for some condition is yes (or unknown) for everything
    downstream.
    """
    entries = [
        GalleryEntry(
            make_identity(2),
            TruthRecord(True, True, True, _all_yes()),
            "distance preserving; all downstream conditions follow",
        ),
        GalleryEntry(
            make_identity(1, name="identity-1d"),
            TruthRecord(True, True, True, _all_yes()),
            "distance preserving on the line",
        ),
        GalleryEntry(
            make_diagonal((2.0, 3.0)),
            TruthRecord(True, True, True, {**_all_yes(), "1": False}),
            "linear with singular values {2, 3}: expansive but not an isometry",
        ),
        GalleryEntry(
            make_shifted_sine(),
            TruthRecord(True, True, True, {**_all_yes(), "1": False}),
            "derivative 2 + cos t lies in [1, 3]: strictly expansive, onto R",
        ),
        GalleryEntry(
            make_cubic_drift(),
            TruthRecord(True, True, True, {**_all_yes(), "1": False}),
            "derivative 1 + 3 t^2 >= 1; odd and unbounded, onto R",
        ),
        GalleryEntry(
            make_arctan(),
            TruthRecord(True, False, False, _all_no()),
            "strictly increasing but range is (-pi/2, pi/2); derivative decays like 1/t^2",
        ),
        GalleryEntry(
            make_saturating(),
            TruthRecord(True, False, False, _all_no()),
            "range is (-inf, 1); derivative e^{-t} collapses as t -> +inf",
        ),
        GalleryEntry(
            make_complex_exp(),
            TruthRecord(False, False, False, _all_no()),
            "image misses the origin since e^{x1} > 0; (0,0) and (0,2pi) share the image (1,0)",
        ),
    ]
    for entry in entries:
        if not truth_chain_consistent(entry.truth):
            raise AssertionError(f"inconsistent truth record for {entry.map.name}")
    return entries


def gallery_by_name() -> dict:
    return {e.map.name: e for e in register_gallery()}


def _tri(v: Optional[bool]) -> str:
    return "unknown" if v is None else ("yes" if v else "no")


def gallery_listing() -> list[dict]:
    """Gallery serialized for the JSON export."""
    out = []
    for e in register_gallery():
        truth = {
            "injective": _tri(e.truth.injective),
            "surjective": _tri(e.truth.surjective),
            "norm_coercive": _tri(e.truth.norm_coercive),
        }
        truth.update({k: _tri(e.truth.conditions[k]) for k in CONDITION_KEYS})
        out.append(
            {
                "name": e.map.name,
                "dim": e.map.dim,
                "truth": truth,
                "provenance": e.provenance,
            }
        )
    return out


def jacobian_check(m: MapUnderTest, points, step: float = 1e-5) -> float:
    """Max relative deviation between the analytic Jacobian and central differences.

    Deviation at a point is max over matrix entries of
    |analytic - numeric| / (1 + |analytic|).  Raises NumericalFailure (with
    the offending probe point) if the map returns a non-finite value.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise ValueError("need at least one probe point")
    worst = 0.0
    for x in points:
        analytic = m.jac_at(x)
        numeric = np.empty_like(analytic)
        for j in range(m.dim):
            hi = x.copy()
            lo = x.copy()
            hi[j] += step
            lo[j] -= step
            fhi = m.f_at(hi)
            flo = m.f_at(lo)
            if not (np.all(np.isfinite(fhi)) and np.all(np.isfinite(flo))):
                raise NumericalFailure(
                    f"non-finite value of {m.name} near probe point {x.tolist()}", x
                )
            numeric[:, j] = (fhi - flo) / (2.0 * step)
        dev = np.abs(analytic - numeric) / (1.0 + np.abs(analytic))
        worst = max(worst, float(dev.max()))
    return worst
