"""Descent engine for the target functional with weighted stopping diagnostics.

The minimizer is plain gradient descent with Armijo backtracking (halving,
sufficient-decrease constant 1e-4) and a doubling trial step, so the
recorded functional values are non-increasing by construction.  A run ends
in one of four ways: the residual drops below tolerance (a solution), the
iterates march off past `escape_norm` while the functional flattens (the
finite-budget stand-in for a minimizing sequence with no convergent
subsequence), the criticality schedule is exhausted at a stationary
non-solution, or the budget runs out.

Checkpoints: a decreasing schedule eps_1 > eps_2 > ... of weighted
criticality targets; the first iterate reaching each target is recorded.
Once the schedule is exhausted the run keeps going, recording any iterate
whose weighted criticality extends the non-increasing envelope, until an
escape pattern forms or progress stalls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import TargetFunctional, Weight
from .maps import MapUnderTest, NumericalFailure

ARMIJO_C = 1e-4

CLASS_SOLVED = "converged_to_solution"
CLASS_CRITICAL = "converged_to_critical_nonsolution"
CLASS_ESCAPED = "escaped_to_infinity"
CLASS_BUDGET = "budget_exhausted"


def default_criticality_targets(count: int = 30):
    """Schedule eps_n = 10^(-n/2), n = 1..count."""
    return tuple(10.0 ** (-(n + 1) / 2.0) for n in range(count))


@dataclass
class DescentConfig:
    start: np.ndarray
    residual_tol: float = 1e-10
    criticality_targets: Sequence[float] = field(default_factory=default_criticality_targets)
    max_iters: int = 4000
    escape_norm: float = 100.0
    f_bound_window: float = 1e-3
    # Per-iterate displacement bound, as a multiple of 1 + |x|.  Plain Armijo
    # accepts arbitrarily long steps down exponentially flat valleys; the
    # bound keeps the iterate trail dense enough for escape diagnostics.
    max_step_factor: float = 0.5

    def validate(self, dim: int) -> None:
        if self.residual_tol <= 0 or self.escape_norm <= 0 or self.f_bound_window <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step_factor <= 0:
            raise ValueError("max_step_factor must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        eps = np.asarray(self.criticality_targets, dtype=float)
        if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("criticality_targets must be positive and strictly decreasing")
        start = np.asarray(self.start, dtype=float).reshape(-1)
        if start.size != dim:
            raise ValueError(f"start has dimension {start.size}, map has {dim}")


@dataclass
class CriticalSequenceWitness:
    """Recorded iterates certifying near-criticality at a level."""

    points: list
    f_values: list
    weighted_criticalities: list
    level: float
    classification: str
    note: str = ""

    def to_json(self) -> dict:
        return {
            "points": [np.asarray(p, dtype=float).tolist() for p in self.points],
            "f_values": [float(v) for v in self.f_values],
            "weighted_criticalities": [float(v) for v in self.weighted_criticalities],
            "level": float(self.level),
            "classification": self.classification,
            "note": self.note,
        }


ESCAPE_GROWTH = 1.2  # required total norm growth across an escape suffix
ESCAPE_MIN_RECORDS = 3


class _Recorder:
    """Checkpoint bookkeeping for one descent run."""

    def __init__(self, eps: Sequence[float], escape_norm: float, window: float):
        self.eps = list(eps)
        self.k = 0
        self.escape_norm = escape_norm
        self.window = window
        self.points: list = []
        self.f_values: list = []
        self.wcs: list = []
        self.norms: list = []

    def _append(self, x: np.ndarray, fx: float, wc: float) -> None:
        self.points.append(x.copy())
        self.f_values.append(fx)
        self.wcs.append(wc)
        self.norms.append(float(np.linalg.norm(x)))

    def offer(self, x: np.ndarray, fx: float, wc: float) -> bool:
        """Record the iterate if it reaches the next target (or extends the
        envelope after the schedule is exhausted); returns True if recorded."""
        due = False
        if self.k < len(self.eps):
            if wc <= self.eps[self.k]:
                due = True
                while self.k < len(self.eps) and wc <= self.eps[self.k]:
                    self.k += 1
        elif self.wcs and wc <= self.wcs[-1]:
            due = True
        if not due:
            return False
        if self.points and np.array_equal(x, self.points[-1]):
            return False
        self._append(x, fx, wc)
        return True

    def force(self, x: np.ndarray, fx: float, wc: float) -> None:
        """Append the final state without breaking the monotone envelope."""
        if self.points and np.array_equal(x, self.points[-1]):
            return
        if self.points and wc > self.wcs[-1]:
            return
        self._append(x, fx, wc)

    def escape_pattern(self) -> bool:
        """A record suffix marching outward: norms strictly increasing past
        escape_norm, functional flat within the window, total growth >= 20%.

        The growth requirement separates a genuine escape from convergence
        to a solution that merely lies beyond escape_norm (there the record
        norms still increase but stall at the solution norm)."""
        n = len(self.points)
        if n < ESCAPE_MIN_RECORDS:
            return False
        if self.norms[-1] <= self.escape_norm:
            return False
        f_last = self.f_values[-1]
        start = n - 1
        while start - 1 >= 0:
            j = start - 1
            if (
                self.norms[j] <= self.escape_norm
                or self.norms[j] >= self.norms[start]
                or abs(self.f_values[j] - f_last) > self.window
            ):
                break
            start = j
        count = n - start
        return count >= ESCAPE_MIN_RECORDS and self.norms[-1] >= ESCAPE_GROWTH * self.norms[start]

    def exhausted(self) -> bool:
        return self.k >= len(self.eps)


def minimize(F: TargetFunctional, w: Weight, cfg: DescentConfig) -> CriticalSequenceWitness:
    """Drive F downhill from cfg.start and classify the resulting sequence."""
    m = F.map
    cfg.validate(m.dim)
    x = np.asarray(cfg.start, dtype=float).reshape(m.dim).copy()

    def evaluate(pt):
        r = m.f_at(pt) - F.target
        if not np.all(np.isfinite(r)):
            return None
        return r, 0.5 * float(r @ r)

    state = evaluate(x)
    if state is None:
        raise NumericalFailure(f"non-finite value of {m.name} at start {x.tolist()}", x)
    r, fx = state

    def grad_state(pt, rr):
        J = m.jac_at(pt)
        if not np.all(np.isfinite(J)):
            raise NumericalFailure(f"non-finite Jacobian of {m.name} at {pt.tolist()}", pt)
        g = J.T @ rr
        gn = float(np.linalg.norm(g))
        wc = gn * (1.0 + float(w.h(float(np.linalg.norm(pt)))))
        return g, gn, wc

    g, gn, wc = grad_state(x, r)
    rec = _Recorder(list(cfg.criticality_targets), cfg.escape_norm, cfg.f_bound_window)
    t_trial = 1.0
    classification = None
    note = ""

    for _ in range(cfg.max_iters):
        # The escape test runs before the residual exit: along a flat escape
        # valley the residual itself can dip under tolerance (the image
        # boundary passes arbitrarily close to the target), and the marching
        # pattern is the more faithful classification there.
        if rec.offer(x, fx, wc) and rec.escape_pattern():
            classification = CLASS_ESCAPED
            break
        if float(np.linalg.norm(r)) <= cfg.residual_tol:
            classification = CLASS_SOLVED
            break
        if gn == 0.0:
            classification = CLASS_CRITICAL if rec.exhausted() else CLASS_BUDGET
            note = "gradient vanished with residual above tolerance"
            break

        # Backtracking line search; non-finite trial values shrink the step.
        cap = cfg.max_step_factor * (1.0 + float(np.linalg.norm(x)))
        t = min(t_trial, cap / gn)
        accepted = None
        while t * gn > 1e-18 * (1.0 + float(np.linalg.norm(x))):
            x_try = x - t * g
            state = evaluate(x_try)
            if state is not None:
                r_try, f_try = state
                if f_try <= fx - ARMIJO_C * t * gn * gn:
                    accepted = (x_try, r_try, f_try, t)
                    break
            t *= 0.5
        if accepted is None:
            if rec.exhausted():
                classification = CLASS_CRITICAL
                note = "step underflow after criticality schedule exhausted"
            else:
                classification = CLASS_BUDGET
                note = "line search step underflow"
            break

        x_new, r, fx, t_used = accepted
        moved = float(np.linalg.norm(x_new - x))
        x = x_new
        g, gn, wc = grad_state(x, r)
        t_trial = min(t_used * 2.0, 1e300)
        if rec.exhausted() and moved <= 1e-12 * (1.0 + float(np.linalg.norm(x))):
            classification = CLASS_CRITICAL
            note = "progress stalled after criticality schedule exhausted"
            break
    else:
        classification = CLASS_BUDGET
        note = note or "iteration budget exhausted"

    if not rec.points:
        rec.points.append(x.copy())
        rec.f_values.append(fx)
        rec.wcs.append(wc)
    else:
        rec.force(x, fx, wc)
    level = rec.f_values[-1]
    return CriticalSequenceWitness(
        points=rec.points,
        f_values=rec.f_values,
        weighted_criticalities=rec.wcs,
        level=level,
        classification=classification,
        note=note,
    )


@dataclass
class SolveResult:
    solution: Optional[np.ndarray]
    solved_start_index: Optional[int]
    witnesses: list
    singularity_flag: bool

    @property
    def succeeded(self) -> bool:
        return self.solution is not None

    def to_json(self) -> dict:
        return {
            "solution": None if self.solution is None else self.solution.tolist(),
            "solved_start_index": self.solved_start_index,
            "witnesses": [w.to_json() for w in self.witnesses],
            "singularity_flag": self.singularity_flag,
        }


def solve(
    m: MapUnderTest,
    y,
    w: Weight,
    multistart: Sequence,
    residual_tol: float = 1e-10,
    escape_norm: float = 100.0,
    f_bound_window: float = 1e-3,
    max_iters: int = 4000,
    criticality_targets: Optional[Sequence[float]] = None,
) -> SolveResult:
    """Run minimize from each start in order; first solution wins.

    When no start solves, the result aggregates all witnesses.  A
    converged_to_critical_nonsolution witness raises `singularity_flag`: a
    stationary point with nonzero residual means a singular Jacobian
    somewhere, which a local diffeomorphism cannot have.
    """
    if len(multistart) == 0:
        raise ValueError("multistart must be nonempty")
    F = TargetFunctional(m, y)
    targets = criticality_targets or default_criticality_targets()
    witnesses = []
    for i, start in enumerate(multistart):
        cfg = DescentConfig(
            start=np.asarray(start, dtype=float),
            residual_tol=residual_tol,
            criticality_targets=targets,
            max_iters=max_iters,
            escape_norm=escape_norm,
            f_bound_window=f_bound_window,
        )
        wit = minimize(F, w, cfg)
        witnesses.append(wit)
        if wit.classification == CLASS_SOLVED:
            return SolveResult(
                solution=np.asarray(wit.points[-1], dtype=float),
                solved_start_index=i,
                witnesses=witnesses,
                singularity_flag=False,
            )
    flag = any(w_.classification == CLASS_CRITICAL for w_ in witnesses)
    return SolveResult(None, None, witnesses, flag)
