"""Fixed-point (Z-bus style) load flow for unbalanced three-phase feeders.

The map evaluated here is

    f(v, s) = X ( conj(s_wye) / conj(v) + H^T ( conj(s_delta) / (H conj(v)) ) )

with all divisions elementwise, and the load-flow solution is the fixed
point of v = w + f(v, s), found by Picard iteration v_{k+1} = w + f(v_k, s).

Injections follow the source convention: generation is positive, loads are
negative. The same iteration drives both the ground-truth simulator and the
surrogate's forward pass, so the two reproduce each other bit-for-bit when
given identical operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVoltage, ValidationError
from .network import DerivedOperator

#: Smallest load-current denominator magnitude treated as usable.
DENOM_FLOOR = 1e-12

DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_ITERATIONS = 50


@dataclass(frozen=True)
class Injection:
    """Per-bus complex power sources for one load-flow scenario.

    s_wye holds grounded-wye powers per bus phase (a, b, c); s_delta holds
    phase-to-phase powers per bus pair (ab, bc, ca). Both are 3N vectors.
    """

    s_wye: np.ndarray
    s_delta: np.ndarray

    def __post_init__(self):
        for field in ("s_wye", "s_delta"):
            vec = getattr(self, field)
            if vec.ndim != 1 or vec.size % 3 != 0:
                raise ValidationError(f"{field} must be a 1-D vector of length 3N")
            if not np.all(np.isfinite(vec)):
                raise ValidationError(f"{field} contains non-finite entries")
        if self.s_wye.shape != self.s_delta.shape:
            raise ValidationError("s_wye and s_delta must have equal length")

    @classmethod
    def zero(cls, n_buses: int) -> "Injection":
        z = np.zeros(3 * n_buses, dtype=np.complex128)
        return cls(s_wye=z, s_delta=z.copy())


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a fixed-point solve."""

    v: np.ndarray
    iterations: int
    residual: float
    converged: bool


def phase_pair_apply(vec: np.ndarray) -> np.ndarray:
    """Apply the block-diagonal phase-pair matrix H without forming it."""
    m = vec.reshape(-1, 3)
    return (m - np.roll(m, -1, axis=1)).reshape(-1)


def phase_pair_apply_t(vec: np.ndarray) -> np.ndarray:
    """Apply H^T without forming it."""
    m = vec.reshape(-1, 3)
    return (m - np.roll(m, 1, axis=1)).reshape(-1)


def load_current(v: np.ndarray, s: Injection) -> np.ndarray:
    """Equivalent injected current conj(s_wye)/conj(v) + H^T conj(s_delta)/(H conj(v)).

    The phase-pair denominators are only formed (and only checked) when any
    delta power is present; a zero delta source contributes nothing even at
    voltages whose phase-pair differences vanish.
    """
    vbar = np.conj(v)
    if np.min(np.abs(vbar)) < DENOM_FLOOR:
        raise DegenerateVoltage("a phase voltage magnitude fell below 1e-12")
    cur = np.conj(s.s_wye) / vbar
    if np.any(s.s_delta):
        hv = phase_pair_apply(vbar)
        if np.min(np.abs(hv)) < DENOM_FLOOR:
            raise DegenerateVoltage("a phase-pair voltage magnitude fell below 1e-12")
        cur = cur + phase_pair_apply_t(np.conj(s.s_delta) / hv)
    return cur


def fixed_point_map(op: DerivedOperator, v: np.ndarray, s: Injection) -> np.ndarray:
    """Evaluate f(v, s) for the given operators."""
    return op.x @ load_current(v, s)


def fixed_point_residual(op: DerivedOperator, v: np.ndarray, s: Injection) -> float:
    """Max-abs violation of the fixed-point condition v = w + f(v, s)."""
    return float(np.max(np.abs(v - op.w - fixed_point_map(op, v, s))))


def run_iteration(
    x: np.ndarray,
    w: np.ndarray,
    s: Injection,
    v_init: np.ndarray,
    tolerance: float,
    max_iterations: int,
    record: bool = False,
):
    """Shared Picard iteration behind the simulator and the surrogate.

    Stops once the iterate change drops below `tolerance` and has stopped
    strictly improving; with a clean contraction that means iterating a few
    steps past the tolerance until the iterate is stationary in floating
    point, which makes stored solutions exact numerical fixed points.
    A tolerance of 0.0 never triggers the stop and runs exactly
    `max_iterations` steps (fixed unroll).

    Returns (iterates, iterations, residual, converged) where `iterates` is
    the full list when `record` else just the final vector.
    """
    if tolerance < 0:
        raise ValidationError("tolerance must be >= 0")
    if max_iterations < 1:
        raise ValidationError("max_iterations must be >= 1")
    v = v_init
    iterates = [v_init] if record else None
    change = np.inf
    prev_change = np.inf
    k = 0
    for k in range(1, max_iterations + 1):
        v_new = w + x @ load_current(v, s)
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if record:
            iterates.append(v_new)
        if change < tolerance and (change == 0.0 or change >= prev_change):
            break
        prev_change = change
    converged = change < tolerance
    return (iterates if record else v), k, change, converged


def solve_fixed_point(
    op: DerivedOperator,
    s: Injection,
    v_init: np.ndarray | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> SolveReport:
    """Solve v = w + f(v, s) by Picard iteration from v_init (default: w).

    Non-convergence within the iteration budget is reported, not raised;
    DegenerateVoltage propagates when a denominator collapses.
    """
    if v_init is None:
        v_init = op.w
    v, iterations, residual, converged = run_iteration(
        op.x, op.w, s, v_init, tolerance, max_iterations
    )
    return SolveReport(v=v, iterations=iterations, residual=residual, converged=converged)
