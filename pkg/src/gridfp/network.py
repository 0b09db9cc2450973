"""Three-phase network model: admittance partitioning and synthetic feeders.

A feeder with one slack bus and N PQ buses is described by the PQ-side
blocks of its bus admittance matrix (y_ll, y_l0) and the slack voltage.
From those the package derives the operators used by the fixed-point
load-flow map: the impedance-like operator x = y_ll^-1, the no-load
voltage w = -y_ll^-1 y_l0 v_slack, and the per-bus phase-to-phase
transformation matrix h.

Phase ordering is (a, b, c) within each bus block; PQ bus i occupies rows
3*(i-1) .. 3*i - 1 of every 3N-sized quantity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .encoding import decode_complex, encode_complex
from .errors import GenerationFailed, ParseError, SingularMatrix, ValidationError

#: Balanced positive-sequence slack voltage (phases a, b, c), per-unit.
BALANCED_SLACK = np.array(
    [1.0, np.exp(-2j * np.pi / 3), np.exp(2j * np.pi / 3)], dtype=np.complex128
)

#: Per-phase wye injection used to validate that a generated feeder's
#: fixed-point iteration contracts (a load, hence negative).
NOMINAL_VALIDATION_LOAD = -(0.01 + 0.005j)

_H_BLOCK = np.array([[1, -1, 0], [0, 1, -1], [-1, 0, 1]], dtype=np.complex128)

_COND_LIMIT = 1e12
_MAX_GENERATION_RETRIES = 10


def build_h(n_buses: int) -> np.ndarray:
    """Block-diagonal phase-to-phase transformation matrix of size 3N x 3N.

    Each bus contributes one block [1 -1 0; 0 1 -1; -1 0 1] mapping
    phase-to-ground quantities to (ab, bc, ca) phase-pair differences.
    """
    if n_buses < 1:
        raise ValidationError("n_buses must be >= 1")
    h = np.zeros((3 * n_buses, 3 * n_buses), dtype=np.complex128)
    for i in range(n_buses):
        h[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = _H_BLOCK
    return h


@dataclass(frozen=True)
class FeederModel:
    """PQ-side admittance blocks and slack voltage of a radial feeder.

    All quantities are per-unit. y_ll is the 3N x 3N PQ-to-PQ block,
    y_l0 the 3N x 3 PQ-to-slack block, v_slack the fixed slack voltage.
    """

    n_buses: int
    y_ll: np.ndarray
    y_l0: np.ndarray
    v_slack: np.ndarray
    name: str = "feeder"

    def __post_init__(self):
        n3 = 3 * self.n_buses
        if self.n_buses < 1:
            raise ValidationError("n_buses must be >= 1")
        if self.y_ll.shape != (n3, n3):
            raise ValidationError(f"y_ll has shape {self.y_ll.shape}, expected {(n3, n3)}")
        if self.y_l0.shape != (n3, 3):
            raise ValidationError(f"y_l0 has shape {self.y_l0.shape}, expected {(n3, 3)}")
        if self.v_slack.shape != (3,):
            raise ValidationError(f"v_slack has shape {self.v_slack.shape}, expected (3,)")
        for field in ("y_ll", "y_l0", "v_slack"):
            if not np.all(np.isfinite(getattr(self, field))):
                raise ValidationError(f"{field} contains non-finite entries")
        mags = np.abs(self.v_slack)
        if np.any(mags < 0.9) or np.any(mags > 1.1):
            raise ValidationError("v_slack magnitudes must lie in [0.9, 1.1] p.u.")
        if np.linalg.cond(self.y_ll) > _COND_LIMIT:
            raise ValidationError("y_ll is singular or near-singular")


@dataclass(frozen=True)
class DerivedOperator:
    """Operators of the fixed-point map derived from a FeederModel.

    x is the inverse of y_ll, w the no-load voltage, h the block-diagonal
    phase-pair transformation. x and w fully determine the simulator.
    """

    x: np.ndarray
    w: np.ndarray
    h: np.ndarray

    @property
    def n_buses(self) -> int:
        return self.w.size // 3


def derive_operators(feeder: FeederModel) -> DerivedOperator:
    """Invert y_ll and form (x, w, h) for the fixed-point iteration.

    Raises SingularMatrix when the inversion fails or is too inaccurate
    to trust (max-abs deviation of x @ y_ll from identity above 1e-10).
    """
    try:
        x = np.linalg.inv(feeder.y_ll)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"y_ll of '{feeder.name}' is not invertible: {exc}") from None
    n3 = 3 * feeder.n_buses
    residual = np.max(np.abs(x @ feeder.y_ll - np.eye(n3)))
    if residual > 1e-10:
        raise SingularMatrix(
            f"y_ll of '{feeder.name}' is too ill-conditioned (inverse residual {residual:.2e})"
        )
    w = -(x @ (feeder.y_l0 @ feeder.v_slack))
    return DerivedOperator(x=x, w=w, h=build_h(feeder.n_buses))


# ---------------------------------------------------------------------------
# Synthetic feeders
# ---------------------------------------------------------------------------


def _random_line_block(rng: np.random.Generator) -> np.ndarray:
    """Random symmetric 3x3 series admittance for one line segment.

    Self terms are inductive-resistive with magnitude in [5, 50] p.u.;
    mutual couplings are 10-30% of the smaller adjacent self magnitude
    with a negative real part.
    """
    self_mag = rng.uniform(5.0, 50.0, size=3)
    self_ang = rng.uniform(math.radians(-70.0), math.radians(-30.0), size=3)
    block = np.zeros((3, 3), dtype=np.complex128)
    block[np.diag_indices(3)] = self_mag * np.exp(1j * self_ang)
    for p, q in ((0, 1), (1, 2), (0, 2)):
        mag = rng.uniform(0.10, 0.30) * min(self_mag[p], self_mag[q])
        ang = rng.uniform(math.radians(135.0), math.radians(225.0))
        block[p, q] = block[q, p] = mag * np.exp(1j * ang)
    return block


def _random_tree(n_buses: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random recursive tree over buses 0..N, rooted at the slack."""
    return [(int(rng.integers(0, i)), i) for i in range(1, n_buses + 1)]


def _row_entry_dominance(y_ll: np.ndarray) -> bool:
    """Every row's diagonal magnitude must match or exceed each off-diagonal.

    Assembled admittance rows cannot be strictly dominant in the row-sum
    sense (a leaf bus couples to its neighbor with the full self term), so
    the generation oracle checks per-entry dominance with weak inequality.
    """
    diag = np.abs(np.diag(y_ll))
    off = np.abs(y_ll - np.diag(np.diag(y_ll)))
    return bool(np.all(diag * (1.0 + 1e-12) >= off.max(axis=1)))


def _assemble(n_buses: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Stamp random line blocks over a random tree; return (y_ll, y_l0)."""
    size = 3 * (n_buses + 1)
    y = np.zeros((size, size), dtype=np.complex128)
    for i, j in _random_tree(n_buses, rng):
        block = _random_line_block(rng)
        si, sj = slice(3 * i, 3 * i + 3), slice(3 * j, 3 * j + 3)
        y[si, si] += block
        y[sj, sj] += block
        y[si, sj] -= block
        y[sj, si] -= block
    return y[3:, 3:], y[3:, :3]


def generate_synthetic_feeder(n_buses: int, seed: int, name: str | None = None) -> FeederModel:
    """Random radial three-phase feeder with known ground truth.

    Deterministic in (n_buses, seed). Generation validates that the
    assembled y_ll has per-entry row dominance, is well-conditioned, and
    that the fixed-point iteration contracts at nominal loading; on
    failure the internal seed is perturbed, up to 10 attempts.
    """
    from .loadflow import Injection, solve_fixed_point  # cycle-free at runtime

    if n_buses < 1:
        raise ValidationError("n_buses must be >= 1")
    base = seed & 0xFFFFFFFFFFFFFFFF
    label = name if name is not None else f"synthetic-{n_buses}bus-seed{seed}"
    for attempt in range(_MAX_GENERATION_RETRIES):
        rng = np.random.default_rng(np.random.SeedSequence((base, attempt)))
        y_ll, y_l0 = _assemble(n_buses, rng)
        if not _row_entry_dominance(y_ll):
            continue
        if np.linalg.cond(y_ll) > _COND_LIMIT:
            continue
        feeder = FeederModel(
            n_buses=n_buses, y_ll=y_ll, y_l0=y_l0, v_slack=BALANCED_SLACK.copy(), name=label
        )
        try:
            op = derive_operators(feeder)
        except SingularMatrix:
            continue
        nominal = Injection(
            s_wye=np.full(3 * n_buses, NOMINAL_VALIDATION_LOAD, dtype=np.complex128),
            s_delta=np.zeros(3 * n_buses, dtype=np.complex128),
        )
        report = solve_fixed_point(op, nominal)
        if report.converged:
            return feeder
    raise GenerationFailed(
        f"no valid feeder for n_buses={n_buses}, seed={seed} "
        f"after {_MAX_GENERATION_RETRIES} attempts"
    )


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------


def save_feeder(feeder: FeederModel, path) -> None:
    """Write a feeder to the JSON format (complex entries as [re, im])."""
    payload = {
        "name": feeder.name,
        "n_buses": feeder.n_buses,
        "v_slack": encode_complex(feeder.v_slack),
        "y_ll": encode_complex(feeder.y_ll),
        "y_l0": encode_complex(feeder.y_l0),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_feeder(path) -> FeederModel:
    """Parse and validate a feeder JSON file.

    Keys y_0l and y_00 are accepted and ignored (the fixed-point map never
    uses them); ParseError covers structural problems, ValidationError
    covers dimension or invariant violations.
    """
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    for key in ("name", "n_buses", "v_slack", "y_ll", "y_l0"):
        if key not in payload:
            raise ParseError(f"{path}: missing key '{key}'")
    try:
        n_buses = int(payload["n_buses"])
    except (TypeError, ValueError):
        raise ParseError(f"{path}: n_buses must be an integer") from None
    v_slack = decode_complex(payload["v_slack"], field="v_slack")
    y_ll = decode_complex(payload["y_ll"], field="y_ll")
    y_l0 = decode_complex(payload["y_l0"], field="y_l0")
    return FeederModel(
        n_buses=n_buses, y_ll=y_ll, y_l0=y_l0, v_slack=v_slack, name=str(payload["name"])
    )
