"""Learnable fixed-point surrogate: parameters, forward pass, checkpoints.

The surrogate replaces the physical operators (x, w) with learned values
(x_hat, w_hat) and predicts voltages by running the same Picard iteration,
recording every iterate so the training gradient can be propagated back
through the exact sequence of steps that produced the prediction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .encoding import decode_complex, encode_complex
from .errors import ParseError, ValidationError
from .loadflow import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, Injection, run_iteration

DEFAULT_INIT_VALUE = 0.1 + 0.1j


@dataclass(frozen=True)
class SurrogateParams:
    """Learned operator x_hat (3N x 3N, unconstrained) and no-load voltage w_hat."""

    x_hat: np.ndarray
    w_hat: np.ndarray

    def __post_init__(self):
        n3 = self.w_hat.size
        if self.w_hat.ndim != 1 or n3 % 3 != 0:
            raise ValidationError("w_hat must be a 1-D vector of length 3N")
        if self.x_hat.shape != (n3, n3):
            raise ValidationError(f"x_hat has shape {self.x_hat.shape}, expected {(n3, n3)}")
        if not (np.all(np.isfinite(self.x_hat)) and np.all(np.isfinite(self.w_hat))):
            raise ValidationError("surrogate parameters contain non-finite entries")

    @property
    def n_buses(self) -> int:
        return self.w_hat.size // 3


@dataclass(frozen=True)
class ForwardTape:
    """Recorded forward pass: every iterate of the prediction iteration.

    iterates[0] is w_hat and iterates[-1] the prediction; each consecutive
    pair satisfies the surrogate map with the snapshotted parameters.
    """

    iterates: list
    injection: Injection
    params: SurrogateParams
    converged: bool

    @property
    def prediction(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def steps(self) -> int:
        return len(self.iterates) - 1


def init_params(
    feeder_slack: np.ndarray, n_buses: int, init_value: complex = DEFAULT_INIT_VALUE
) -> SurrogateParams:
    """Starting point for training: w_hat replicates the slack voltage at
    every bus and every entry of x_hat equals init_value."""
    if n_buses < 1:
        raise ValidationError("n_buses must be >= 1")
    slack = np.asarray(feeder_slack, dtype=np.complex128)
    if slack.shape != (3,):
        raise ValidationError("feeder_slack must be a 3-vector")
    n3 = 3 * n_buses
    return SurrogateParams(
        x_hat=np.full((n3, n3), init_value, dtype=np.complex128),
        w_hat=np.tile(slack, n_buses),
    )


def predict(
    params: SurrogateParams,
    s: Injection,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> ForwardTape:
    """Iterate the surrogate map from w_hat and record the full trajectory.

    Stopping matches the simulator; tolerance 0.0 produces a fixed unroll
    of exactly max_iterations steps. A non-converged tape still carries its
    final iterate as the prediction.
    """
    iterates, _, _, converged = run_iteration(
        params.x_hat, params.w_hat, s, params.w_hat, tolerance, max_iterations, record=True
    )
    return ForwardTape(iterates=iterates, injection=s, params=params, converged=converged)


def save_params(params: SurrogateParams, path) -> None:
    """Write a parameter checkpoint as JSON."""
    payload = {
        "n_buses": params.n_buses,
        "w_hat": encode_complex(params.w_hat),
        "x_hat": encode_complex(params.x_hat),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_params(path) -> SurrogateParams:
    """Read a parameter checkpoint written by save_params."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or "n_buses" not in payload:
        raise ParseError(f"{path}: missing key 'n_buses'")
    n3 = 3 * int(payload["n_buses"])
    w_hat = decode_complex(payload.get("w_hat"), shape=(n3,), field="w_hat")
    x_hat = decode_complex(payload.get("x_hat"), shape=(n3, n3), field="x_hat")
    return SurrogateParams(x_hat=x_hat, w_hat=w_hat)
