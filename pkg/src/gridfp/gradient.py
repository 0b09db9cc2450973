"""RMSE loss and its complex (Wirtinger) gradient for the surrogate.

The loss L = sqrt(mean |v - v_hat|^2) is real-valued in complex variables,
so its steepest-descent direction with respect to x_hat is the conjugate
cogradient dL/d(conj(x_hat)). The map is non-holomorphic -- voltages enter
through their conjugates -- so reverse accumulation carries the CR-calculus
adjoint pair (dL/dv, dL/d(conj v)) through every recorded iterate of the
forward tape rather than a single holomorphic adjoint.

For one recorded step v_next = w_hat + x_hat @ u(v), with

    u(v) = conj(s_wye)/conj(v) + H^T ( conj(s_delta) / (H conj(v)) ),

the chain rule gives, writing lam = dL/d(conj v_next):

    dL/d(conj x_hat)  +=  outer(lam, conj(u(v)))
    dL/d(conj v)       =  J(v) @ (x_hat^T @ conj(lam))

where J(v) y = -[ (conj(s_wye)/conj(v)^2) * y
                  + H^T ( (conj(s_delta)/(H conj(v))^2) * (H y) ) ]
is the (symmetric) Jacobian of u with respect to conj(v).

For real L the real-coordinate derivatives follow as
dL/dRe = 2 Re(dL/dconj), dL/dIm = 2 Im(dL/dconj), which is what the
finite-difference oracle checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVoltage, ValidationError
from .loadflow import DENOM_FLOOR, Injection, load_current, phase_pair_apply, phase_pair_apply_t
from .surrogate import ForwardTape, SurrogateParams

#: Pre-sqrt mean squares below this floor get a zero (sub)gradient, which
#: keeps the sqrt differentiable choice well-defined at an exact minimum.
ZERO_LOSS_FLOOR = 1e-30


@dataclass(frozen=True)
class LossValue:
    """Per-unit RMSE over all 3N complex entries."""

    value: float
    n_buses: int


@dataclass(frozen=True)
class WirtingerGradient:
    """dL/d(conj x_hat), same shape as x_hat."""

    d_x_conj: np.ndarray


def rmse(v_true: np.ndarray, v_pred: np.ndarray) -> float:
    """sqrt of the mean squared complex deviation over all entries."""
    if v_true.shape != v_pred.shape:
        raise ValidationError("voltage vectors must have equal length")
    return float(np.sqrt(np.mean(np.abs(v_true - v_pred) ** 2)))


def loss(v_true: np.ndarray, v_pred: np.ndarray) -> LossValue:
    return LossValue(value=rmse(v_true, v_pred), n_buses=v_true.size // 3)


def _propagate(iterates: list, s: Injection, x_hat: np.ndarray, lam_bar: np.ndarray) -> np.ndarray:
    """Reverse-accumulate dL/d(conj x_hat) from the final-iterate adjoint.

    `lam_bar` is dL/d(conj v) at the last iterate; w_hat is treated as a
    constant, so propagation ends at the first iterate without producing a
    w adjoint. Linear in the seed adjoint.
    """
    has_delta = bool(np.any(s.s_delta))
    d_x_conj = np.zeros_like(x_hat)
    for k in range(len(iterates) - 2, -1, -1):
        vk = iterates[k]
        if np.min(np.abs(vk)) < DENOM_FLOOR:
            raise DegenerateVoltage("tape corrupt: a recorded phase voltage is near zero")
        u_conj = s.s_wye / vk
        hv = None
        if has_delta:
            hv = phase_pair_apply(vk)
            if np.min(np.abs(hv)) < DENOM_FLOOR:
                raise DegenerateVoltage("tape corrupt: a recorded phase-pair voltage is near zero")
            u_conj = u_conj + phase_pair_apply_t(s.s_delta / hv)
        d_x_conj += np.outer(lam_bar, u_conj)
        if k > 0:
            y = x_hat.T @ np.conj(lam_bar)
            term = (np.conj(s.s_wye) / np.conj(vk) ** 2) * y
            if has_delta:
                term = term + phase_pair_apply_t(
                    (np.conj(s.s_delta) / np.conj(hv) ** 2) * phase_pair_apply(y)
                )
            lam_bar = -term
    return d_x_conj


def backward(tape: ForwardTape, v_true: np.ndarray) -> WirtingerGradient:
    """Gradient dL/d(conj x_hat) of the RMSE between v_true and the tape's
    final iterate, propagated through every recorded step.

    Returns an exact zero matrix when the residual's mean square is below
    ZERO_LOSS_FLOOR (subgradient choice at the sqrt's root).
    """
    if len(tape.iterates) < 2:
        raise ValidationError("tape must contain at least two iterates")
    if v_true.shape != tape.prediction.shape:
        raise ValidationError("v_true length does not match the tape")
    residual = tape.prediction - v_true
    mean_sq = float(np.mean(np.abs(residual) ** 2))
    if mean_sq < ZERO_LOSS_FLOOR:
        return WirtingerGradient(d_x_conj=np.zeros_like(tape.params.x_hat))
    n3 = residual.size
    seed = residual / (2.0 * n3 * np.sqrt(mean_sq))
    return WirtingerGradient(
        d_x_conj=_propagate(tape.iterates, tape.injection, tape.params.x_hat, seed)
    )


def _unrolled_rmse(
    x_hat: np.ndarray, w_hat: np.ndarray, s: Injection, v_true: np.ndarray, unroll: int
) -> float:
    """Loss after exactly `unroll` map applications from w_hat (no early stop)."""
    v = w_hat
    for _ in range(unroll):
        v = w_hat + x_hat @ load_current(v, s)
    return rmse(v_true, v)


def finite_diff_gradient(
    params: SurrogateParams,
    s: Injection,
    v_true: np.ndarray,
    unroll: int,
    step: float = 1e-6,
) -> WirtingerGradient:
    """Central-difference oracle for dL/d(conj x_hat) at a fixed unroll depth.

    Perturbs the real and imaginary parts of every x_hat entry separately
    and recombines as 0.5 * (dL/dRe + j dL/dIm). The unroll depth is pinned
    on every evaluation so the differentiated function is smooth.
    """
    if unroll < 1:
        raise ValidationError("unroll must be >= 1")
    if step <= 0:
        raise ValidationError("step must be positive")
    n3 = params.w_hat.size
    d = np.zeros((n3, n3), dtype=np.complex128)

    def loss_at(p: int, q: int, delta: complex) -> float:
        x = params.x_hat.copy()
        x[p, q] += delta
        return _unrolled_rmse(x, params.w_hat, s, v_true, unroll)

    for p in range(n3):
        for q in range(n3):
            d_re = (loss_at(p, q, step) - loss_at(p, q, -step)) / (2.0 * step)
            d_im = (loss_at(p, q, 1j * step) - loss_at(p, q, -1j * step)) / (2.0 * step)
            d[p, q] = 0.5 * (d_re + 1j * d_im)
    return WirtingerGradient(d_x_conj=d)
