"""Per-sample SGD training of the surrogate with a step learning-rate decay.

One training step runs forward prediction, reverse-accumulates the
Wirtinger gradient, descends x_hat, and then overwrites the no-load
voltage with the value that makes the fixed-point relation hold exactly
for the current sample:

    x_hat <- x_hat - eta * dL/d(conj x_hat)
    w_hat <- v_measured - f_{x_hat}(v_predicted, s)

The w_hat rule uses the just-updated x_hat and the prediction from the
pre-update forward pass; batch size is one and sample order reshuffles
every epoch from the run's seeded generator.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset
from .errors import Diverged, ValidationError
from .gradient import backward, rmse
from .loadflow import load_current
from .network import BALANCED_SLACK, DerivedOperator
from .surrogate import DEFAULT_INIT_VALUE, SurrogateParams, init_params, predict

DIVERGENCE_LOSS_BOUND = 1e6


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; the defaults are the reference recipe (eta 0.5
    decaying by 0.1 every 2000 epochs, 7000 epochs, x_hat init 0.1+0.1j)."""

    epochs: int = 7000
    lr_initial: float = 0.5
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 2000
    fp_tolerance: float = 1e-9
    fp_max_iterations: int = 50
    init_x_value: complex = DEFAULT_INIT_VALUE
    shuffle_each_epoch: bool = True
    seed: int = 0
    #: Alternative no-load update evaluating the map at the measured
    #: voltage instead of the prediction. Off by default.
    w_update_at_measured: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.lr_initial <= 0:
            raise ValidationError("lr_initial must be positive")
        if not (0.0 < self.lr_decay_factor <= 1.0):
            raise ValidationError("lr_decay_factor must lie in (0, 1]")
        if self.lr_decay_every < 1:
            raise ValidationError("lr_decay_every must be >= 1")
        if self.fp_tolerance < 0:
            raise ValidationError("fp_tolerance must be >= 0")
        if self.fp_max_iterations < 1:
            raise ValidationError("fp_max_iterations must be >= 1")


@dataclass(frozen=True)
class TrainLog:
    """One record per completed epoch; w_error is NaN without ground truth."""

    mean_loss: np.ndarray
    w_error: np.ndarray
    lr: np.ndarray
    nonconverged: np.ndarray
    seconds: np.ndarray

    @property
    def n_epochs(self) -> int:
        return self.mean_loss.size

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,mean_loss,w_error,lr,nonconverged_count,seconds\n")
            for e in range(self.n_epochs):
                fh.write(
                    f"{e},{self.mean_loss[e]!r},{self.w_error[e]!r},"
                    f"{self.lr[e]!r},{int(self.nonconverged[e])},{self.seconds[e]!r}\n"
                )


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """Step-decayed learning rate: lr_initial * factor**(epoch // every)."""
    if not (0 <= epoch < config.epochs):
        raise ValidationError(f"epoch {epoch} outside [0, {config.epochs})")
    return config.lr_initial * config.lr_decay_factor ** (epoch // config.lr_decay_every)


def evaluate_no_load_error(params: SurrogateParams, truth: DerivedOperator) -> float:
    """Euclidean norm of w_hat minus the true no-load voltage."""
    if params.w_hat.shape != truth.w.shape:
        raise ValidationError("parameter and ground-truth sizes differ")
    return float(np.linalg.norm(params.w_hat - truth.w))


def train(
    dataset: Dataset,
    config: TrainConfig = TrainConfig(),
    ground_truth: DerivedOperator | None = None,
    slack_voltage: np.ndarray | None = None,
) -> tuple[SurrogateParams, TrainLog]:
    """Run the SGD loop over the dataset and return final params plus log.

    w_hat starts from the slack voltage replicated at every bus (the
    balanced nominal reference unless slack_voltage is given); x_hat from
    config.init_x_value. Non-converged forward passes still contribute
    updates and are counted per epoch. Raises Diverged when an epoch-mean
    loss is non-finite or exceeds 1e6.
    """
    n = dataset.n_samples
    if n == 0:
        raise ValidationError("dataset must be non-empty")
    n3 = dataset.voltages.shape[1]
    for inj in dataset.injections:
        if inj.s_wye.size != n3:
            raise ValidationError("dataset samples are dimensionally inconsistent")
    slack = BALANCED_SLACK if slack_voltage is None else np.asarray(slack_voltage)

    params = init_params(slack, n3 // 3, config.init_x_value)
    rng = np.random.default_rng(config.seed & 0xFFFFFFFFFFFFFFFF)

    mean_loss = np.empty(config.epochs)
    w_error = np.full(config.epochs, np.nan)
    lr_track = np.empty(config.epochs)
    nonconverged = np.zeros(config.epochs, dtype=np.int64)
    seconds = np.empty(config.epochs)

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        eta = lr_at_epoch(config, epoch)
        order = rng.permutation(n) if config.shuffle_each_epoch else np.arange(n)
        loss_sum = 0.0
        nonconv = 0
        for j in order:
            inj, v_measured = dataset.sample(int(j))
            tape = predict(params, inj, config.fp_tolerance, config.fp_max_iterations)
            if not tape.converged:
                nonconv += 1
            loss_sum += rmse(v_measured, tape.prediction)
            grad = backward(tape, v_measured)
            x_new = params.x_hat - eta * grad.d_x_conj
            v_arg = v_measured if config.w_update_at_measured else tape.prediction
            w_new = v_measured - x_new @ load_current(v_arg, inj)
            if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(w_new))):
                raise Diverged(f"parameters became non-finite in epoch {epoch}")
            params = SurrogateParams(x_hat=x_new, w_hat=w_new)
        epoch_loss = loss_sum / n
        if not np.isfinite(epoch_loss) or epoch_loss > DIVERGENCE_LOSS_BOUND:
            raise Diverged(f"mean loss {epoch_loss:.3e} in epoch {epoch}")
        mean_loss[epoch] = epoch_loss
        lr_track[epoch] = eta
        nonconverged[epoch] = nonconv
        if ground_truth is not None:
            w_error[epoch] = evaluate_no_load_error(params, ground_truth)
        seconds[epoch] = time.perf_counter() - t0

    log = TrainLog(
        mean_loss=mean_loss, w_error=w_error, lr=lr_track,
        nonconverged=nonconverged, seconds=seconds,
    )
    return params, log
