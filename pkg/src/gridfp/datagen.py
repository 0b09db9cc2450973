"""Load-flow dataset generation: randomized scenarios solved to tolerance.

Each sample draws uniformly randomized wye/delta loads (negative
injections) plus optional PV real-power generation, solves the ground-truth
load flow, and stores the (injection, voltage) pair. Randomness is
pre-split per sample index with SeedSequence.spawn, so train and test draw
from disjoint stream segments and generation is order-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .encoding import decode_complex, encode_complex
from .errors import GenerationFailed, ParseError, ValidationError
from .loadflow import DEFAULT_MAX_ITERATIONS, Injection, solve_fixed_point
from .network import FeederModel, derive_operators

#: Stored voltages are rejected outside this per-unit magnitude band.
VOLTAGE_BAND = (0.5, 1.5)

_SOLVE_TOLERANCE = 1e-9
_MAX_DRAWS_PER_SAMPLE = 25


@dataclass(frozen=True)
class ScenarioConfig:
    """Randomized loading scenario for dataset generation.

    Loads are per bus-phase: a uniform multiplier from load_range scales
    nominal_load, entering as a negative injection split between the wye
    and delta terms by delta_fraction. PV units add uniform real power from
    pv_range to the wye term at their (bus, phase) locations (buses are
    1-indexed, phases 0..2 for a..c).
    """

    n_train: int
    n_test: int
    load_range: tuple = (0.5, 1.5)
    pv_buses: tuple = ()
    pv_range: tuple = (0.0, 0.05)
    nominal_load: complex = 0.01 + 0.005j
    delta_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 1:
            raise ValidationError("n_train and n_test must be >= 1")
        if not (self.load_range[0] <= self.load_range[1]):
            raise ValidationError("load_range must be ordered")
        if self.load_range[0] < 0:
            raise ValidationError("load_range multipliers must be >= 0")
        if not (0.0 <= self.pv_range[0] <= self.pv_range[1]):
            raise ValidationError("pv_range must be ordered and nonnegative")
        if not (0.0 <= self.delta_fraction <= 1.0):
            raise ValidationError("delta_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class Dataset:
    """Ordered (injection, voltage) samples from one feeder and scenario."""

    feeder_name: str
    split: str
    config: ScenarioConfig
    injections: list
    voltages: np.ndarray

    @property
    def n_samples(self) -> int:
        return len(self.injections)

    @property
    def n_buses(self) -> int:
        return self.voltages.shape[1] // 3

    def sample(self, j: int) -> tuple[Injection, np.ndarray]:
        return self.injections[j], self.voltages[j]


def sample_injection(
    config: ScenarioConfig, n_buses: int, rng: np.random.Generator
) -> Injection:
    """Draw one randomized injection for the given scenario."""
    n3 = 3 * n_buses
    mult = rng.uniform(config.load_range[0], config.load_range[1], size=n3)
    load = -(mult * config.nominal_load)
    s_wye = (1.0 - config.delta_fraction) * load
    s_delta = config.delta_fraction * load
    for bus, phase in config.pv_buses:
        if not (1 <= bus <= n_buses) or not (0 <= phase <= 2):
            raise ValidationError(f"PV location (bus={bus}, phase={phase}) out of bounds")
        s_wye[3 * (bus - 1) + phase] += rng.uniform(config.pv_range[0], config.pv_range[1])
    return Injection(s_wye=s_wye, s_delta=s_delta)


def _solve_samples(op, config: ScenarioConfig, n_buses: int, streams) -> tuple[list, np.ndarray]:
    injections, voltages = [], []
    rejections = 0
    for stream in streams:
        rng = np.random.default_rng(stream)
        for _ in range(_MAX_DRAWS_PER_SAMPLE):
            inj = sample_injection(config, n_buses, rng)
            report = solve_fixed_point(op, inj, tolerance=_SOLVE_TOLERANCE,
                                       max_iterations=DEFAULT_MAX_ITERATIONS)
            mags = np.abs(report.v)
            if report.converged and mags.min() >= VOLTAGE_BAND[0] and mags.max() <= VOLTAGE_BAND[1]:
                injections.append(inj)
                voltages.append(report.v)
                break
            rejections += 1
        else:
            raise GenerationFailed("a sample slot exhausted its redraw budget")
        draws = rejections + len(injections)
        if draws >= 20 and rejections > 0.5 * draws:
            raise GenerationFailed(
                f"rejection rate above 50% ({rejections} rejections, "
                f"{len(injections)} accepted): scenario does not match the feeder"
            )
    return injections, np.array(voltages)


def generate_dataset(feeder: FeederModel, config: ScenarioConfig) -> tuple[Dataset, Dataset]:
    """Generate (train, test) datasets by solving the ground-truth load flow.

    Non-converged or out-of-band draws are rejected and redrawn from the
    same per-sample stream; GenerationFailed signals a rejection rate above
    50% or an exhausted sample slot.
    """
    op = derive_operators(feeder)
    total = config.n_train + config.n_test
    streams = np.random.SeedSequence(config.seed & 0xFFFFFFFFFFFFFFFF).spawn(total)
    injections, voltages = _solve_samples(op, config, feeder.n_buses, streams)
    train = Dataset(
        feeder_name=feeder.name, split="train", config=config,
        injections=injections[: config.n_train], voltages=voltages[: config.n_train],
    )
    test = Dataset(
        feeder_name=feeder.name, split="test", config=config,
        injections=injections[config.n_train :], voltages=voltages[config.n_train :],
    )
    return train, test


# ---------------------------------------------------------------------------
# JSON-lines file format
# ---------------------------------------------------------------------------


def _config_to_json(config: ScenarioConfig) -> dict:
    raw = asdict(config)
    raw["nominal_load"] = [config.nominal_load.real, config.nominal_load.imag]
    raw["load_range"] = list(config.load_range)
    raw["pv_range"] = list(config.pv_range)
    raw["pv_buses"] = [list(loc) for loc in config.pv_buses]
    return raw


def _config_from_json(raw: dict) -> ScenarioConfig:
    return ScenarioConfig(
        n_train=int(raw["n_train"]),
        n_test=int(raw["n_test"]),
        load_range=tuple(raw["load_range"]),
        pv_buses=tuple((int(b), int(p)) for b, p in raw["pv_buses"]),
        pv_range=tuple(raw["pv_range"]),
        nominal_load=complex(raw["nominal_load"][0], raw["nominal_load"][1]),
        delta_fraction=float(raw["delta_fraction"]),
        seed=int(raw["seed"]),
    )


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as JSON-lines: a header record, then one per sample."""
    header = {
        "feeder_name": dataset.feeder_name,
        "split": dataset.split,
        "seed": dataset.config.seed,
        "n_samples": dataset.n_samples,
        "config": _config_to_json(dataset.config),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for inj, v in zip(dataset.injections, dataset.voltages):
            record = {
                "s_wye": encode_complex(inj.s_wye),
                "s_delta": encode_complex(inj.s_delta),
                "v": encode_complex(v),
            }
            fh.write(json.dumps(record) + "\n")


def load_dataset(path) -> Dataset:
    """Read a dataset written by save_dataset."""
    with open(path) as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ParseError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON-lines: {exc}") from None
    for key in ("feeder_name", "split", "config", "n_samples"):
        if key not in header:
            raise ParseError(f"{path}: header is missing key '{key}'")
    if int(header["n_samples"]) != len(records):
        raise ParseError(
            f"{path}: header announces {header['n_samples']} samples, found {len(records)}"
        )
    injections, voltages = [], []
    for i, rec in enumerate(records):
        for key in ("s_wye", "s_delta", "v"):
            if key not in rec:
                raise ParseError(f"{path}: record {i} is missing key '{key}'")
        injections.append(
            Injection(
                s_wye=decode_complex(rec["s_wye"], field="s_wye"),
                s_delta=decode_complex(rec["s_delta"], field="s_delta"),
            )
        )
        voltages.append(decode_complex(rec["v"], field="v"))
    return Dataset(
        feeder_name=str(header["feeder_name"]),
        split=str(header["split"]),
        config=_config_from_json(header["config"]),
        injections=injections,
        voltages=np.array(voltages),
    )
