"""Published experiment grid: training modes and their hyperparameters.

Each benchmark division (ByLoad, BySeverity) was published with a fixed set
of experiments, each pinning the epoch budget and initial learning rate for
one training mode. The registry reproduces that grid verbatim, including its
quirks: the BySeverity block lists full_finetune_imagenet twice with
different learning rates and has no full_finetune_vibnet row, and
from_scratch appears only under BySeverity (also twice). Lookups therefore
return every matching row, in published order, rather than forcing a choice
the source never made.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigError

BATCH_SIZE = 32

DIVISIONS = ("ByLoad", "BySeverity")


class Mode(enum.Enum):
    """How the network is initialized and which parameters train.

    ``pretrain_vibnet`` trains a fresh backbone on non-benchmark spectrogram
    corpora to produce a reusable weight archive; the other five modes
    fine-tune (or train from scratch) on a benchmark split and emit
    predictions. ``partial_*`` modes train only the classification head and
    keep the feature extractor frozen; ``full_*`` modes update every weight.
    """

    PRETRAIN_VIBNET = "pretrain_vibnet"
    FULL_FINETUNE_IMAGENET = "full_finetune_imagenet"
    FULL_FINETUNE_VIBNET = "full_finetune_vibnet"
    PARTIAL_FINETUNE_IMAGENET = "partial_finetune_imagenet"
    PARTIAL_FINETUNE_VIBNET = "partial_finetune_vibnet"
    FROM_SCRATCH = "from_scratch"

    @property
    def is_partial(self) -> bool:
        return self in (Mode.PARTIAL_FINETUNE_IMAGENET, Mode.PARTIAL_FINETUNE_VIBNET)

    @property
    def uses_imagenet(self) -> bool:
        return self in (Mode.FULL_FINETUNE_IMAGENET, Mode.PARTIAL_FINETUNE_IMAGENET)

    @property
    def uses_vibnet(self) -> bool:
        return self in (Mode.FULL_FINETUNE_VIBNET, Mode.PARTIAL_FINETUNE_VIBNET)


def coerce_mode(value: "Mode | str") -> Mode:
    if isinstance(value, Mode):
        return value
    try:
        return Mode(value)
    except ValueError:
        known = ", ".join(m.value for m in Mode)
        raise ConfigError(f"unknown mode {value!r}; expected one of: {known}") from None


@dataclass(frozen=True)
class HyperParams:
    """One published experiment row."""

    division: str
    mode: Mode
    epochs: int
    initial_lr: float
    batch_size: int = BATCH_SIZE


# Verbatim published grid, in published order.
REGISTRY: tuple[HyperParams, ...] = (
    HyperParams("ByLoad", Mode.PARTIAL_FINETUNE_IMAGENET, 50, 0.01),
    HyperParams("ByLoad", Mode.PARTIAL_FINETUNE_VIBNET, 50, 0.01),
    HyperParams("ByLoad", Mode.FULL_FINETUNE_IMAGENET, 15, 0.001),
    HyperParams("ByLoad", Mode.FULL_FINETUNE_VIBNET, 25, 0.01),
    HyperParams("BySeverity", Mode.FROM_SCRATCH, 15, 0.001),
    HyperParams("BySeverity", Mode.PARTIAL_FINETUNE_IMAGENET, 50, 0.001),
    HyperParams("BySeverity", Mode.PARTIAL_FINETUNE_VIBNET, 50, 0.01),
    HyperParams("BySeverity", Mode.FULL_FINETUNE_IMAGENET, 25, 0.001),
    HyperParams("BySeverity", Mode.FULL_FINETUNE_IMAGENET, 25, 0.01),
    HyperParams("BySeverity", Mode.FROM_SCRATCH, 25, 0.001),
)


def hyperparams_for(mode: "Mode | str", division: str) -> tuple[HyperParams, ...]:
    """All published rows for a (mode, division) pair, in published order.

    Raises ConfigError when the pair has no row — such pairs were never
    benchmarked and a run cannot claim hyperparameters for them.
    """
    mode = coerce_mode(mode)
    if division not in DIVISIONS:
        raise ConfigError(f"unknown division {division!r}; expected one of {DIVISIONS}")
    rows = tuple(r for r in REGISTRY if r.mode is mode and r.division == division)
    if not rows:
        raise ConfigError(
            f"no published hyperparameters for mode {mode.value!r} under "
            f"division {division!r}"
        )
    return rows
