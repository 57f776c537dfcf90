"""Scene-context classification and the uneventful gate.

A frame gets exactly one of five labels. The label picks the detector
configuration for the frame; `uneventful` short-circuits the rest of the
pipeline. Two classification paths exist: a softmax head over externally
supplied logits (the real upstream classifier) and a deterministic reference
rule over stream features (the pluggable stand-in).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Mapping, Sequence

from .model import ContextFeatures, FrameRecord

if TYPE_CHECKING:  # pragma: no cover
    from .cataloging import DetectorConfig

__all__ = [
    "ContextLabel",
    "CONTEXT_LABELS",
    "ACTIONABLE_LABELS",
    "SceneContext",
    "ContextFeatures",
    "ReferenceThresholds",
    "softmax",
    "classify_from_logits",
    "classify_reference",
    "classify_frame",
    "is_actionable",
    "select_config",
]


class ContextLabel(str, Enum):
    # Declaration order defines argmax tie-break precedence.
    HIGH_ALTITUDE = "high_altitude"
    MEDIUM_ALTITUDE = "medium_altitude"
    LOW_ALTITUDE = "low_altitude"
    WATER = "water"
    UNEVENTFUL = "uneventful"


CONTEXT_LABELS: tuple[ContextLabel, ...] = tuple(ContextLabel)
ACTIONABLE_LABELS: tuple[ContextLabel, ...] = tuple(
    l for l in ContextLabel if l is not ContextLabel.UNEVENTFUL
)


@dataclass(frozen=True)
class SceneContext:
    """Label plus the probability vector it was taken from (label order =
    ContextLabel declaration order)."""

    label: ContextLabel
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) != len(CONTEXT_LABELS):
            raise ValueError(f"probs must have length 5, got {len(self.probs)}")
        if any(not (0.0 <= p <= 1.0) for p in self.probs):
            raise ValueError(f"probs must lie in [0,1]: {self.probs}")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"probs must sum to 1 within 1e-9: {self.probs}")
        if self.label is not CONTEXT_LABELS[_argmax(self.probs)]:
            raise ValueError("label must be the argmax of probs (first-index ties)")


@dataclass(frozen=True)
class ReferenceThresholds:
    """Tunable rule values for the reference classifier (config section)."""

    uneventful_clutter: float = 0.1
    water_fraction: float = 0.5
    low_altitude_max_m: float = 1000.0
    high_altitude_min_m: float = 3000.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.uneventful_clutter <= 1.0):
            raise ValueError("uneventful_clutter must be in [0,1]")
        if not (0.0 <= self.water_fraction <= 1.0):
            raise ValueError("water_fraction must be in [0,1]")
        if not (0.0 <= self.low_altitude_max_m <= self.high_altitude_min_m):
            raise ValueError("altitude bin edges must satisfy 0 <= low <= high")


def _argmax(values: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def softmax(logits: Sequence[float]) -> tuple[float, ...]:
    """Numerically stable softmax (max-subtracted exponentials)."""
    if len(logits) == 0:
        raise ValueError("softmax input must be non-empty")
    if any(not math.isfinite(z) for z in logits):
        raise ValueError(f"softmax input must be finite: {tuple(logits)}")
    m = max(logits)
    exps = [math.exp(z - m) for z in logits]
    total = sum(exps)
    return tuple(e / total for e in exps)


def classify_from_logits(logits: Sequence[float]) -> SceneContext:
    """Softmax head over the five context logits; first index wins ties."""
    if len(logits) != len(CONTEXT_LABELS):
        raise ValueError(f"expected 5 logits, got {len(logits)}")
    probs = softmax(logits)
    return SceneContext(label=CONTEXT_LABELS[_argmax(probs)], probs=probs)


def classify_reference(
    features: ContextFeatures,
    thresholds: ReferenceThresholds = ReferenceThresholds(),
) -> SceneContext:
    """Deterministic rule stand-in for the upstream scene classifier.

    Precedence: uneventful (clutter below threshold), then water, then the
    altitude bins. Probabilities are the one-hot vector of the chosen label.
    """
    if features.clutter_score < thresholds.uneventful_clutter:
        label = ContextLabel.UNEVENTFUL
    elif features.water_fraction >= thresholds.water_fraction:
        label = ContextLabel.WATER
    elif features.altitude_m >= thresholds.high_altitude_min_m:
        label = ContextLabel.HIGH_ALTITUDE
    elif features.altitude_m >= thresholds.low_altitude_max_m:
        label = ContextLabel.MEDIUM_ALTITUDE
    else:
        label = ContextLabel.LOW_ALTITUDE
    probs = tuple(1.0 if l is label else 0.0 for l in CONTEXT_LABELS)
    return SceneContext(label=label, probs=probs)


def classify_frame(
    frame: FrameRecord,
    thresholds: ReferenceThresholds = ReferenceThresholds(),
) -> SceneContext:
    """Classify a stream frame; logits take precedence over features."""
    if frame.context_logits is not None:
        return classify_from_logits(frame.context_logits)
    if frame.features is not None:
        return classify_reference(frame.features, thresholds)
    raise ValueError(
        f"frame {frame.frame_id} carries neither context_logits nor features; "
        "context classification is impossible"
    )


def is_actionable(ctx: SceneContext) -> bool:
    """False only for uneventful frames, which skip the rest of the pipeline."""
    return ctx.label is not ContextLabel.UNEVENTFUL


def select_config(
    label: ContextLabel, table: Mapping[ContextLabel, "DetectorConfig"]
) -> "DetectorConfig":
    """Look up the detector configuration for an actionable context label."""
    if label is ContextLabel.UNEVENTFUL:
        raise ValueError("no detector config exists for uneventful frames; gate first")
    try:
        return table[label]
    except KeyError:
        raise ValueError(f"context config table has no entry for {label.value!r}")
