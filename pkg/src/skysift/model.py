"""Shared domain types and box arithmetic for detection streams.

Coordinate convention: top-left origin, x rightward, y downward, real-valued
pixels. Boxes are (x, y, w, h) with w, h >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

PERSON = "person"
VEHICLE = "vehicle"
VESSEL = "vessel"
BUILDING = "building"
PLANE = "plane"

#: Classes the event rules know about. Anything else is carried through the
#: stream verbatim but never participates in an event.
KNOWN_CLASSES = frozenset({PERSON, VEHICLE, VESSEL, BUILDING, PLANE})


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box; degenerate (zero-area) boxes are legal values."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"bbox field '{name}' must be finite, got {v!r}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"bbox w/h must be >= 0, got w={self.w}, h={self.h}")


def bbox_area(b: BBox) -> float:
    return b.w * b.h


def bbox_intersection_area(a: BBox, b: BBox) -> float:
    """Area of the overlap rectangle; 0 for disjoint boxes. Symmetric."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def bbox_iou(a: BBox, b: BBox) -> float:
    """Intersection over union in [0, 1]; 0 when both boxes have zero area."""
    inter = bbox_intersection_area(a, b)
    union = bbox_area(a) + bbox_area(b) - inter
    if union <= 0:
        return 0.0
    return inter / union


def bbox_center(b: BBox) -> tuple[float, float]:
    return (b.x + b.w / 2.0, b.y + b.h / 2.0)


def bbox_diagonal(b: BBox) -> float:
    return math.hypot(b.w, b.h)


def bbox_union(boxes: list[BBox] | tuple[BBox, ...]) -> BBox:
    """Smallest box enclosing every input box."""
    if not boxes:
        raise ValueError("bbox_union needs at least one box")
    x0 = min(b.x for b in boxes)
    y0 = min(b.y for b in boxes)
    x1 = max(b.x + b.w for b in boxes)
    y1 = max(b.y + b.h for b in boxes)
    return BBox(x0, y0, x1 - x0, y1 - y0)


def bbox_intersects_frame(b: BBox, frame_w: float, frame_h: float) -> bool:
    """True iff the closed box rectangle meets the closed frame rectangle."""
    return (
        max(b.x, 0.0) <= min(b.x + b.w, frame_w)
        and max(b.y, 0.0) <= min(b.y + b.h, frame_h)
    )


def point_in_bbox(px: float, py: float, b: BBox) -> bool:
    return b.x <= px <= b.x + b.w and b.y <= py <= b.y + b.h


@dataclass(frozen=True)
class Detection:
    """One detected object: class label, pixel box, confidence in [0, 1]."""

    cls: str
    bbox: BBox
    confidence: float

    def __post_init__(self) -> None:
        if not self.cls:
            raise ValueError("detection class must be a non-empty string")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(
                f"detection confidence must be in [0,1], got {self.confidence!r}"
            )


@dataclass(frozen=True)
class GeoMeta:
    """Flat-earth camera footprint: frame-center geodetic position, ground
    sample distance, and the compass direction of image-up."""

    center_lat: float
    center_lon: float
    gsd_m_per_px: float
    heading_deg: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.center_lat <= 90.0):
            raise ValueError(f"center_lat out of range [-90,90]: {self.center_lat!r}")
        if not (-180.0 <= self.center_lon <= 180.0):
            raise ValueError(f"center_lon out of range [-180,180]: {self.center_lon!r}")
        if not (self.gsd_m_per_px > 0):
            raise ValueError(f"gsd_m_per_px must be > 0: {self.gsd_m_per_px!r}")
        if not (0.0 <= self.heading_deg < 360.0):
            raise ValueError(f"heading_deg out of range [0,360): {self.heading_deg!r}")


@dataclass(frozen=True)
class ContextFeatures:
    """Whole-frame features consumed by the reference context classifier."""

    altitude_m: float
    water_fraction: float
    clutter_score: float

    def __post_init__(self) -> None:
        if not (self.altitude_m >= 0):
            raise ValueError(f"altitude_m must be >= 0: {self.altitude_m!r}")
        if not (0.0 <= self.water_fraction <= 1.0):
            raise ValueError(f"water_fraction out of [0,1]: {self.water_fraction!r}")
        if not (0.0 <= self.clutter_score <= 1.0):
            raise ValueError(f"clutter_score out of [0,1]: {self.clutter_score!r}")


@dataclass(frozen=True)
class FrameRecord:
    """One frame of the detection stream.

    Exactly one of `context_logits` / `features` is needed for context
    classification (logits win when both are present); `geo` is optional and
    only degrades geolocation when absent.
    """

    frame_id: int
    timestamp_ms: int
    width: int
    height: int
    detections: tuple[Detection, ...] = ()
    geo: GeoMeta | None = None
    features: ContextFeatures | None = None
    context_logits: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.frame_id < 0:
            raise ValueError(f"frame_id must be >= 0: {self.frame_id!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"frame width/height must be > 0: {self.width}x{self.height}"
            )
        if self.context_logits is not None and len(self.context_logits) != 5:
            raise ValueError(
                f"context_logits must have length 5, got {len(self.context_logits)}"
            )
        for d in self.detections:
            if not bbox_intersects_frame(d.bbox, self.width, self.height):
                raise ValueError(
                    f"detection bbox {d.bbox} lies outside frame "
                    f"{self.width}x{self.height}"
                )


class ValidationError(ValueError):
    """Malformed stream, config, or scenario input."""
