"""Multi-scale tile planning, detection gating, and cross-tile merging.

The detector itself is external: the engine plans a tile/scale pyramid for
it, maps its tile-local output back to frame coordinates, applies the
context-tuned confidence/size gates, and merges duplicates across
overlapping tiles with class-aware NMS. The focal-loss utility is provided
as a verified formula for detector-side use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .model import BBox, Detection, bbox_area, bbox_iou

__all__ = [
    "ClassGate",
    "DetectorConfig",
    "Tile",
    "TilePlan",
    "plan_pyramid",
    "map_tile_to_frame",
    "map_frame_to_tile",
    "apply_gates",
    "nms_merge",
    "focal_loss",
]

UNBOUNDED = math.inf


@dataclass(frozen=True)
class ClassGate:
    """Per-class keep conditions: confidence floor and an area band in px²."""

    min_confidence: float = 0.0
    min_area_px2: float = 0.0
    max_area_px2: float = UNBOUNDED

    def __post_init__(self) -> None:
        if not (0.0 <= self.min_confidence <= 1.0):
            raise ValueError(f"min_confidence out of [0,1]: {self.min_confidence!r}")
        if self.min_area_px2 < 0:
            raise ValueError(f"min_area_px2 must be >= 0: {self.min_area_px2!r}")
        if not (self.max_area_px2 > self.min_area_px2):
            raise ValueError(
                f"max_area_px2 ({self.max_area_px2!r}) must exceed "
                f"min_area_px2 ({self.min_area_px2!r})"
            )

    def admits(self, d: Detection) -> bool:
        area = bbox_area(d.bbox)
        return (
            d.confidence >= self.min_confidence
            and self.min_area_px2 <= area <= self.max_area_px2
        )


@dataclass(frozen=True)
class DetectorConfig:
    """Context-tuned tiling and gating parameters for one scene label."""

    scales: tuple[float, ...] = (1.0,)
    tile_size: int = 1024
    overlap_frac: float = 0.2
    class_gates: Mapping[str, ClassGate] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.scales:
            raise ValueError("scales must be non-empty")
        if any(not (s > 0 and math.isfinite(s)) for s in self.scales):
            raise ValueError(f"scales must be positive finite reals: {self.scales}")
        if self.tile_size <= 0:
            raise ValueError(f"tile_size must be > 0: {self.tile_size!r}")
        if not (0.0 <= self.overlap_frac <= 0.9):
            raise ValueError(f"overlap_frac out of [0, 0.9]: {self.overlap_frac!r}")


@dataclass(frozen=True)
class Tile:
    """One detector window: origin in frame pixels, extent in tile pixels.

    `scale` is tile pixels per frame pixel; w/h equal the configured
    tile_size except when the scaled frame is smaller than one tile.
    """

    origin_x: float
    origin_y: float
    w: float
    h: float
    scale: float

    def __post_init__(self) -> None:
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"tile scale must be positive finite: {self.scale!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"tile extent must be positive: {self.w}x{self.h}")


@dataclass(frozen=True)
class TilePlan:
    tiles: tuple[Tile, ...]


def _axis_offsets(extent: float, tile: int, stride: int) -> tuple[list[float], float]:
    """Tile offsets along one axis of the scaled frame.

    Offsets advance by `stride`; the final offset is pulled back so the last
    tile ends exactly at the frame edge. A frame shorter than one tile yields
    a single tile shrunk to the frame.
    """
    if extent <= tile:
        return [0.0], float(extent)
    offsets = [0.0]
    while offsets[-1] + tile < extent:
        nxt = offsets[-1] + stride
        if nxt + tile >= extent:
            nxt = extent - tile
        offsets.append(nxt)
    return offsets, float(tile)


def plan_pyramid(frame_w: int, frame_h: int, cfg: DetectorConfig) -> TilePlan:
    """Lay tiles over every configured scale of the frame.

    At scale s the frame is (frame_w*s, frame_h*s) scaled pixels; tiles of
    side cfg.tile_size are placed with stride floor(tile_size*(1-overlap)),
    clamped so coverage is exact. Tile origins are reported in frame pixels.
    """
    if frame_w <= 0 or frame_h <= 0:
        raise ValueError(f"frame dims must be > 0: {frame_w}x{frame_h}")
    stride = max(1, math.floor(cfg.tile_size * (1.0 - cfg.overlap_frac)))
    tiles: list[Tile] = []
    for s in cfg.scales:
        xs, tw = _axis_offsets(frame_w * s, cfg.tile_size, stride)
        ys, th = _axis_offsets(frame_h * s, cfg.tile_size, stride)
        for oy in ys:
            for ox in xs:
                tiles.append(Tile(ox / s, oy / s, tw, th, s))
    return TilePlan(tiles=tuple(tiles))


def _map_bbox_to_frame(b: BBox, origin_x: float, origin_y: float, scale: float) -> BBox:
    if scale <= 0:
        raise ValueError(f"tile scale must be > 0: {scale!r}")
    return BBox(origin_x + b.x / scale, origin_y + b.y / scale, b.w / scale, b.h / scale)


def map_tile_to_frame(d: Detection, tile: Tile) -> Detection:
    """Lift a tile-local detection into frame coordinates."""
    return Detection(
        cls=d.cls,
        bbox=_map_bbox_to_frame(d.bbox, tile.origin_x, tile.origin_y, tile.scale),
        confidence=d.confidence,
    )


def map_frame_to_tile(d: Detection, tile: Tile) -> Detection:
    """Inverse of map_tile_to_frame."""
    b = d.bbox
    return Detection(
        cls=d.cls,
        bbox=BBox(
            (b.x - tile.origin_x) * tile.scale,
            (b.y - tile.origin_y) * tile.scale,
            b.w * tile.scale,
            b.h * tile.scale,
        ),
        confidence=d.confidence,
    )


def apply_gates(dets: Sequence[Detection], cfg: DetectorConfig) -> list[Detection]:
    """Keep detections that pass their class gate; ungated classes drop.

    Order is preserved; the output is a subsequence of the input.
    """
    kept = []
    for d in dets:
        gate = cfg.class_gates.get(d.cls)
        if gate is not None and gate.admits(d):
            kept.append(d)
    return kept


def nms_merge(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Class-aware greedy NMS over frame-space detections.

    Candidates are visited by confidence descending (ties: smaller area,
    then input order) and kept iff their IoU with every already-kept
    detection of the same class stays below the threshold.
    """
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold out of [0,1]: {iou_threshold!r}")
    order = sorted(
        range(len(dets)),
        key=lambda i: (-dets[i].confidence, bbox_area(dets[i].bbox), i),
    )
    kept: list[Detection] = []
    for i in order:
        d = dets[i]
        if all(
            bbox_iou(d.bbox, k.bbox) < iou_threshold
            for k in kept
            if k.cls == d.cls
        ):
            kept.append(d)
    return kept


def focal_loss(p: float, gamma: float) -> float:
    """Cross entropy attenuated by (1 - p)^gamma for a true-class probability p."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must be in (0,1]: {p!r}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0: {gamma!r}")
    return (1.0 - p) ** gamma * -math.log(p)
