"""Tracking by detection: same-class IoU association across consecutive frames.

A matched track absorbs the detection and clears its miss counter; an
unmatched track ages and terminates once its misses exceed max_misses;
unmatched detections spawn fresh tracks. No motion model: a track is
represented by its most recent box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .model import BBox, Detection, bbox_iou

__all__ = [
    "Observation",
    "Track",
    "TrackerParams",
    "Assignment",
    "StepResult",
    "Tracker",
    "associate",
]


class Observation(NamedTuple):
    frame_id: int
    bbox: BBox
    confidence: float


@dataclass
class Track:
    """Identity-preserving sequence of same-class observations."""

    track_id: int
    cls: str
    observations: list[Observation]
    birth_frame: int
    death_frame: int | None = None
    misses: int = 0

    @property
    def last_box(self) -> BBox:
        return self.observations[-1].bbox

    @property
    def last_frame(self) -> int:
        return self.observations[-1].frame_id


@dataclass(frozen=True)
class TrackerParams:
    iou_threshold: float = 0.3
    max_misses: int = 3

    def __post_init__(self) -> None:
        if not (0.0 <= self.iou_threshold <= 1.0):
            raise ValueError(f"iou_threshold out of [0,1]: {self.iou_threshold!r}")
        if self.max_misses < 0:
            raise ValueError(f"max_misses must be >= 0: {self.max_misses!r}")


@dataclass(frozen=True)
class Assignment:
    matches: tuple[tuple[int, int], ...]  # (track_id, det_index)
    unmatched_track_ids: tuple[int, ...]
    unmatched_det_indices: tuple[int, ...]


@dataclass(frozen=True)
class StepResult:
    births: tuple[int, ...]
    deaths: tuple[int, ...]


def associate(
    active: Sequence[Track], dets: Sequence[Detection], iou_threshold: float
) -> Assignment:
    """Greedy one-to-one matching of tracks to detections.

    Candidate pairs need the same class and IoU >= threshold between the
    track's last box and the detection; they are accepted in descending IoU
    order with (lower track_id, lower det index) breaking ties.
    """
    candidates = []
    for t in active:
        for j, d in enumerate(dets):
            if d.cls != t.cls:
                continue
            score = bbox_iou(t.last_box, d.bbox)
            if score >= iou_threshold:
                candidates.append((score, t.track_id, j))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

    matched_tracks: set[int] = set()
    matched_dets: set[int] = set()
    matches: list[tuple[int, int]] = []
    for score, tid, j in candidates:
        if tid in matched_tracks or j in matched_dets:
            continue
        matched_tracks.add(tid)
        matched_dets.add(j)
        matches.append((tid, j))

    return Assignment(
        matches=tuple(matches),
        unmatched_track_ids=tuple(
            t.track_id for t in active if t.track_id not in matched_tracks
        ),
        unmatched_det_indices=tuple(
            j for j in range(len(dets)) if j not in matched_dets
        ),
    )


@dataclass
class Tracker:
    """Per-stream tracker state; step() is strictly frame-ordered."""

    params: TrackerParams = field(default_factory=TrackerParams)
    active: list[Track] = field(default_factory=list)
    terminated: list[Track] = field(default_factory=list)
    next_id: int = 0
    _last_frame: int | None = None
    _by_id: dict[int, Track] = field(default_factory=dict)

    def get(self, track_id: int) -> Track:
        return self._by_id[track_id]

    def step(self, frame_id: int, dets: Sequence[Detection]) -> StepResult:
        """Advance one frame; returns the ids of tracks born and died."""
        if self._last_frame is not None and frame_id <= self._last_frame:
            raise ValueError(
                f"frame_id must increase strictly: got {frame_id} after "
                f"{self._last_frame}"
            )
        asg = associate(self.active, dets, self.params.iou_threshold)

        for tid, j in asg.matches:
            t = self._by_id[tid]
            d = dets[j]
            t.observations.append(Observation(frame_id, d.bbox, d.confidence))
            t.misses = 0

        deaths: list[int] = []
        survivors: list[Track] = []
        unmatched = set(asg.unmatched_track_ids)
        for t in self.active:
            if t.track_id in unmatched:
                t.misses += 1
                if t.misses > self.params.max_misses:
                    t.death_frame = frame_id
                    self.terminated.append(t)
                    deaths.append(t.track_id)
                    continue
            survivors.append(t)
        self.active = survivors

        births: list[int] = []
        for j in asg.unmatched_det_indices:
            d = dets[j]
            t = Track(
                track_id=self.next_id,
                cls=d.cls,
                observations=[Observation(frame_id, d.bbox, d.confidence)],
                birth_frame=frame_id,
            )
            self.next_id += 1
            self.active.append(t)
            self._by_id[t.track_id] = t
            births.append(t.track_id)

        self._last_frame = frame_id
        return StepResult(births=tuple(births), deaths=tuple(deaths))
