"""Salient-event rules over tracks, plus debouncing into confirmed events.

Six event types are recognized from bounding-box interactions:

* meeting — two or more person boxes overlap or come very close;
* crowd — enough person centers sit near their group centroid;
* enter_vehicle / board_vessel — a person track ends while freshly
  interacting with a vehicle/vessel box (the person was seen without that
  interaction shortly before it began);
* exit_vehicle / disembark_vessel — a young person track interacts with a
  vehicle/vessel box right after birth.

Group rules (meeting, crowd) are debounced: a raw group must persist
debounce_frames observations to become an event, and a group that reappears
with participant Jaccard >= 0.5 within cooldown_frames extends the same
event instead of opening a new one. Transitions fire instantly but respect
a per-(type, person) cooldown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .geo import GeoPoint, pixel_to_geo
from .model import (
    PERSON,
    VEHICLE,
    VESSEL,
    BBox,
    GeoMeta,
    bbox_center,
    bbox_diagonal,
    bbox_iou,
    bbox_union,
    point_in_bbox,
)
from .context import ContextLabel
from .tracking import Track, Tracker

__all__ = [
    "EventType",
    "Event",
    "EventParams",
    "detect_meetings",
    "detect_crowds",
    "EventEngine",
]


class EventType(str, Enum):
    MEETING = "meeting"
    CROWD = "crowd"
    ENTER_VEHICLE = "enter_vehicle"
    EXIT_VEHICLE = "exit_vehicle"
    BOARD_VESSEL = "board_vessel"
    DISEMBARK_VESSEL = "disembark_vessel"


#: container class -> (departure event, emergence event)
_TRANSITIONS = {
    VEHICLE: (EventType.ENTER_VEHICLE, EventType.EXIT_VEHICLE),
    VESSEL: (EventType.BOARD_VESSEL, EventType.DISEMBARK_VESSEL),
}


@dataclass(frozen=True)
class EventParams:
    """Rule thresholds; every value is config-overridable."""

    meeting_k: float = 1.0
    crowd_min_count: int = 5
    crowd_radius_k: float = 2.0
    interaction_iou: float = 0.1
    new_track_age: int = 2
    debounce_frames: int = 3
    cooldown_frames: int = 30

    def __post_init__(self) -> None:
        if not (self.meeting_k > 0):
            raise ValueError(f"meeting_k must be > 0: {self.meeting_k!r}")
        if self.crowd_min_count < 2:
            raise ValueError(f"crowd_min_count must be >= 2: {self.crowd_min_count!r}")
        if not (self.crowd_radius_k > 0):
            raise ValueError(f"crowd_radius_k must be > 0: {self.crowd_radius_k!r}")
        if not (0.0 <= self.interaction_iou <= 1.0):
            raise ValueError(f"interaction_iou out of [0,1]: {self.interaction_iou!r}")
        if self.new_track_age < 0:
            raise ValueError(f"new_track_age must be >= 0: {self.new_track_age!r}")
        if self.debounce_frames < 1:
            raise ValueError(f"debounce_frames must be >= 1: {self.debounce_frames!r}")
        if self.cooldown_frames < 0:
            raise ValueError(f"cooldown_frames must be >= 0: {self.cooldown_frames!r}")


@dataclass(frozen=True)
class Event:
    """A confirmed, typed occurrence spanning start..end frames."""

    event_id: int
    type: EventType
    start_frame: int
    end_frame: int
    participants: tuple[int, ...]
    anchor_bbox: BBox
    geo: GeoPoint | None
    context_label: ContextLabel
    start_ts_ms: int
    end_ts_ms: int

    def __post_init__(self) -> None:
        if self.end_frame < self.start_frame:
            raise ValueError("event end_frame must be >= start_frame")
        if not self.participants:
            raise ValueError("event participants must be non-empty")


def detect_meetings(
    people: Sequence[tuple[int, BBox]], p: EventParams
) -> list[tuple[int, ...]]:
    """Connected components of the person proximity graph, size >= 2.

    Two persons are adjacent when their boxes overlap or their centers lie
    within meeting_k times the mean of the two box diagonals.
    """
    n = len(people)
    adj: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        _, bi = people[i]
        ci = bbox_center(bi)
        for j in range(i + 1, n):
            _, bj = people[j]
            if bbox_iou(bi, bj) > 0.0:
                close = True
            else:
                cj = bbox_center(bj)
                limit = p.meeting_k * (bbox_diagonal(bi) + bbox_diagonal(bj)) / 2.0
                close = math.dist(ci, cj) <= limit
            if close:
                adj[i].append(j)
                adj[j].append(i)

    groups: list[tuple[int, ...]] = []
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        component = []
        while stack:
            k = stack.pop()
            component.append(people[k][0])
            for nb in adj[k]:
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(nb)
        if len(component) >= 2:
            groups.append(tuple(sorted(component)))
    groups.sort(key=lambda g: g[0])
    return groups


def detect_crowds(
    people: Sequence[tuple[int, BBox]], p: EventParams
) -> list[tuple[int, ...]]:
    """Persons whose centers sit near the group centroid, count-gated.

    A second pass over the persons the first crowd excluded can surface one
    more cluster; it only runs when the first pass fired.
    """
    groups: list[tuple[int, ...]] = []
    pool = list(people)
    for _ in range(2):
        if len(pool) < p.crowd_min_count:
            break
        centers = [bbox_center(b) for _, b in pool]
        cx = sum(c[0] for c in centers) / len(centers)
        cy = sum(c[1] for c in centers) / len(centers)
        mean_diag = sum(bbox_diagonal(b) for _, b in pool) / len(pool)
        radius = p.crowd_radius_k * mean_diag
        member_idx = [
            i for i, c in enumerate(centers) if math.dist(c, (cx, cy)) <= radius
        ]
        if len(member_idx) < p.crowd_min_count:
            break
        groups.append(tuple(sorted(pool[i][0] for i in member_idx)))
        member_set = set(member_idx)
        pool = [q for i, q in enumerate(pool) if i not in member_set]
    return groups


def _interacting(pbox: BBox, cbox: BBox, p: EventParams) -> bool:
    # Containment is accepted alongside IoU: a person fully inside a large
    # container box can have near-zero IoU from the area mismatch.
    if bbox_iou(pbox, cbox) >= p.interaction_iou:
        return True
    cx, cy = bbox_center(pbox)
    return point_in_bbox(cx, cy, cbox)


@dataclass
class _FrameMeta:
    ts: int
    label: ContextLabel
    geo: GeoMeta | None
    width: int
    height: int


@dataclass
class _InteractionRun:
    """Continuous person/container interaction: onset, extent, freshness.

    Boxes and frame metadata snapshot the most recent co-observation so a
    departure can be reconstructed after the person track has died.
    """

    start_frame: int
    last_frame: int
    fresh: bool
    person_box: BBox
    container_box: BBox
    meta: _FrameMeta


@dataclass
class _GroupState:
    """An open (pending or confirmed) meeting/crowd group."""

    seq: int
    etype: EventType
    participants: set[int]
    start_frame: int
    start_ts: int
    last_frame: int
    last_ts: int
    seen_count: int
    anchor: BBox
    geo: GeoPoint | None
    context_label: ContextLabel
    confirmed: bool = False


def _jaccard(a: set[int], b: Iterable[int]) -> float:
    bs = set(b)
    union = len(a | bs)
    return len(a & bs) / union if union else 0.0


class EventEngine:
    """Applies the rules frame by frame and debounces raw firings.

    Feed observe() every actionable frame in order (after the tracker step),
    then call finish() once to flush open groups and collect the events.
    `miss_tolerance` should match the tracker's max_misses so interaction
    evidence survives until the tracker reports the death.
    """

    def __init__(
        self, params: EventParams | None = None, miss_tolerance: int = 3
    ) -> None:
        self.params = params or EventParams()
        self.miss_tolerance = miss_tolerance
        self._groups: list[_GroupState] = []
        self._staged: list[tuple] = []  # rows; final ids assigned in finish()
        self._interactions: dict[tuple[int, int], _InteractionRun] = {}
        self._run_history: dict[tuple[int, int], int] = {}  # pair -> prev run end
        self._transition_fired: dict[tuple[EventType, int], int] = {}
        self._prev_frame: int | None = None
        self._group_seq = 0
        self._finished = False

    # -- per-frame entry point ---------------------------------------------

    def observe(
        self,
        frame_id: int,
        timestamp_ms: int,
        context_label: ContextLabel,
        tracker: Tracker,
        births: Sequence[int],
        deaths: Sequence[int],
        geo: GeoMeta | None,
        frame_w: int,
        frame_h: int,
    ) -> None:
        if self._finished:
            raise RuntimeError("EventEngine.observe called after finish()")
        meta = _FrameMeta(timestamp_ms, context_label, geo, frame_w, frame_h)

        self._expire_groups(frame_id)

        current = [
            t for t in tracker.active if t.observations[-1].frame_id == frame_id
        ]
        persons = [(t.track_id, t.last_box) for t in current if t.cls == PERSON]
        containers = [
            (t.track_id, t.cls, t.last_box) for t in current if t.cls in _TRANSITIONS
        ]

        self._update_interactions(frame_id, tracker, persons, containers, meta)
        self._fire_departures(tracker, deaths)

        person_box = dict(persons)
        for group in detect_meetings(persons, self.params):
            self._ingest_group(EventType.MEETING, group, person_box, frame_id, meta)
        for group in detect_crowds(persons, self.params):
            self._ingest_group(EventType.CROWD, group, person_box, frame_id, meta)

        self._prune_interactions(frame_id)
        self._prev_frame = frame_id

    def finish(self) -> list[Event]:
        """Flush open groups, order the events, and assign final ids."""
        if not self._finished:
            for st in self._groups:
                if st.confirmed:
                    self._emit_group(st)
            self._groups.clear()
            self._finished = True
        rows = sorted(
            self._staged, key=lambda r: (r[1], r[2], r[0].value, r[3], r[8])
        )
        return [
            Event(
                event_id=i,
                type=r[0],
                start_frame=r[1],
                end_frame=r[2],
                participants=r[3],
                anchor_bbox=r[4],
                geo=r[5],
                context_label=r[6],
                start_ts_ms=r[7][0],
                end_ts_ms=r[7][1],
            )
            for i, r in enumerate(rows)
        ]

    # -- interactions and transitions ----------------------------------------

    def _update_interactions(
        self,
        frame_id: int,
        tracker: Tracker,
        persons: list[tuple[int, BBox]],
        containers: list[tuple[int, str, BBox]],
        meta: _FrameMeta,
    ) -> None:
        p = self.params
        for pid, pbox in persons:
            person = tracker.get(pid)
            age = frame_id - person.birth_frame
            for cid, ccls, cbox in sorted(containers):
                if not _interacting(pbox, cbox, p):
                    continue
                run = self._interactions.get((pid, cid))
                if run is not None and run.last_frame == self._prev_frame:
                    run.last_frame = frame_id
                    run.person_box = pbox
                    run.container_box = cbox
                    run.meta = meta
                else:
                    if run is not None:
                        self._run_history[(pid, cid)] = run.last_frame
                    fresh = self._onset_is_fresh(person, frame_id, (pid, cid))
                    self._interactions[(pid, cid)] = _InteractionRun(
                        start_frame=frame_id,
                        last_frame=frame_id,
                        fresh=fresh,
                        person_box=pbox,
                        container_box=cbox,
                        meta=meta,
                    )
                if age <= p.new_track_age:
                    self._fire_transition(
                        _TRANSITIONS[ccls][1], pid, cid, frame_id, pbox, cbox, meta
                    )

    def _onset_is_fresh(
        self, person: Track, onset_frame: int, pair: tuple[int, int]
    ) -> bool:
        """True iff the person was observed without this interaction within
        new_track_age frames before the run began."""
        prev_end = self._run_history.get(pair)
        lo = onset_frame - self.params.new_track_age
        for obs in reversed(person.observations):
            if obs.frame_id >= onset_frame:
                continue
            if obs.frame_id < lo:
                break
            if prev_end is None or obs.frame_id > prev_end:
                return True
        return False

    def _fire_departures(self, tracker: Tracker, deaths: Sequence[int]) -> None:
        for dead_id in sorted(deaths):
            t = tracker.get(dead_id)
            if t.cls != PERSON:
                continue
            t_obs = t.last_frame
            for (pid, cid), run in sorted(self._interactions.items()):
                if pid != dead_id or run.last_frame != t_obs or not run.fresh:
                    continue
                ccls = tracker.get(cid).cls
                self._fire_transition(
                    _TRANSITIONS[ccls][0],
                    pid,
                    cid,
                    t_obs,
                    run.person_box,
                    run.container_box,
                    run.meta,
                )

    def _fire_transition(
        self,
        etype: EventType,
        pid: int,
        cid: int,
        event_frame: int,
        pbox: BBox,
        cbox: BBox,
        meta: _FrameMeta,
    ) -> None:
        key = (etype, pid)
        last = self._transition_fired.get(key)
        if last is not None and event_frame - last <= self.params.cooldown_frames:
            return
        self._transition_fired[key] = event_frame
        anchor = bbox_union([pbox, cbox])
        self._stage(
            etype,
            start=event_frame,
            end=event_frame,
            participants=tuple(sorted((pid, cid))),
            anchor=anchor,
            geo=self._project(anchor, meta),
            label=meta.label,
            ts=(meta.ts, meta.ts),
        )

    def _prune_interactions(self, frame_id: int) -> None:
        # A run must outlive the tracker's miss window (so departures can
        # still see it) and the freshness window (so onset evaluation can
        # still consult the previous run's end).
        horizon = max(self.params.new_track_age, self.miss_tolerance) + 1
        for k in [
            k
            for k, run in self._interactions.items()
            if frame_id - run.last_frame > horizon
        ]:
            self._run_history[k] = self._interactions[k].last_frame
            del self._interactions[k]
        for k in [
            k
            for k, end in self._run_history.items()
            if frame_id - end > horizon
        ]:
            del self._run_history[k]

    # -- group debouncing ------------------------------------------------------

    def _ingest_group(
        self,
        etype: EventType,
        group: tuple[int, ...],
        boxes: dict[int, BBox],
        frame_id: int,
        meta: _FrameMeta,
    ) -> None:
        best: _GroupState | None = None
        best_j = 0.0
        for st in self._groups:
            if st.etype is not etype or st.last_frame == frame_id:
                continue
            j = _jaccard(st.participants, group)
            if j >= 0.5 and j > best_j:
                best, best_j = st, j
        if best is not None:
            best.participants.update(group)
            best.last_frame = frame_id
            best.last_ts = meta.ts
            best.seen_count += 1
            if not best.confirmed and best.seen_count >= self.params.debounce_frames:
                best.confirmed = True
            return
        anchor = bbox_union([boxes[tid] for tid in group])
        st = _GroupState(
            seq=self._group_seq,
            etype=etype,
            participants=set(group),
            start_frame=frame_id,
            start_ts=meta.ts,
            last_frame=frame_id,
            last_ts=meta.ts,
            seen_count=1,
            anchor=anchor,
            geo=self._project(anchor, meta),
            context_label=meta.label,
        )
        self._group_seq += 1
        if self.params.debounce_frames <= 1:
            st.confirmed = True
        self._groups.append(st)

    def _expire_groups(self, frame_id: int) -> None:
        still_open: list[_GroupState] = []
        for st in self._groups:
            if frame_id - st.last_frame > self.params.cooldown_frames:
                if st.confirmed:
                    self._emit_group(st)
            else:
                still_open.append(st)
        self._groups = still_open

    def _emit_group(self, st: _GroupState) -> None:
        self._stage(
            st.etype,
            start=st.start_frame,
            end=st.last_frame,
            participants=tuple(sorted(st.participants)),
            anchor=st.anchor,
            geo=st.geo,
            label=st.context_label,
            ts=(st.start_ts, st.last_ts),
        )

    # -- shared helpers ---------------------------------------------------------

    def _project(self, anchor: BBox, meta: _FrameMeta) -> GeoPoint | None:
        if meta.geo is None:
            return None
        return pixel_to_geo(meta.geo, meta.width, meta.height, bbox_center(anchor))

    def _stage(self, etype, start, end, participants, anchor, geo, label, ts) -> None:
        self._staged.append(
            (etype, start, end, participants, anchor, geo, label, ts, len(self._staged))
        )
