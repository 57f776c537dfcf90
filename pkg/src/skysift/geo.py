"""Pixel-to-geodetic projection under a flat-earth, north-referenced model.

The frame center sits at the platform's (lat, lon); pixel offsets scale by
the ground sample distance and rotate by the heading (compass direction of
image-up). Latitude degrees are 111320 m everywhere; longitude degrees
shrink by cos(lat). The model is analytically invertible, which the tests
exploit, and it is invalid near the poles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

from .model import GeoMeta, bbox_center

if TYPE_CHECKING:  # pragma: no cover
    from .events import Event

__all__ = ["GeoPoint", "METERS_PER_DEGREE", "pixel_to_geo", "geo_to_pixel", "geolocate_event"]

METERS_PER_DEGREE = 111320.0

_MAX_CENTER_LAT = 89.9


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"lat out of range [-90,90]: {self.lat!r}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"lon out of range [-180,180]: {self.lon!r}")


def pixel_to_geo(
    g: GeoMeta, frame_w: float, frame_h: float, px: tuple[float, float]
) -> GeoPoint:
    """Project a frame pixel to (lat, lon)."""
    if abs(g.center_lat) >= _MAX_CENTER_LAT:
        raise ValueError(
            f"flat-earth projection is invalid near the poles: lat {g.center_lat!r}"
        )
    x, y = px
    # Offsets in meters along the image axes: +e to image-right, +n to image-up.
    e = (x - frame_w / 2.0) * g.gsd_m_per_px
    n = (frame_h / 2.0 - y) * g.gsd_m_per_px
    theta = math.radians(g.heading_deg)
    east = e * math.cos(theta) + n * math.sin(theta)
    north = n * math.cos(theta) - e * math.sin(theta)
    lat = g.center_lat + north / METERS_PER_DEGREE
    lon = g.center_lon + east / (METERS_PER_DEGREE * math.cos(math.radians(g.center_lat)))
    return GeoPoint(lat=lat, lon=lon)


def geo_to_pixel(
    g: GeoMeta, frame_w: float, frame_h: float, pt: GeoPoint
) -> tuple[float, float]:
    """Analytic inverse of pixel_to_geo."""
    if abs(g.center_lat) >= _MAX_CENTER_LAT:
        raise ValueError(
            f"flat-earth projection is invalid near the poles: lat {g.center_lat!r}"
        )
    north = (pt.lat - g.center_lat) * METERS_PER_DEGREE
    east = (pt.lon - g.center_lon) * METERS_PER_DEGREE * math.cos(
        math.radians(g.center_lat)
    )
    theta = math.radians(g.heading_deg)
    e = east * math.cos(theta) - north * math.sin(theta)
    n = north * math.cos(theta) + east * math.sin(theta)
    x = e / g.gsd_m_per_px + frame_w / 2.0
    y = frame_h / 2.0 - n / g.gsd_m_per_px
    return (x, y)


def geolocate_event(
    ev: "Event", g: GeoMeta | None, frame_w: float, frame_h: float
) -> "Event":
    """Attach the anchor-box center's geolocation; absent GeoMeta degrades
    to an ungeolocated event rather than failing."""
    if g is None:
        return replace(ev, geo=None)
    return replace(ev, geo=pixel_to_geo(g, frame_w, frame_h, bbox_center(ev.anchor_bbox)))
