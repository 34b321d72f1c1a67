"""Synthetic dashboard frames: navball disc, prograde marker, text readouts.

Stands in for game screenshots as the visual input to vision agents.  The
prograde marker is placed by an azimuthal-equidistant projection: the
angle off the vessel boresight (+Y) maps linearly to radius on the disc,
with 90 degrees landing on the rim.  Rendering uses flat-colored
primitives and the embedded bitmap font only, so identical observations
produce byte-identical PNGs on any platform.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import fontbits
from .errors import NotUnitError
from .telemetry import Observation

#: Telemetry phrase substituted when the relative velocity is ~zero.
NO_PROGRADE_PHRASE = "Prograde unavailable (no relative motion)"

_BEHIND_PHRASE = "Prograde behind the navball (retrograde view)"


@dataclass(frozen=True)
class MarkerProjection:
    """Navball coordinates of a unit direction in the vessel frame."""

    azimuth: float  # rad, (-pi, pi], positive toward +X (right)
    elevation: float  # rad, [-pi/2, pi/2], positive toward +Z (up)
    boresight_angle: float  # rad, angle off vessel +Y
    visible: bool  # front hemisphere


def project_marker(p: np.ndarray) -> MarkerProjection:
    """Project a unit vessel-frame vector onto navball angles."""
    p = np.asarray(p, dtype=np.float64)
    n = np.linalg.norm(p)
    if abs(n - 1.0) > 1e-9:
        raise NotUnitError(f"marker direction has norm {n!r}")
    x, y, z = p
    az = math.atan2(x, y)
    el = math.asin(max(-1.0, min(1.0, z)))
    bore = math.acos(max(-1.0, min(1.0, y)))
    return MarkerProjection(az, el, bore, visible=bore <= math.pi / 2)


def describe_marker(
    proj: MarkerProjection,
    region_deg: float = 15.0,
    near_deg: float = 30.0,
) -> str:
    """Telemetry phrase for a marker projection.

    The visible hemisphere splits into a 3x3 grid at +-``region_deg`` of
    azimuth/elevation; the marker is "near" under ``near_deg`` off
    boresight.  A marker behind the navball gets its own phrase.
    """
    if not proj.visible:
        return _BEHIND_PHRASE
    thr = math.radians(region_deg)
    if proj.azimuth < -thr:
        horiz = "left"
    elif proj.azimuth > thr:
        horiz = "right"
    else:
        horiz = "center"
    if proj.elevation < -thr:
        vert = "bottom"
    elif proj.elevation > thr:
        vert = "top"
    else:
        vert = "middle"
    closeness = "near" if proj.boresight_angle < math.radians(near_deg) else "far"
    return f"Prograde {closeness} in the {vert} {horiz} side of the navball"


def marker_phrase(prograde: np.ndarray | None, **kwargs) -> str:
    """Phrase for an observation's prograde vector (None -> no-prograde)."""
    if prograde is None:
        return NO_PROGRADE_PHRASE
    return describe_marker(project_marker(prograde), **kwargs)


@dataclass(frozen=True)
class RenderConfig:
    width: int = 512
    height: int = 512
    target_label: str = "Lady"
    scenario_id: str = ""
    region_deg: float = 15.0
    near_deg: float = 30.0


@dataclass
class DashboardImage:
    """Rendered dashboard raster plus provenance metadata."""

    width: int
    height: int
    pixels: np.ndarray  # (H, W, 3) uint8
    metadata: dict = field(default_factory=dict)

    def to_png(self) -> bytes:
        """Encode as PNG (RGB8, no ancillary chunks)."""
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()


# Flat palette.
_BG = (10, 12, 24)
_DISC = (62, 70, 92)
_RIM = (116, 126, 152)
_GRID = (96, 106, 132)
_TEXT = (220, 226, 236)
_MARKER = (255, 204, 0)
_MARKER_EDGE = (72, 52, 0)


def readout_lines(obs: Observation, target_label: str = "Lady") -> list[str]:
    """Text readouts drawn on the dashboard (km/speed to one decimal)."""
    lines = [
        f"DISTANCE TO {target_label.upper()}: {obs.distance / 1000.0:.1f} KM",
        f"SPEED: {obs.speed:.1f} M/S",
        f"FUEL: {obs.fuel:.1f} KG",
        f"CLOCK: {obs.time:.1f} S",
    ]
    if obs.guard_rel_position is not None:
        lines.append(f"DISTANCE TO GUARD: {obs.guard_distance / 1000.0:.1f} KM")
    return lines


def _disc_window(img, cx, cy, radius):
    """Crop to the disc's bounding box; returns (view, dx, dy) grids."""
    h, w = img.shape[:2]
    pad = int(radius) + 3
    x0, x1 = max(0, cx - pad), min(w, cx + pad)
    y0, y1 = max(0, cy - pad), min(h, cy + pad)
    yy, xx = np.ogrid[y0:y1, x0:x1]
    return img[y0:y1, x0:x1], xx - cx, yy - cy


def _fill_disc(img, cx, cy, radius, color):
    view, dx, dy = _disc_window(img, cx, cy, radius)
    view[dx * dx + dy * dy <= radius * radius] = color


def _ring(img, cx, cy, radius, color, thickness=1.0):
    view, dx, dy = _disc_window(img, cx, cy, radius)
    d = np.sqrt(dx * dx + dy * dy)
    view[np.abs(d - radius) <= thickness] = color


def _chord(img, cx, cy, disc_r, offset, color, vertical):
    half = int(math.sqrt(max(0.0, disc_r * disc_r - offset * offset)))
    if vertical:
        x = int(round(cx + offset))
        img[cy - half : cy + half + 1, x] = color
    else:
        y = int(round(cy + offset))
        img[y, cx - half : cx + half + 1] = color


def _square(img, cx, cy, half, color):
    h, w = img.shape[:2]
    y0, y1 = max(0, cy - half), min(h, cy + half + 1)
    x0, x1 = max(0, cx - half), min(w, cx + half + 1)
    if y0 < y1 and x0 < x1:
        img[y0:y1, x0:x1] = color


def marker_pixel(
    proj: MarkerProjection, cx: int, cy: int, disc_radius: int
) -> tuple[int, int]:
    """Disc pixel for a projection (azimuthal-equidistant, +Z up on screen)."""
    sin_b = math.sin(proj.boresight_angle)
    if sin_b < 1e-12:
        return cx, cy
    # Unit direction of the marker in the disc plane: x right, z up.
    dx = math.cos(proj.elevation) * math.sin(proj.azimuth) / sin_b
    dz = math.sin(proj.elevation) / sin_b
    rr = proj.boresight_angle / (math.pi / 2.0) * disc_radius
    return int(round(cx + rr * dx)), int(round(cy - rr * dz))


def render_dashboard(obs: Observation, config: RenderConfig = RenderConfig()) -> DashboardImage:
    """Render one dashboard frame for an observation.

    Layout: text readouts top-left, marker phrase at the bottom, navball
    disc with 3x3 grid chords, near-ring, and the prograde marker (hidden
    when the prograde points behind the vessel).
    """
    w, h = config.width, config.height
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = _BG

    disc_r = int(min(w, h) * 0.33)
    cx, cy = w // 2, h - disc_r - 36

    _fill_disc(img, cx, cy, disc_r, _DISC)
    _ring(img, cx, cy, disc_r, _RIM, 1.4)
    off = disc_r * (config.region_deg / 90.0)
    for o in (-off, off):
        _chord(img, cx, cy, disc_r, o, _GRID, vertical=True)
        _chord(img, cx, cy, disc_r, o, _GRID, vertical=False)
    _ring(img, cx, cy, disc_r * (config.near_deg / 90.0), _GRID, 0.75)
    # Boresight cross.
    img[cy, cx - 3 : cx + 4] = _RIM
    img[cy - 3 : cy + 4, cx] = _RIM

    phrase = NO_PROGRADE_PHRASE
    if obs.prograde is not None:
        proj = project_marker(obs.prograde)
        phrase = describe_marker(proj, config.region_deg, config.near_deg)
        if proj.visible:
            mx, my = marker_pixel(proj, cx, cy, disc_r)
            _square(img, mx, my, 5, _MARKER_EDGE)
            _square(img, mx, my, 4, _MARKER)
            img[my, mx] = _MARKER_EDGE

    ty = 8
    if config.scenario_id:
        fontbits.draw_text(img, 8, ty, f"SCENARIO: {config.scenario_id}", _TEXT)
        ty += 12
    for line in readout_lines(obs, config.target_label):
        fontbits.draw_text(img, 8, ty, line, _TEXT)
        ty += 12
    fontbits.draw_text(img, 8, h - 14, phrase, _TEXT)

    return DashboardImage(
        width=w,
        height=h,
        pixels=img,
        metadata={"scenario": config.scenario_id, "clock": obs.time},
    )
