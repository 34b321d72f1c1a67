"""Simulated 6-DOF end-effector with an RGBD camera for hardware inspection.

The effector steps through (dx, dtheta, snap) actions: a positional change
clamped to the workspace box, a body-frame axis-angle rotation, and a flag
requesting an annotated capture.  Motion applies first, so a captured
frame always reflects the post-move pose.  Rendering is a vectorized
pinhole raycast over flat-shaded boxes and spheres, with per-pixel depth
measured along the camera axis (background encoded as depth 0), and is a
pure function of the pose so frames are byte-deterministic.

Joint angles come from a fixed analytic stub and are recorded for dataset
fidelity only; control happens in Cartesian space.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from . import fontbits
from .dynamics import rotation_about_axis, vec3


@dataclass(frozen=True)
class WorkspaceLimits:
    """Axis-aligned workspace box and per-step motion caps."""

    box_min: tuple[float, float, float] = (-0.9, -0.9, 0.0)
    box_max: tuple[float, float, float] = (0.9, 0.9, 1.2)
    dx_max: float = 0.05  # m per step
    dtheta_max: float = 0.0873  # rad per step (5 degrees)


@dataclass(frozen=True)
class CameraConfig:
    width: int = 320
    height: int = 240
    hfov_deg: float = 60.0


@dataclass
class EffectorState:
    """Camera pose in the workspace frame plus informational arm readouts."""

    position: np.ndarray
    orientation: np.ndarray  # camera frame -> workspace, columns right/down/forward
    joint_angles: np.ndarray = field(default_factory=lambda: np.zeros(7))
    efforts: np.ndarray = field(default_factory=lambda: np.zeros(7))

    def copy(self) -> "EffectorState":
        return EffectorState(
            self.position.copy(),
            self.orientation.copy(),
            self.joint_angles.copy(),
            self.efforts.copy(),
        )

    @property
    def forward(self) -> np.ndarray:
        """Camera viewing direction in the workspace frame."""
        return self.orientation[:, 2]


@dataclass(frozen=True)
class InspectAction:
    """One control step: translation, body-frame rotation, capture flag."""

    dx: tuple[float, float, float] = (0.0, 0.0, 0.0)
    dtheta: tuple[float, float, float] = (0.0, 0.0, 0.0)
    snap: bool = False


@dataclass
class InspectFrame:
    """One rendered RGBD frame and the pose it was taken from."""

    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float32 meters, 0 = background
    position: np.ndarray
    orientation: np.ndarray
    timestep: int = 0
    annotation: str | None = None

    def rgb_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.rgb, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def depth_png(self) -> bytes:
        """16-bit grayscale PNG, millimeter-quantized."""
        mm = np.clip(np.round(self.depth * 1000.0), 0, 65535).astype(np.uint16)
        buf = io.BytesIO()
        Image.fromarray(mm).save(buf, format="PNG")
        return buf.getvalue()


@dataclass(frozen=True)
class Box:
    center: tuple[float, float, float]
    size: tuple[float, float, float]  # full extents
    color: tuple[int, int, int] = (180, 180, 190)
    label: str = ""


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    color: tuple[int, int, int] = (200, 170, 60)
    label: str = ""


@dataclass(frozen=True)
class InspectionPoint:
    """A surface point with capture-quality requirements."""

    point: tuple[float, float, float]
    max_distance: float
    max_view_angle: float  # rad between camera axis and the line of sight


@dataclass
class InspectScene:
    primitives: list = field(default_factory=list)
    inspection_points: list[InspectionPoint] = field(default_factory=list)

    def to_dict(self) -> dict:
        prims = []
        for p in self.primitives:
            if isinstance(p, Box):
                prims.append(
                    {"kind": "box", "center": list(p.center), "size": list(p.size),
                     "color": list(p.color), "label": p.label}
                )
            else:
                prims.append(
                    {"kind": "sphere", "center": list(p.center), "radius": p.radius,
                     "color": list(p.color), "label": p.label}
                )
        points = [
            {"point": list(ip.point), "max_distance": ip.max_distance,
             "max_view_angle_deg": math.degrees(ip.max_view_angle)}
            for ip in self.inspection_points
        ]
        return {"primitives": prims, "inspection_points": points}

    @classmethod
    def from_dict(cls, doc: dict) -> "InspectScene":
        prims = []
        for p in doc.get("primitives", []):
            common = {
                "center": tuple(p["center"]),
                "color": tuple(p.get("color", (180, 180, 190))),
                "label": p.get("label", ""),
            }
            if p["kind"] == "box":
                prims.append(Box(size=tuple(p["size"]), **common))
            elif p["kind"] == "sphere":
                prims.append(Sphere(radius=p["radius"], **common))
            else:
                raise ValueError(f"unknown primitive kind {p['kind']!r}")
        points = [
            InspectionPoint(
                point=tuple(ip["point"]),
                max_distance=ip["max_distance"],
                max_view_angle=math.radians(ip["max_view_angle_deg"]),
            )
            for ip in doc.get("inspection_points", [])
        ]
        return cls(primitives=prims, inspection_points=points)


def look_rotation(forward, world_up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera->workspace rotation looking along ``forward`` (+Z forward,
    +X right, +Y down)."""
    fwd = np.asarray(forward, dtype=np.float64)
    fwd = fwd / np.linalg.norm(fwd)
    up = np.asarray(world_up, dtype=np.float64)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(fwd, (0.0, 1.0, 0.0))
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.column_stack([right, down, fwd])


def default_effector_state() -> EffectorState:
    """Start pose: backed off from the scene, looking at it along +Y."""
    position = vec3(0.0, -0.7, 0.45)
    orientation = look_rotation((0.0, 1.0, 0.0))
    state = EffectorState(position=position, orientation=orientation)
    state.joint_angles = ik_stub(position, orientation)
    return state


def default_scene() -> InspectScene:
    """Satellite mock: bus body, two panels, an antenna dome."""
    return InspectScene(
        primitives=[
            Box(center=(0.0, 0.2, 0.45), size=(0.5, 0.3, 0.3),
                color=(168, 172, 184), label="bus"),
            Box(center=(-0.55, 0.2, 0.45), size=(0.5, 0.02, 0.25),
                color=(48, 64, 120), label="panel_left"),
            Box(center=(0.55, 0.2, 0.45), size=(0.5, 0.02, 0.25),
                color=(48, 64, 120), label="panel_right"),
            Sphere(center=(0.0, 0.2, 0.72), radius=0.07,
                   color=(210, 180, 70), label="antenna"),
        ],
        inspection_points=[
            InspectionPoint((0.0, 0.05, 0.45), 1.0, math.radians(30.0)),
            InspectionPoint((0.0, 0.2, 0.6), 1.0, math.radians(35.0)),
            InspectionPoint((-0.55, 0.19, 0.45), 1.0, math.radians(30.0)),
            InspectionPoint((0.0, 0.13, 0.72), 0.9, math.radians(30.0)),
        ],
    )


def ik_stub(position: np.ndarray, orientation: np.ndarray) -> np.ndarray:
    """Fixed analytic 7-angle placeholder for dataset fidelity.

    Shoulder yaw/pitch and a two-link elbow angle from the position,
    wrist ZYX Euler angles from the orientation, and a constant last
    joint.  Not a real arm model; never used for control.
    """
    x, y, z = position
    reach = float(np.linalg.norm(position))
    yaw = math.atan2(y, x)
    pitch = math.atan2(z, math.hypot(x, y)) if reach > 0 else 0.0
    # Elbow of a symmetric two-link arm with 0.8 m links.
    elbow = math.pi - 2.0 * math.asin(min(1.0, reach / 1.6))
    r = orientation
    wrist_y = math.atan2(-r[2, 0], math.hypot(r[0, 0], r[1, 0]))
    wrist_z = math.atan2(r[1, 0], r[0, 0])
    wrist_x = math.atan2(r[2, 1], r[2, 2])
    return np.array([yaw, pitch, elbow, wrist_z, wrist_y, wrist_x, 0.0])


def _orthonormalize(rot: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rot)
    return u @ vt


def _clamp_norm(v: np.ndarray, cap: float) -> tuple[np.ndarray, bool]:
    n = float(np.linalg.norm(v))
    if n <= cap or n == 0.0:
        return v, False
    return v * (cap / n), True


@dataclass
class StepOutcome:
    """apply_inspect_action result: new state, optional capture, flags."""

    state: EffectorState
    frame: InspectFrame | None
    action_clamped: bool = False
    workspace_clamped: bool = False


def apply_inspect_action(
    state: EffectorState,
    action: InspectAction,
    limits: WorkspaceLimits = WorkspaceLimits(),
    scene: InspectScene | None = None,
    camera: CameraConfig = CameraConfig(),
    timestep: int = 0,
) -> StepOutcome:
    """Apply one action; capture a frame after the move when requested.

    Over-cap translations/rotations are scaled down to the cap and
    flagged; positions are clamped to the workspace box and flagged as an
    escape attempt.  A zero action is an exact no-op.  No frame is
    allocated unless ``snap`` is set.
    """
    new = state.copy()
    dx, dx_clamped = _clamp_norm(np.asarray(action.dx, dtype=np.float64), limits.dx_max)
    dtheta, dth_clamped = _clamp_norm(
        np.asarray(action.dtheta, dtype=np.float64), limits.dtheta_max
    )

    workspace_clamped = False
    if np.any(dx != 0.0):
        raw = new.position + dx
        clamped = np.minimum(
            np.maximum(raw, np.asarray(limits.box_min)), np.asarray(limits.box_max)
        )
        workspace_clamped = bool(np.any(clamped != raw))
        new.position = clamped
    if np.any(dtheta != 0.0):
        angle = float(np.linalg.norm(dtheta))
        new.orientation = _orthonormalize(
            new.orientation @ rotation_about_axis(dtheta, angle)
        )
    new.joint_angles = ik_stub(new.position, new.orientation)

    frame = None
    if action.snap:
        frame = render_rgbd(scene or InspectScene(), new, camera)
        frame.timestep = timestep
        x, y, z = new.position
        frame.annotation = f"T={timestep} POS=({x:.2f},{y:.2f},{z:.2f})"
        fontbits.draw_text(frame.rgb, 4, 4, frame.annotation, (255, 255, 255))

    return StepOutcome(
        state=new,
        frame=frame,
        action_clamped=dx_clamped or dth_clamped,
        workspace_clamped=workspace_clamped,
    )


_BACKGROUND = (12, 12, 18)
# Per-face brightness by dominant normal axis, to make box edges readable.
_FACE_SHADE = (1.0, 0.84, 0.68)


def render_rgbd(
    scene: InspectScene,
    state: EffectorState,
    camera: CameraConfig = CameraConfig(),
) -> InspectFrame:
    """Raycast the scene from the effector camera.

    Pinhole projection with the configured horizontal FOV; depth is the
    distance along the camera +Z axis in meters, with +inf (no hit)
    encoded as 0.  Nearest-hit compositing plays the role of a depth
    buffer.
    """
    w, h = camera.width, camera.height
    focal = (w / 2.0) / math.tan(math.radians(camera.hfov_deg) / 2.0)
    us = (np.arange(w) + 0.5 - w / 2.0) / focal
    vs = (np.arange(h) + 0.5 - h / 2.0) / focal
    # Camera-frame directions with unit +Z so the ray parameter equals the
    # depth along the camera axis.
    dirs_cam = np.stack(
        [np.broadcast_to(us, (h, w)),
         np.broadcast_to(vs[:, None], (h, w)),
         np.ones((h, w))],
        axis=-1,
    )
    dirs = dirs_cam @ state.orientation.T  # world-frame directions
    origin = state.position

    depth = np.full((h, w), np.inf)
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[:] = _BACKGROUND

    for prim in scene.primitives:
        if isinstance(prim, Box):
            t_hit, face_axis = _ray_box(origin, dirs, prim)
            hit = np.isfinite(t_hit) & (t_hit < depth)
            if not hit.any():
                continue
            depth[hit] = t_hit[hit]
            base = np.asarray(prim.color, dtype=np.float64)
            for axis in range(3):
                m = hit & (face_axis == axis)
                rgb[m] = (base * _FACE_SHADE[axis]).astype(np.uint8)
        else:
            t_hit = _ray_sphere(origin, dirs, prim)
            hit = np.isfinite(t_hit) & (t_hit < depth)
            if hit.any():
                depth[hit] = t_hit[hit]
                rgb[hit] = prim.color

    out_depth = np.where(np.isfinite(depth), depth, 0.0).astype(np.float32)
    return InspectFrame(
        rgb=rgb,
        depth=out_depth,
        position=state.position.copy(),
        orientation=state.orientation.copy(),
    )


def _ray_box(origin, dirs, box: Box):
    lo = np.asarray(box.center) - np.asarray(box.size) / 2.0
    hi = np.asarray(box.center) + np.asarray(box.size) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - origin) / dirs
        t2 = (hi - origin) / dirs
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    # Parallel rays outside a slab never hit it.
    parallel = dirs == 0.0
    outside = (origin < lo) | (origin > hi)
    tmin = np.where(parallel & outside, np.inf, np.nan_to_num(tmin, nan=-np.inf))
    tmax = np.where(parallel & outside, -np.inf, np.nan_to_num(tmax, nan=np.inf))
    tnear = tmin.max(axis=-1)
    tfar = tmax.min(axis=-1)
    hit = (tnear <= tfar) & (tnear > 1e-9)
    face_axis = tmin.argmax(axis=-1)
    return np.where(hit, tnear, np.inf), face_axis


def _ray_sphere(origin, dirs, sphere: Sphere):
    oc = origin - np.asarray(sphere.center)
    a = np.einsum("...i,...i->...", dirs, dirs)
    b = 2.0 * (dirs @ oc)
    c = float(oc @ oc) - sphere.radius**2
    disc = b * b - 4.0 * a * c
    with np.errstate(invalid="ignore"):
        t = (-b - np.sqrt(disc)) / (2.0 * a)
    return np.where((disc >= 0.0) & (t > 1e-9), t, np.inf)


def coverage(scene: InspectScene, snapshots: list[InspectFrame]) -> float:
    """Fraction of inspection points satisfied by at least one snapshot.

    A snapshot satisfies a point when it was taken within the point's
    distance budget and the camera axis deviates from the line of sight
    by no more than the view-angle budget.
    """
    points = scene.inspection_points
    if not points:
        return 1.0
    satisfied = 0
    for ip in points:
        target = np.asarray(ip.point, dtype=np.float64)
        for frame in snapshots:
            offset = target - frame.position
            dist = float(np.linalg.norm(offset))
            if dist > ip.max_distance or dist == 0.0:
                continue
            fwd = frame.orientation[:, 2]
            cosang = float(np.dot(fwd, offset / dist))
            if math.acos(max(-1.0, min(1.0, cosang))) <= ip.max_view_angle:
                satisfied += 1
                break
    return satisfied / len(points)
