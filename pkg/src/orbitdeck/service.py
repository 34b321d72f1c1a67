"""Local teleoperation service over HTTP + WebSocket.

Endpoints:

    GET /state   -- current pose, timestep and session counters as JSON.
    WS  /stream  -- the control channel.  The client sends
                    {"type":"jog","dx":[x,y,z],"dtheta":[rx,ry,rz]},
                    {"type":"snapshot"}, {"type":"instruction","text":...}
                    or {"type":"finish"}; after every applied action the
                    server pushes {"type":"frame","png_base64":...,
                    "depth_png_base64":...,"pose":...,"t":...}.  Malformed
                    or out-of-cap messages get {"type":"error","detail"}
                    and leave the state unchanged.

Actions are applied strictly one at a time and only one controller may be
connected; a second connection is turned away with an error.  With a
recording root configured, every applied action appends one
(image, state, action) frame to an episode session; snapshot actions
additionally burn the pose annotation into the image.
"""

from __future__ import annotations

import base64
import threading
from dataclasses import dataclass

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .episodes import SessionWriter, open_session
from .inspection import (
    CameraConfig,
    InspectAction,
    InspectScene,
    WorkspaceLimits,
    apply_inspect_action,
    default_effector_state,
    default_scene,
    render_rgbd,
)


class TeleopService:
    """Holds the effector, the scene and the (optional) session writer."""

    def __init__(
        self,
        scene: InspectScene | None = None,
        limits: WorkspaceLimits = WorkspaceLimits(),
        camera: CameraConfig = CameraConfig(),
        record_root=None,
        instruction: str = "",
        session_id: str | None = None,
    ):
        self.scene = scene if scene is not None else default_scene()
        self.limits = limits
        self.camera = camera
        self.state = default_effector_state()
        self.t = 0
        self.writer: SessionWriter | None = None
        if record_root is not None:
            self.writer = open_session(
                record_root, instruction, "teleop", session_id=session_id
            )
        self._lock = threading.Lock()
        self.controller_attached = False

    @property
    def frames_recorded(self) -> int:
        return len(self.writer.frames) if self.writer else self.t

    def state_doc(self) -> dict:
        return {
            "position": self.state.position.tolist(),
            "orientation": self.state.orientation.tolist(),
            "joint_angles": self.state.joint_angles.tolist(),
            "efforts": self.state.efforts.tolist(),
            "t": self.t,
            "frames_recorded": self.frames_recorded,
            "recording": self.writer is not None,
            "instruction": self.writer.instruction if self.writer else None,
        }

    def _pose_doc(self) -> dict:
        return {
            "position": self.state.position.tolist(),
            "orientation": self.state.orientation.tolist(),
            "joint_angles": self.state.joint_angles.tolist(),
        }

    def validate_jog(self, dx, dtheta) -> str | None:
        """Cap check for client jogs; returns an error string or None."""
        if len(dx) != 3 or len(dtheta) != 3:
            return "dx and dtheta must be 3-vectors"
        norm = lambda v: sum(float(c) ** 2 for c in v) ** 0.5  # noqa: E731
        if norm(dx) > self.limits.dx_max + 1e-12:
            return f"|dx| exceeds per-step cap {self.limits.dx_max} m"
        if norm(dtheta) > self.limits.dtheta_max + 1e-12:
            return f"|dtheta| exceeds per-step cap {self.limits.dtheta_max} rad"
        return None

    def apply(self, action: InspectAction) -> dict:
        """Apply one action and build the frame message to push."""
        with self._lock:
            self.t += 1
            outcome = apply_inspect_action(
                self.state,
                action,
                self.limits,
                scene=self.scene,
                camera=self.camera,
                timestep=self.t,
            )
            self.state = outcome.state
            frame = outcome.frame
            if frame is None:
                frame = render_rgbd(self.scene, self.state, self.camera)
                frame.timestep = self.t
            rgb_png = frame.rgb_png()
            depth_png = frame.depth_png()
            if self.writer is not None:
                self.writer.append_frame(rgb_png, self.state, action, depth=depth_png)
            return {
                "type": "frame",
                "png_base64": base64.b64encode(rgb_png).decode("ascii"),
                "depth_png_base64": base64.b64encode(depth_png).decode("ascii"),
                "pose": self._pose_doc(),
                "t": self.t,
            }

    def set_instruction(self, text: str):
        if self.writer is not None:
            self.writer.set_instruction(text)

    def finish(self):
        if self.writer is not None:
            self.writer.close()
            self.writer = None


def _error(detail: str) -> dict:
    return {"type": "error", "detail": detail}


def create_app(service: TeleopService | None = None) -> FastAPI:
    service = service if service is not None else TeleopService()
    app = FastAPI(title="orbitdeck teleop")
    app.state.service = service

    @app.get("/state")
    def get_state():
        return service.state_doc()

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        if service.controller_attached:
            await ws.send_json(_error("another controller is connected"))
            await ws.close(code=1013)
            return
        service.controller_attached = True
        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except WebSocketDisconnect:
                    return
                except Exception:
                    await ws.send_json(_error("messages must be JSON objects"))
                    continue
                if not isinstance(msg, dict) or "type" not in msg:
                    await ws.send_json(_error("missing message type"))
                    continue
                kind = msg["type"]
                if kind == "jog":
                    dx = msg.get("dx", [0.0, 0.0, 0.0])
                    dtheta = msg.get("dtheta", [0.0, 0.0, 0.0])
                    problem = service.validate_jog(dx, dtheta)
                    if problem is not None:
                        await ws.send_json(_error(problem))
                        continue
                    reply = service.apply(
                        InspectAction(dx=tuple(dx), dtheta=tuple(dtheta))
                    )
                    await ws.send_json(reply)
                elif kind == "snapshot":
                    reply = service.apply(InspectAction(snap=True))
                    await ws.send_json(reply)
                elif kind == "instruction":
                    text = msg.get("text")
                    if not isinstance(text, str):
                        await ws.send_json(_error("instruction needs text"))
                        continue
                    service.set_instruction(text)
                elif kind == "finish":
                    service.finish()
                    await ws.close()
                    return
                else:
                    await ws.send_json(_error(f"unknown message type {kind!r}"))
        finally:
            service.controller_attached = False

    return app


def serve(host: str, port: int, service: TeleopService | None = None):
    """Run the teleop service until interrupted (blocking)."""
    import uvicorn

    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")
