"""Hierarchical episode dataset: sessions of (image, state, action) frames.

One directory per session holds ``manifest.json`` plus a ``frames/``
subdirectory of PNG assets.  Every frame append is atomic (temp file +
rename, manifest rewritten last), so a crash can orphan an image file but
never leaves a partial frame in the manifest.  Each session carries
exactly one instruction; the shuffled export rebinds it to every frame so
training sees independent (image, state, action, instruction) samples.

States and actions are stored as flat numeric arrays under a named schema
so readers do not need the originating classes.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .actions import DiscreteAction
from .dynamics import VesselState
from .errors import ClosedWriterError, CorruptSessionError, DuplicateSessionError
from .inspection import EffectorState, InspectAction

MANIFEST_NAME = "manifest.json"
FRAMES_DIR = "frames"


# ---------------------------------------------------------------------------
# Flat state/action codecs
# ---------------------------------------------------------------------------

def encode_state(state) -> dict:
    if isinstance(state, EffectorState):
        data = (
            list(state.position)
            + list(state.orientation.reshape(-1))
            + list(state.joint_angles)
            + list(state.efforts)
        )
        return {"schema": "effector/v1", "data": [float(v) for v in data]}
    if isinstance(state, VesselState):
        data = (
            list(state.state.position)
            + list(state.state.velocity)
            + list(state.attitude.reshape(-1))
            + [state.fuel]
        )
        return {"schema": "vessel/v1", "data": [float(v) for v in data]}
    if isinstance(state, dict) and "schema" in state:
        return state
    raise TypeError(f"cannot encode state of type {type(state)!r}")


def decode_state(doc: dict):
    data = doc["data"]
    if doc["schema"] == "effector/v1":
        return EffectorState(
            position=np.array(data[0:3]),
            orientation=np.array(data[3:12]).reshape(3, 3),
            joint_angles=np.array(data[12:19]),
            efforts=np.array(data[19:26]),
        )
    if doc["schema"] == "vessel/v1":
        from .dynamics import StateVector

        return VesselState(
            state=StateVector(np.array(data[0:3]), np.array(data[3:6])),
            attitude=np.array(data[6:15]).reshape(3, 3),
            fuel=data[15],
        )
    raise ValueError(f"unknown state schema {doc['schema']!r}")


def encode_action(action) -> dict:
    if isinstance(action, InspectAction):
        data = list(action.dx) + list(action.dtheta) + [1.0 if action.snap else 0.0]
        return {"schema": "inspect_action/v1", "data": [float(v) for v in data]}
    if isinstance(action, DiscreteAction):
        return {
            "schema": "discrete_action/v1",
            "data": [
                float(action.forward),
                float(action.right),
                float(action.up),
                action.duration,
            ],
        }
    if isinstance(action, dict) and "schema" in action:
        return action
    raise TypeError(f"cannot encode action of type {type(action)!r}")


def decode_action(doc: dict):
    data = doc["data"]
    if doc["schema"] == "inspect_action/v1":
        return InspectAction(
            dx=tuple(data[0:3]), dtheta=tuple(data[3:6]), snap=bool(data[6])
        )
    if doc["schema"] == "discrete_action/v1":
        return DiscreteAction(
            forward=int(data[0]), right=int(data[1]), up=int(data[2]), duration=data[3]
        )
    raise ValueError(f"unknown action schema {doc['schema']!r}")


# ---------------------------------------------------------------------------
# Session records
# ---------------------------------------------------------------------------

@dataclass
class FrameRecord:
    index: int
    image: str  # path relative to the session directory
    state: dict
    action: dict
    depth: str | None = None

    def to_dict(self) -> dict:
        doc = {
            "index": self.index,
            "image": self.image,
            "state": self.state,
            "action": self.action,
        }
        if self.depth is not None:
            doc["depth"] = self.depth
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FrameRecord":
        return cls(
            index=doc["index"],
            image=doc["image"],
            state=doc["state"],
            action=doc["action"],
            depth=doc.get("depth"),
        )


@dataclass
class EpisodeSession:
    session_id: str
    instruction: str
    source: str  # teleop | scripted | agent
    created_at: str
    frames: list[FrameRecord]
    path: Path

    def read_image(self, record: FrameRecord) -> bytes:
        return (self.path / record.image).read_bytes()

    def read_depth(self, record: FrameRecord) -> bytes | None:
        if record.depth is None:
            return None
        return (self.path / record.depth).read_bytes()


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class SessionWriter:
    """Single-writer append handle for one session directory."""

    def __init__(self, path: Path, instruction: str, source: str, session_id: str):
        self.path = path
        self.session_id = session_id
        self.instruction = instruction
        self.source = source
        self.created_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        self.frames: list[FrameRecord] = []
        self._closed = False
        (path / FRAMES_DIR).mkdir(parents=True)
        self._write_manifest()

    def _write_manifest(self):
        doc = {
            "id": self.session_id,
            "instruction": self.instruction,
            "source": self.source,
            "created_at": self.created_at,
            "frames": [f.to_dict() for f in self.frames],
        }
        _atomic_write(
            self.path / MANIFEST_NAME, json.dumps(doc, indent=2).encode()
        )

    def set_instruction(self, text: str):
        """Replace the session instruction (teleop sets it mid-session)."""
        if self._closed:
            raise ClosedWriterError("writer already closed")
        self.instruction = text
        self._write_manifest()

    def append_frame(self, image: bytes, state, action, depth: bytes | None = None) -> int:
        """Persist one frame atomically; returns its index."""
        if self._closed:
            raise ClosedWriterError("writer already closed")
        index = len(self.frames)
        image_rel = f"{FRAMES_DIR}/{index:06d}.png"
        _atomic_write(self.path / image_rel, image)
        depth_rel = None
        if depth is not None:
            depth_rel = f"{FRAMES_DIR}/{index:06d}_depth.png"
            _atomic_write(self.path / depth_rel, depth)
        record = FrameRecord(
            index=index,
            image=image_rel,
            state=encode_state(state),
            action=encode_action(action),
            depth=depth_rel,
        )
        # The manifest is rewritten only after the assets are in place, so
        # an interruption above leaves no partial frame behind.
        self.frames.append(record)
        self._write_manifest()
        return index

    def close(self) -> EpisodeSession:
        if self._closed:
            raise ClosedWriterError("writer already closed")
        self._closed = True
        self._write_manifest()
        return read_session(self.path)


def open_session(
    root, instruction: str, source: str, session_id: str | None = None
) -> SessionWriter:
    """Create a new session directory under ``root`` and return its writer.

    Without an explicit id, sessions are numbered by a monotone counter
    over the existing directories.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if session_id is None:
        taken = [
            int(p.name) for p in root.iterdir() if p.is_dir() and p.name.isdigit()
        ]
        session_id = f"{(max(taken) + 1 if taken else 0):04d}"
    path = root / session_id
    if path.exists():
        raise DuplicateSessionError(f"session {session_id!r} already exists")
    return SessionWriter(path, instruction, source, session_id)


def read_session(path) -> EpisodeSession:
    """Load a session, verifying manifest/asset agreement."""
    path = Path(path)
    manifest = path / MANIFEST_NAME
    if not manifest.exists():
        raise CorruptSessionError(f"no manifest in {path}")
    doc = json.loads(manifest.read_text())
    frames = [FrameRecord.from_dict(f) for f in doc.get("frames", [])]
    for expect, record in enumerate(frames):
        if record.index != expect:
            raise CorruptSessionError(
                f"frame indices not contiguous at {record.index} (expected {expect})"
            )
        if not (path / record.image).exists():
            raise CorruptSessionError(f"missing frame asset {record.image}")
        if record.depth is not None and not (path / record.depth).exists():
            raise CorruptSessionError(f"missing depth asset {record.depth}")
    return EpisodeSession(
        session_id=doc["id"],
        instruction=doc["instruction"],
        source=doc["source"],
        created_at=doc.get("created_at", ""),
        frames=frames,
        path=path,
    )


def shuffled_export(
    session_path, seed: int
) -> Iterator[tuple[bytes, dict, dict, str]]:
    """Yield every frame once, in a seed-determined order.

    Items are (image bytes, state doc, action doc, instruction); the
    per-frame bindings are preserved, only the order changes.
    """
    session = read_session(session_path)
    order = np.random.default_rng(seed).permutation(len(session.frames))
    for i in order:
        record = session.frames[int(i)]
        yield (
            session.read_image(record),
            record.state,
            record.action,
            session.instruction,
        )


def split_sessions(root, seed: int, train_frac: float = 0.9) -> dict:
    """Deterministic session-level train/validation split.

    Writes ``split.json`` under ``root`` and returns the mapping.  The
    validation side always gets at least one session when there are two
    or more.
    """
    root = Path(root)
    ids = sorted(
        p.name for p in root.iterdir() if p.is_dir() and (p / MANIFEST_NAME).exists()
    )
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[int(i)] for i in order]
    n_train = math.floor(len(ids) * train_frac)
    if len(ids) >= 2:
        n_train = min(n_train, len(ids) - 1)
    split = {"train": sorted(shuffled[:n_train]), "val": sorted(shuffled[n_train:])}
    _atomic_write(root / "split.json", json.dumps(split, indent=2).encode())
    return split
