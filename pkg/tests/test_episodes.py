"""Episode store: round trips, atomicity, shuffled export, splits."""

import json
import os

import numpy as np
import pytest

from orbitdeck.actions import DiscreteAction
from orbitdeck.dynamics import circular_orbit, orbit_frame, VesselState
from orbitdeck.episodes import (
    decode_action,
    decode_state,
    encode_action,
    encode_state,
    open_session,
    read_session,
    shuffled_export,
    split_sessions,
)
from orbitdeck.errors import (
    ClosedWriterError,
    CorruptSessionError,
    DuplicateSessionError,
)
from orbitdeck.inspection import (
    EffectorState,
    InspectAction,
    default_effector_state,
)

PNG_STUB = b"\x89PNG\r\n\x1a\n-stub-"


def frame_args(i=0):
    state = default_effector_state()
    state.position = state.position + np.array([0.01 * i, 0, 0])
    action = InspectAction(dx=(0.01, 0, 0), snap=(i % 2 == 0))
    return PNG_STUB + bytes([i]), state, action


class TestWriteRead:
    def test_empty_session_round_trip(self, tmp_path):
        writer = open_session(tmp_path, "inspect the bus", "teleop")
        session = writer.close()
        assert session.instruction == "inspect the bus"
        assert session.source == "teleop"
        assert session.frames == []

    def test_manifest_carries_instruction_verbatim(self, tmp_path):
        text = "Look at the  left panel, then the antenna."
        open_session(tmp_path, text, "teleop").close()
        manifest = json.loads((tmp_path / "0000" / "manifest.json").read_text())
        assert manifest["instruction"] == text

    def test_duplicate_session_rejected(self, tmp_path):
        open_session(tmp_path, "a", "teleop", session_id="run1")
        with pytest.raises(DuplicateSessionError):
            open_session(tmp_path, "b", "teleop", session_id="run1")

    def test_monotone_counter_ids(self, tmp_path):
        ids = [open_session(tmp_path, "x", "scripted").session_id for _ in range(3)]
        assert ids == ["0000", "0001", "0002"]

    def test_append_indices_contiguous(self, tmp_path):
        writer = open_session(tmp_path, "x", "scripted")
        indices = [writer.append_frame(*frame_args(i)) for i in range(3)]
        assert indices == [0, 1, 2]

    def test_image_bytes_round_trip(self, tmp_path):
        writer = open_session(tmp_path, "x", "scripted")
        image, state, action = frame_args(5)
        writer.append_frame(image, state, action)
        session = writer.close()
        assert session.read_image(session.frames[0]) == image

    def test_state_action_round_trip(self, tmp_path):
        writer = open_session(tmp_path, "x", "scripted")
        _, state, action = frame_args(1)
        writer.append_frame(PNG_STUB, state, action)
        session = writer.close()
        back_state = decode_state(session.frames[0].state)
        back_action = decode_action(session.frames[0].action)
        np.testing.assert_allclose(back_state.position, state.position)
        np.testing.assert_allclose(back_state.orientation, state.orientation)
        assert back_action == action

    def test_closed_writer_rejected(self, tmp_path):
        writer = open_session(tmp_path, "x", "scripted")
        writer.close()
        with pytest.raises(ClosedWriterError):
            writer.append_frame(*frame_args())

    def test_depth_asset_round_trip(self, tmp_path):
        writer = open_session(tmp_path, "x", "teleop")
        writer.append_frame(PNG_STUB, *frame_args()[1:], depth=b"depth-bytes")
        session = writer.close()
        assert session.read_depth(session.frames[0]) == b"depth-bytes"

    def test_vessel_state_schema(self):
        state = circular_orbit(1.35e6)
        vessel = VesselState(state=state, attitude=orbit_frame(state), fuel=80.0)
        doc = encode_state(vessel)
        assert doc["schema"] == "vessel/v1"
        back = decode_state(doc)
        np.testing.assert_allclose(back.state.position, state.position)
        assert back.fuel == 80.0
        action_doc = encode_action(DiscreteAction(1, 0, -1, duration=2.0))
        assert decode_action(action_doc) == DiscreteAction(1, 0, -1, duration=2.0)


class TestAtomicity:
    def test_crash_between_asset_and_manifest(self, tmp_path, monkeypatch):
        writer = open_session(tmp_path, "x", "teleop")
        writer.append_frame(*frame_args(0))

        # Simulate a crash after the image lands but before the manifest
        # is rewritten: the manifest must still describe only frame 0.
        real_write = writer._write_manifest

        def boom():
            raise RuntimeError("power loss")

        monkeypatch.setattr(writer, "_write_manifest", boom)
        with pytest.raises(RuntimeError):
            writer.append_frame(*frame_args(1))
        monkeypatch.setattr(writer, "_write_manifest", real_write)

        session = read_session(writer.path)
        assert len(session.frames) == 1
        assert session.frames[0].index == 0

    def test_no_temp_files_left_behind(self, tmp_path):
        writer = open_session(tmp_path, "x", "teleop")
        for i in range(4):
            writer.append_frame(*frame_args(i))
        leftovers = [p for p in writer.path.rglob(".tmp-*")]
        assert leftovers == []

    def test_missing_asset_detected(self, tmp_path):
        writer = open_session(tmp_path, "x", "teleop")
        writer.append_frame(*frame_args(0))
        os.unlink(writer.path / writer.frames[0].image)
        with pytest.raises(CorruptSessionError):
            read_session(writer.path)

    def test_non_contiguous_indices_detected(self, tmp_path):
        writer = open_session(tmp_path, "x", "teleop")
        writer.append_frame(*frame_args(0))
        manifest = writer.path / "manifest.json"
        doc = json.loads(manifest.read_text())
        doc["frames"][0]["index"] = 3
        manifest.write_text(json.dumps(doc))
        with pytest.raises(CorruptSessionError):
            read_session(writer.path)


class TestShuffledExport:
    def write_session(self, tmp_path, n=10):
        writer = open_session(tmp_path, "shuffle me", "scripted")
        for i in range(n):
            writer.append_frame(*frame_args(i))
        writer.close()
        return writer.path

    def test_permutation_covers_all_frames(self, tmp_path):
        path = self.write_session(tmp_path)
        items = list(shuffled_export(path, seed=1))
        assert len(items) == 10
        images = {img for img, *_ in items}
        assert len(images) == 10

    def test_same_seed_same_order(self, tmp_path):
        path = self.write_session(tmp_path)
        a = [img for img, *_ in shuffled_export(path, seed=42)]
        b = [img for img, *_ in shuffled_export(path, seed=42)]
        assert a == b

    def test_seeds_1_and_2_differ(self, tmp_path):
        # Pinned after checking: these two permutations of 10 items differ.
        path = self.write_session(tmp_path)
        a = [img for img, *_ in shuffled_export(path, seed=1)]
        b = [img for img, *_ in shuffled_export(path, seed=2)]
        assert a != b

    def test_bindings_preserved(self, tmp_path):
        path = self.write_session(tmp_path)
        session = read_session(path)
        by_image = {
            session.read_image(f): (f.state, f.action) for f in session.frames
        }
        for img, state, action, instruction in shuffled_export(path, seed=3):
            want_state, want_action = by_image[img]
            assert state == want_state
            assert action == want_action
            assert instruction == "shuffle me"


class TestSplit:
    def test_deterministic_90_10(self, tmp_path):
        for _ in range(10):
            open_session(tmp_path, "x", "scripted").close()
        a = split_sessions(tmp_path, seed=5)
        b = split_sessions(tmp_path, seed=5)
        assert a == b
        assert len(a["train"]) == 9 and len(a["val"]) == 1
        assert sorted(a["train"] + a["val"]) == [f"{i:04d}" for i in range(10)]
        assert json.loads((tmp_path / "split.json").read_text()) == a

    def test_small_set_keeps_validation_nonempty(self, tmp_path):
        for _ in range(2):
            open_session(tmp_path, "x", "scripted").close()
        split = split_sessions(tmp_path, seed=0)
        assert len(split["val"]) >= 1
