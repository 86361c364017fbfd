"""Session service: framing, protocol state machine, and TCP transport."""
from __future__ import annotations

import socket
import threading

import numpy as np
import pytest

from meshtear import shapes
from meshtear.errors import ParseError
from meshtear.harness import straight_stroke
from meshtear.mesh import MeshDelta, TriMesh, load_mesh, save_mesh
from meshtear.service import (Session, SessionServer, canonical_mesh_hash,
                              encode_frame, read_frame)


def _sphere_obj(level=3):
    m = shapes.icosphere(level)
    obj, _ = save_mesh(m)
    return obj.decode("utf-8"), m


def _loaded_session(level=3, params=None):
    session = Session(params=params)
    obj, mesh = _sphere_obj(level)
    replies = session.handle({"type": "LoadMesh", "obj": obj})
    return session, replies[0], mesh


def _stroke_messages(mesh, n_segments=3):
    times, tips, ends = straight_stroke(mesh, n_segments=n_segments)
    return [{"type": "ScalpelSample", "t_ms": float(t),
             "tip": tip.tolist(), "end": end.tolist()}
            for t, tip, end in zip(times, tips, ends)]


def _client_mesh(snapshot):
    """Rebuild the mesh a client would hold from a MeshLoaded snapshot."""
    positions = np.asarray(snapshot["positions"]).reshape(-1, 3)
    faces = np.asarray(snapshot["all_faces"], dtype=np.int64).reshape(-1, 3)
    m = TriMesh(positions, faces, validate=False)
    m.face_alive[snapshot["dead_face_ids"]] = False
    m.epoch = snapshot["epoch"]
    return m


class TestCanonicalHash:
    def test_equal_meshes_equal_hash(self):
        a = shapes.icosphere(2)
        b = shapes.icosphere(2)
        assert canonical_mesh_hash(a) == canonical_mesh_hash(b)

    def test_geometry_change_changes_hash(self):
        a = shapes.icosphere(2)
        b = shapes.icosphere(2)
        b.positions[0] += 1e-9
        assert canonical_mesh_hash(a) != canonical_mesh_hash(b)

    def test_invariant_under_save_load_compaction(self):
        m = shapes.icosphere(2)
        m.face_alive[:7] = False
        obj, _ = save_mesh(m)
        again = load_mesh(obj)
        assert canonical_mesh_hash(m) == canonical_mesh_hash(again)


class TestFraming:
    def test_roundtrip_over_socketpair(self):
        a, b = socket.socketpair()
        try:
            msg = {"type": "StepSim", "steps": 3}
            a.sendall(encode_frame(msg))
            assert read_frame(b) == msg
            a.close()
            assert read_frame(b) is None  # clean EOF
        finally:
            b.close()

    def test_oversized_frame_rejected(self):
        a, b = socket.socketpair()
        try:
            a.sendall(b"\xff\xff\xff\xff")
            with pytest.raises(ParseError):
                read_frame(b)
        finally:
            a.close()
            b.close()


class TestSessionBasics:
    def test_load_mesh_snapshot(self):
        session, snapshot, mesh = _loaded_session(level=2)
        assert snapshot["type"] == "MeshLoaded"
        assert snapshot["vertices"] == len(mesh.positions)
        assert snapshot["faces"] == len(mesh.faces)
        assert snapshot["hash"] == canonical_mesh_hash(session.mesh)
        assert len(snapshot["particles"]["centers"]) == \
            3 * session.system.count

    def test_message_before_load_rejected(self):
        with pytest.raises(ParseError):
            Session().handle({"type": "StepSim"})

    def test_unknown_type_rejected(self):
        session, _, _ = _loaded_session(level=1)
        with pytest.raises(ParseError):
            session.handle({"type": "Stab"})

    def test_unknown_param_rejected(self):
        session, _, _ = _loaded_session(level=1)
        with pytest.raises(ParseError):
            session.handle({"type": "SetParams", "turbo": True})

    def test_rest_state_step_is_fixed_point(self):
        session, _, _ = _loaded_session(level=2)
        frame = session.handle({"type": "StepSim", "steps": 5})[0]
        assert frame["type"] == "ParticleFrame"
        vids = np.asarray(frame["vertex_ids"])
        got = np.asarray(frame["positions"]).reshape(-1, 3)
        assert np.max(np.abs(got - session.mesh.positions[vids])) < 1e-9

    def test_force_moves_particle_and_clear_releases(self):
        session, _, _ = _loaded_session(level=2)
        session.handle({"type": "ApplyForce", "particle": 0,
                        "force": [500.0, 0.0, 0.0]})
        session.handle({"type": "StepSim", "steps": 10})
        moved = session.system.center[0] - session.system.anchor_pos[0]
        assert np.linalg.norm(moved) > 1e-4
        assert session.handle({"type": "ApplyForce", "clear": True}) == []
        assert np.all(session.forces == 0.0)

    def test_force_particle_out_of_range(self):
        session, _, _ = _loaded_session(level=1)
        with pytest.raises(ParseError):
            session.handle({"type": "ApplyForce",
                            "particle": session.system.count,
                            "force": [1, 0, 0]})


class TestStrokeProtocol:
    def test_one_delta_per_segment_with_one_sample_lag(self):
        session, _, mesh = _loaded_session(level=3)
        session.handle({"type": "SetParams",
                        "width": 0.04 * mesh.base_diag})
        msgs = _stroke_messages(mesh, n_segments=3)  # 4 samples
        deltas = []
        per_sample = []
        for msg in msgs:
            replies = session.handle(msg)
            per_sample.append(len(replies))
            deltas.extend(r for r in replies if r["type"] == "MeshDelta")
        # Lag one sample: segment k tears once sample k+2 arrives.
        assert per_sample[0] == 0 and per_sample[1] == 0
        final = session.handle({"type": "EndStroke"})
        deltas.extend(r for r in final if r["type"] == "MeshDelta")
        assert [d["segment"] for d in deltas] == [0, 1, 2]
        assert all(d["epoch_after"] > d["epoch_before"] for d in deltas)

    def test_client_replay_matches_resync_hash(self):
        session, snapshot, mesh = _loaded_session(level=3)
        session.handle({"type": "SetParams",
                        "width": 0.04 * mesh.base_diag})
        client = _client_mesh(snapshot)
        deltas = []
        for msg in _stroke_messages(mesh, n_segments=3):
            deltas.extend(r for r in session.handle(msg)
                          if r["type"] == "MeshDelta")
        deltas.extend(r for r in session.handle({"type": "EndStroke"})
                      if r["type"] == "MeshDelta")
        for reply in deltas:
            for dj in reply["deltas"]:
                client.apply_delta(MeshDelta.from_json(dj))
            assert canonical_mesh_hash(client) == reply["hash"]
        resync = session.handle({"type": "LoadMesh"})[0]
        assert resync["hash"] == canonical_mesh_hash(client)

    def test_slit_particles_spawn_when_enabled(self):
        session, _, mesh = _loaded_session(level=3)
        session.handle({"type": "SetParams",
                        "width": 0.04 * mesh.base_diag,
                        "slit_particles": True})
        n0 = session.system.count
        for msg in _stroke_messages(mesh, n_segments=2):
            session.handle(msg)
        session.handle({"type": "EndStroke"})
        assert session.system.count > n0
        assert np.any(session.system.anchor_vertex == -1)


class TestCutProtocol:
    def test_cut_keeps_larger_side(self):
        session, _, mesh = _loaded_session(level=2)
        faces_before = int(np.count_nonzero(session.mesh.face_alive))
        reply = session.handle({"type": "CutPlane",
                                "normal": [0.0, 0.0, 1.0],
                                "offset": 0.5, "keep": "larger"})[0]
        assert reply["type"] == "MeshLoaded"
        assert reply["cut"]["kept"] == "negative"  # below z=0.5 is larger
        assert reply["faces"] < faces_before
        assert reply["hash"] == canonical_mesh_hash(session.mesh)

    def test_cut_from_samples(self):
        session, _, _ = _loaded_session(level=2)
        reply = session.handle({"type": "CutPlane",
                                "samples": [[0, 0, 0], [1, 0, 0],
                                            [0, 1, 0]]})[0]
        assert reply["cut"]["intersection_points"] > 0

    def test_degenerate_normal_rejected(self):
        session, _, _ = _loaded_session(level=1)
        with pytest.raises(ParseError):
            session.handle({"type": "CutPlane", "normal": [0, 0, 0]})


class TestTcpTransport:
    def test_full_round_trip(self):
        server = SessionServer(("127.0.0.1", 0))
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            obj, mesh = _sphere_obj(level=2)
            with socket.create_connection(("127.0.0.1", port)) as sock:
                sock.sendall(encode_frame({"type": "LoadMesh", "obj": obj}))
                snapshot = read_frame(sock)
                assert snapshot["type"] == "MeshLoaded"
                sock.sendall(encode_frame(
                    {"type": "SetParams", "width": 0.04 * mesh.base_diag}))
                for msg in _stroke_messages(mesh, n_segments=2):
                    sock.sendall(encode_frame(msg))
                sock.sendall(encode_frame({"type": "EndStroke"}))
                got = [read_frame(sock), read_frame(sock)]
                assert [g["type"] for g in got] == ["MeshDelta", "MeshDelta"]
                sock.sendall(encode_frame({"type": "StepSim"}))
                assert read_frame(sock)["type"] == "ParticleFrame"
        finally:
            server.shutdown()
            server.server_close()

    def test_protocol_violation_gets_error_frame(self):
        server = SessionServer(("127.0.0.1", 0))
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            with socket.create_connection(("127.0.0.1", port)) as sock:
                sock.sendall(encode_frame({"type": "Nonsense"}))
                reply = read_frame(sock)
                assert reply["type"] == "Error"
                assert reply["recoverable"] is False
                assert read_frame(sock) is None  # server closed the session
        finally:
            server.shutdown()
            server.server_close()


class TestLatency:
    def test_segment_latency_within_interactive_budget(self):
        # Warm-up stroke first so JIT-ish caches (numpy, allocator) settle.
        session, _, mesh = _loaded_session(level=4)  # ~5k faces
        session.handle({"type": "SetParams", "width": 0.03 * mesh.base_diag})
        elapsed = []
        for round_i in range(2):
            times, tips, ends = straight_stroke(mesh, n_segments=3)
            lift = np.array([0.0, 0.3 * (round_i + 1), 0.0]) * mesh.base_diag
            for t, tip, end in zip(times, tips, ends):
                for r in session.handle({"type": "ScalpelSample",
                                         "t_ms": float(t),
                                         "tip": (tip + lift).tolist(),
                                         "end": (end + lift).tolist()}):
                    if r["type"] == "MeshDelta" and round_i > 0:
                        elapsed.append(r["elapsed_ms"])
            for r in session.handle({"type": "EndStroke"}):
                if r["type"] == "MeshDelta" and round_i > 0:
                    elapsed.append(r["elapsed_ms"])
        assert elapsed
        assert float(np.median(elapsed)) <= 10.0
