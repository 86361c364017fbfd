"""Interactive session service: length-prefixed JSON over TCP.

One connection = one session owning a mesh, its sections, and its particle
layer.  The protocol (documented in docs/protocol.md) carries LoadMesh,
SetParams, ScalpelSample, EndStroke, CutPlane, StepSim, ApplyForce inbound
and MeshLoaded, MeshDelta, ParticleFrame, Error outbound.
"""
from __future__ import annotations

import hashlib
import json
import socket
import socketserver
import struct
import time

import numpy as np

from . import particles as prt
from .cut import cut, cut_plane_from_samples
from .errors import MeshTearError, NonManifoldResult, ParseError
from .geometry import Plane, build_tear_boxes
from .harness import resolve_pending_skin
from .mesh import TriMesh, build_sections, load_mesh
from .tear import check_local_manifold, second_pass, tear_segment

PROTOCOL_VERSION = 1
_HEADER = struct.Struct(">I")
MAX_FRAME = 256 * 1024 * 1024


def canonical_mesh_hash(mesh: TriMesh):
    """Implementation-independent digest of the live geometry.

    sha256 over: live faces in ascending id order as int32 LE triples, then
    the positions of every used vertex in ascending id order as float64 LE
    triples.  Byte-level floats avoid any text-formatting mismatch.
    """
    faces = mesh.live_faces().astype("<i4")
    used = np.unique(faces) if len(faces) else np.zeros(0, dtype=np.int64)
    pos = mesh.positions[used].astype("<f8")
    h = hashlib.sha256()
    h.update(faces.tobytes())
    h.update(pos.tobytes())
    return h.hexdigest()


def encode_frame(message: dict) -> bytes:
    payload = json.dumps(message, sort_keys=True).encode("utf-8")
    return _HEADER.pack(len(payload)) + payload


def read_frame(sock: socket.socket):
    header = _read_exact(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME:
        raise ParseError(f"frame of {length} bytes exceeds limit")
    payload = _read_exact(sock, length)
    if payload is None:
        raise ParseError("connection closed mid-frame")
    return json.loads(payload.decode("utf-8"))


def _read_exact(sock, n):
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


class Session:
    """Protocol state machine, transport-agnostic: dict in, dicts out."""

    def __init__(self, params=None):
        self.mesh = None
        self.sections = None
        self.system = None
        self.pmap = None
        self.params = {
            "width": 0.0,
            "seed": 0,
            "sections": 256,
            "distance_threshold_frac": 0.02,
            "angle_threshold_deg": 25.0,
            "slit_particles": False,
            "keep_side": "positive",
            "dt": prt.DEFAULT_DT,
        }
        if params:
            self.params.update(params)
        self.map_params = None
        self.forces = None
        self.stroke_raw = []        # raw (t_ms, tip, end) of the open stroke
        self.accepted = []          # indices into stroke_raw
        self.torn_boxes = 0         # segments already torn this stroke

    # -- message dispatch --------------------------------------------------

    def handle(self, message):
        """Process one inbound message; returns the list of replies."""
        if not isinstance(message, dict) or "type" not in message:
            raise ParseError("message must be an object with a 'type' field")
        mtype = message["type"]
        handlers = {
            "LoadMesh": self._on_load_mesh,
            "SetParams": self._on_set_params,
            "ScalpelSample": self._on_scalpel_sample,
            "EndStroke": self._on_end_stroke,
            "CutPlane": self._on_cut_plane,
            "StepSim": self._on_step_sim,
            "ApplyForce": self._on_apply_force,
        }
        if mtype not in handlers:
            raise ParseError(f"unknown message type {mtype!r}")
        if mtype != "LoadMesh" and self.mesh is None:
            raise ParseError("no mesh loaded")
        return handlers[mtype](message)

    # -- handlers ------------------------------------------------------------

    def _on_load_mesh(self, msg):
        if "obj" in msg:
            sidecar = msg.get("sidecar")
            self.mesh = load_mesh(msg["obj"].encode("utf-8"),
                                  None if sidecar is None
                                  else json.dumps(sidecar).encode("utf-8"))
            self.sections = build_sections(self.mesh,
                                           int(self.params["sections"]))
            seed = int(self.params["seed"])
            self.map_params = prt.default_params(self.mesh.base_diag, seed)
            self.system, self.pmap = prt.generate_particles(
                self.mesh, self.map_params["d"], self.map_params["delta"],
                self.map_params["poisson_r"], seed)
            self.forces = None
            self._reset_stroke()
        elif self.mesh is None:
            raise ParseError("LoadMesh without payload needs a loaded mesh")
        return [self._mesh_loaded()]

    def _mesh_loaded(self, extra=None):
        """Full-state snapshot; doubles as the resync reply."""
        m = self.mesh
        out = {
            "type": "MeshLoaded",
            "version": PROTOCOL_VERSION,
            "epoch": m.epoch,
            "vertices": len(m.positions),
            "faces": int(np.count_nonzero(m.face_alive)),
            "positions": m.positions.ravel().tolist(),
            "normals": m.normals.ravel().tolist(),
            "all_faces": m.faces.ravel().tolist(),
            "dead_face_ids": np.nonzero(~m.face_alive)[0].tolist(),
            "hash": canonical_mesh_hash(m),
            "particles": self._particle_payload(),
        }
        if extra:
            out.update(extra)
        return out

    def _particle_payload(self):
        return {
            "centers": self.system.center.ravel().tolist(),
            "anchors": self.system.anchor_pos.ravel().tolist(),
            "neighbors": [[int(a), int(b)] for a, b in
                          zip(self.pmap.nb_a, self.pmap.nb_b)],
        }

    def _on_set_params(self, msg):
        for key, value in msg.items():
            if key == "type":
                continue
            if key not in self.params:
                raise ParseError(f"unknown parameter {key!r}")
            self.params[key] = value
        return []

    def _reset_stroke(self):
        self.stroke_raw = []
        self.accepted = []
        self.torn_boxes = 0
        self.stroke_rim = []

    def _on_scalpel_sample(self, msg):
        try:
            t_ms = float(msg["t_ms"])
            tip = [float(x) for x in msg["tip"]]
            end = [float(x) for x in msg["end"]]
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"bad ScalpelSample: {e}")
        self.stroke_raw.append((t_ms, tip, end))
        self._accept_incremental()
        # Tear every segment whose box geometry is final (its exit plane is
        # smoothed against the following segment, so lag one sample behind).
        return self._tear_ready_segments(final=False)

    def _accept_incremental(self, final=False):
        """Streaming variant of the stroke resampler: already-accepted
        samples never change, so torn segments stay valid."""
        thresh = self.params["distance_threshold_frac"] * self.mesh.base_diag
        i = len(self.stroke_raw) - 1
        tip = np.asarray(self.stroke_raw[i][1])
        if not self.accepted:
            self.accepted.append(i)
            return
        last = np.asarray(self.stroke_raw[self.accepted[-1]][1])
        dist = float(np.linalg.norm(tip - last))
        if dist >= thresh or (final and dist > 0 and i != self.accepted[-1]):
            self.accepted.append(i)

    def _tear_ready_segments(self, final):
        tips = np.array([self.stroke_raw[i][1] for i in self.accepted])
        ends = np.array([self.stroke_raw[i][2] for i in self.accepted])
        if len(tips) < 2:
            return []
        width = float(self.params["width"])
        boxes = build_tear_boxes(tips, ends, width)
        last = len(boxes) if final else len(boxes) - 1
        replies = []
        for k in range(self.torn_boxes, last):
            replies.extend(self._tear_one(boxes[k], k))
            self.torn_boxes = k + 1
        if final and self.params["slit_particles"] and self.stroke_rim:
            prt.spawn_slit_particles(
                self.mesh, self.system, self.pmap, self.stroke_rim, boxes,
                d_slit=self.map_params["poisson_r"],
                eps_open=0.2 * max(width, self.map_params["poisson_r"]))
        return replies

    def _tear_one(self, box, k):
        mesh, sections = self.mesh, self.sections
        t0 = time.perf_counter()
        snapshot_epoch = mesh.epoch
        try:
            res = tear_segment(mesh, sections, box, box_index=k)
            if not res.delta.empty:
                sections.apply_delta(mesh, res.delta)
            second_pass(mesh, res, box)
            if res.second_delta is not None and not res.second_delta.empty:
                sections.apply_delta(mesh, res.second_delta)
            check_local_manifold(mesh, res.affected_vertices)
        except NonManifoldResult as e:
            return [{"type": "Error", "recoverable": True,
                     "message": str(e), "segment": k}]
        rim_vids = [r.vertex for r in res.rim]
        prev = set(int(v) for v in self.pmap.infl_vertex)
        prt.assign_rim_vertices(mesh, self.system, self.pmap, rim_vids)
        prev |= set(int(v) for v in self.pmap.infl_vertex)
        prt.disconnect_links(mesh, self.system, self.pmap, [box],
                             {0: rim_vids}, use_pruning=True)
        prt.finalize_weights(mesh, self.system, self.pmap, prev, [box])
        resolve_pending_skin(mesh, res)
        if mesh.skin is not None and mesh.skeleton is not None:
            prt.update_skinned_anchors(mesh, self.system, self.pmap)
        self.stroke_rim.extend(res.rim)
        deltas = [d.to_json() for d in (res.delta, res.second_delta)
                  if d is not None and not d.empty]
        return [{
            "type": "MeshDelta",
            "segment": k,
            "epoch_before": snapshot_epoch,
            "epoch_after": mesh.epoch,
            "deltas": deltas,
            "hash": canonical_mesh_hash(mesh),
            "elapsed_ms": (time.perf_counter() - t0) * 1e3,
        }]

    def _on_end_stroke(self, msg):
        if self.stroke_raw:
            self._accept_incremental(final=True)
        replies = self._tear_ready_segments(final=True)
        self._reset_stroke()
        return replies

    def _on_cut_plane(self, msg):
        if "normal" in msg:
            n = np.asarray(msg["normal"], dtype=np.float64)
            ln = np.linalg.norm(n)
            if ln == 0:
                raise ParseError("cut normal must be nonzero")
            plane = Plane(n / ln, float(msg.get("offset", 0.0)) / ln)
        elif "samples" in msg:
            s = np.asarray(msg["samples"], dtype=np.float64).reshape(3, 3)
            plane = cut_plane_from_samples(s[0], s[1], s[2])
        else:
            raise ParseError("CutPlane needs 'normal' or 'samples'")
        result = cut(self.mesh, plane)
        (sys_pos, map_pos), (sys_neg, map_neg) = prt.repair_after_cut(
            self.mesh, self.system, self.pmap, plane, result)
        keep = msg.get("keep", self.params["keep_side"])
        pa = result.positive_mesh.total_area()
        na = result.negative_mesh.total_area()
        if keep == "larger":
            keep = "positive" if pa >= na else "negative"
        if keep == "positive":
            self.mesh, self.system, self.pmap = \
                result.positive_mesh, sys_pos, map_pos
        elif keep == "negative":
            self.mesh, self.system, self.pmap = \
                result.negative_mesh, sys_neg, map_neg
        else:
            raise ParseError(f"unknown keep side {keep!r}")
        self.sections = build_sections(self.mesh, int(self.params["sections"]))
        self.forces = None
        self._reset_stroke()
        return [self._mesh_loaded(extra={"cut": {
            "kept": keep,
            "intersection_points": result.intersection_count,
            "positive_area": pa,
            "negative_area": na,
        }})]

    def _on_step_sim(self, msg):
        steps = int(msg.get("steps", 1))
        dt = float(msg.get("dt", self.params["dt"]))
        positions = self.mesh.positions
        for _ in range(max(1, steps)):
            positions = prt.step(self.mesh.positions, self.system, self.pmap,
                                 forces=self.forces, dt=dt)
        vids = self.pmap.linked_vertices()
        return [{
            "type": "ParticleFrame",
            "epoch": self.mesh.epoch,
            "centers": self.system.center.ravel().tolist(),
            "vertex_ids": vids.tolist(),
            "positions": positions[vids].ravel().tolist(),
        }]

    def _on_apply_force(self, msg):
        if self.forces is None:
            self.forces = np.zeros((self.system.count, 3))
        if msg.get("clear"):
            self.forces[:] = 0.0
            return []
        pid = int(msg["particle"])
        if not 0 <= pid < self.system.count:
            raise ParseError(f"particle {pid} out of range")
        self.forces[pid] = np.asarray(msg["force"], dtype=np.float64)
        return []


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        session = Session(params=self.server.session_params)
        sock = self.request
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        while True:
            try:
                message = read_frame(sock)
            except (ParseError, json.JSONDecodeError, ConnectionError) as e:
                self._send_error(sock, str(e))
                return
            if message is None:
                return
            try:
                replies = session.handle(message)
            except ParseError as e:
                # Protocol violation: error frame, then drop the session.
                self._send_error(sock, str(e))
                return
            except MeshTearError as e:
                replies = [{"type": "Error", "recoverable": True,
                            "message": str(e)}]
            try:
                for reply in replies:
                    sock.sendall(encode_frame(reply))
            except ConnectionError:
                return

    @staticmethod
    def _send_error(sock, message):
        try:
            sock.sendall(encode_frame({"type": "Error", "recoverable": False,
                                       "message": message}))
        except ConnectionError:
            pass


class SessionServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, session_params=None):
        super().__init__(address, _Handler)
        self.session_params = session_params or {}


def serve(port, params=None, host="127.0.0.1"):
    """Blocking entry point: serve sessions until interrupted."""
    with SessionServer((host, port), session_params=params) as server:
        server.serve_forever()
