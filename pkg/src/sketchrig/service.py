"""The streaming service: one retarget session per connection.

Clients connect over TCP and either send the text handshake line
(``SKETCHRIG 1 binary\\n`` or ``... text``) or an HTTP WebSocket upgrade
(browsers).  After the server's ``OK`` (or the 101 response) the first
message is Hello (rig manifest + meshes + textures), then Frame messages
at the clip's native rate.  CameraUpdate is latest-wins and Control
messages (pause/seek/ablation toggles) apply before the next frame, so
both land within one frame of arrival.
"""

import base64
import hashlib
import json
import logging
import queue
import socket
import struct
import threading
import time

import numpy as np

from . import motion, pipeline, protocol
from .errors import ProtocolError, SketchrigError
from .retarget import RetargetConfig

log = logging.getLogger("sketchrig.service")

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class SessionDescriptor:
    """What a connection needs to start streaming."""

    def __init__(self, rig, hierarchy, clip, joint_map, camera_track, cfg=None,
                 loop=True):
        self.rig = rig
        self.hierarchy = hierarchy
        self.clip = clip
        self.joint_map = joint_map
        self.camera_track = camera_track
        self.cfg = cfg or RetargetConfig()
        self.loop = loop

    @classmethod
    def load(cls, bundle_dir, bvh_path, camera_track, cfg=None, joint_map=None):
        from . import rig as rig_mod

        rig = rig_mod.load_rig(bundle_dir, register_arap=True)
        with open(bvh_path, "r", encoding="utf-8") as fh:
            hierarchy, clip = motion.parse_bvh(fh.read())
        return cls(rig, hierarchy, clip,
                   joint_map or motion.JointMap.default(), camera_track, cfg)

    def new_session(self):
        import dataclasses

        return pipeline.RetargetSession(
            self.rig, self.hierarchy, self.clip, self.joint_map,
            self.camera_track, dataclasses.replace(self.cfg),
        )


# ---------------------------------------------------------------------------
# transports


class _TcpTransport:
    def __init__(self, conn):
        self.conn = conn
        self.rfile = conn.makefile("rb")

    def send_message(self, payload):
        self.conn.sendall(protocol.frame_bytes(payload))

    def recv_message(self):
        return protocol.read_frame(self.rfile)

    def close(self):
        try:
            self.conn.close()
        except OSError:
            pass


class _WsTransport:
    def __init__(self, conn, rfile):
        self.conn = conn
        self.rfile = rfile

    def send_message(self, payload):
        data = protocol.frame_bytes(payload)
        n = len(data)
        if n < 126:
            head = bytes([0x82, n])
        elif n < 65536:
            head = bytes([0x82, 126]) + struct.pack(">H", n)
        else:
            head = bytes([0x82, 127]) + struct.pack(">Q", n)
        self.conn.sendall(head + data)

    def _read_exact(self, n):
        buf = b""
        while len(buf) < n:
            chunk = self.rfile.read(n - len(buf))
            if not chunk:
                return None
            buf += chunk
        return buf

    def recv_message(self):
        while True:
            head = self._read_exact(2)
            if head is None:
                return None
            opcode = head[0] & 0x0F
            masked = head[1] & 0x80
            ln = head[1] & 0x7F
            if ln == 126:
                ln = struct.unpack(">H", self._read_exact(2))[0]
            elif ln == 127:
                ln = struct.unpack(">Q", self._read_exact(8))[0]
            mask = self._read_exact(4) if masked else b"\x00" * 4
            data = self._read_exact(ln) if ln else b""
            if data is None:
                return None
            if masked:
                data = bytes(b ^ mask[i % 4] for i, b in enumerate(data))
            if opcode == 8:      # close
                return None
            if opcode == 9:      # ping -> pong
                self.conn.sendall(bytes([0x8A, len(data)]) + data)
                continue
            if opcode in (1, 2):
                # payload carries one length-prefixed protocol frame
                if len(data) < 4:
                    raise ProtocolError("short websocket message")
                (n,) = struct.unpack("<I", data[:4])
                if 4 + n != len(data):
                    raise ProtocolError("websocket message length mismatch")
                return data[4:]

    def close(self):
        try:
            self.conn.sendall(bytes([0x88, 0]))
        except OSError:
            pass
        try:
            self.conn.close()
        except OSError:
            pass


def _websocket_handshake(conn, rfile, first_line):
    headers = {}
    while True:
        line = rfile.readline()
        if not line or line in (b"\r\n", b"\n"):
            break
        k, _, v = line.decode("latin1").partition(":")
        headers[k.strip().lower()] = v.strip()
    key = headers.get("sec-websocket-key")
    if not key:
        conn.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        return None
    accept = base64.b64encode(
        hashlib.sha1((key + _WS_GUID).encode()).digest()
    ).decode()
    conn.sendall(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        ).encode()
    )
    return _WsTransport(conn, rfile)


# ---------------------------------------------------------------------------
# the server


class StreamServer:
    def __init__(self, descriptor, host="127.0.0.1", port=0):
        self.descriptor = descriptor
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen(8)
        self.address = self.sock.getsockname()
        self._stop = threading.Event()
        self._threads = []
        self._hello_cache = None

    def hello_payload(self, session):
        if self._hello_cache is None:
            self._hello_cache = protocol.encode_hello(
                self.descriptor.rig, self.descriptor.clip.frame_count,
                self.descriptor.clip.frame_time,
            )
        return self._hello_cache

    def serve_forever(self):
        while not self._stop.is_set():
            try:
                self.sock.settimeout(0.25)
                conn, addr = self.sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            t = threading.Thread(target=self._handle, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def start(self):
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)
        return self.address

    def stop(self):
        self._stop.set()
        try:
            self.sock.close()
        except OSError:
            pass

    # per-connection ------------------------------------------------------

    def _handle(self, conn):
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        rfile = conn.makefile("rb")
        try:
            first = rfile.readline()
            if first.startswith(b"GET "):
                transport = _websocket_handshake(conn, rfile, first)
                if transport is None:
                    return
            else:
                parts = first.decode("ascii", "replace").split()
                if len(parts) < 2 or parts[0] != "SKETCHRIG" or parts[1] != str(
                    protocol.PROTOCOL_VERSION
                ):
                    conn.sendall(b"ERR unsupported protocol\n")
                    return
                conn.sendall(protocol.HANDSHAKE_REPLY.encode("ascii"))
                transport = _TcpTransport(conn)
                transport.rfile = rfile
        except (OSError, UnicodeDecodeError):
            return
        try:
            self._stream(transport)
        except (OSError, ProtocolError) as exc:
            log.info("connection closed: %s", exc)
        finally:
            transport.close()

    def _stream(self, transport):
        session = self.descriptor.new_session()
        transport.send_message(self.hello_payload(session))

        control = {
            "camera": None, "paused": False, "seek": None, "closed": False,
        }
        lock = threading.Lock()

        def reader():
            while True:
                try:
                    payload = transport.recv_message()
                except (OSError, ProtocolError):
                    payload = None
                if payload is None:
                    with lock:
                        control["closed"] = True
                    return
                try:
                    self._apply_message(payload, control, lock, session)
                except ProtocolError as exc:
                    try:
                        transport.send_message(protocol.encode_error(1, str(exc)))
                    except OSError:
                        pass
                    with lock:
                        control["closed"] = True
                    return

        rt = threading.Thread(target=reader, daemon=True)
        rt.start()

        outq = queue.Queue(maxsize=4)

        def writer():
            while True:
                item = outq.get()
                if item is None:
                    return
                try:
                    transport.send_message(item)
                except OSError:
                    with lock:
                        control["closed"] = True
                    return

        wt = threading.Thread(target=writer, daemon=True)
        wt.start()

        frame_time = session.clip.frame_time
        cursor = 0
        next_deadline = time.monotonic()
        try:
            while True:
                with lock:
                    if control["closed"]:
                        return
                    camera = control["camera"]
                    paused = control["paused"]
                    if control["seek"] is not None:
                        cursor = int(control["seek"]) % session.frame_count
                        control["seek"] = None
                if paused:
                    time.sleep(0.01)
                    next_deadline = time.monotonic()
                    continue
                packet = session.frame(cursor, camera_override=camera)
                order = session.part_order(packet.view_side)
                payload = protocol.encode_packet(packet, order)
                while True:
                    try:
                        outq.put(payload, timeout=0.25)
                        break
                    except queue.Full:
                        with lock:
                            if control["closed"]:
                                return
                cursor += 1
                if cursor >= session.frame_count:
                    if not self.descriptor.loop:
                        return
                    cursor = 0
                next_deadline += frame_time
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_deadline = time.monotonic()
        finally:
            try:
                outq.put_nowait(None)
            except queue.Full:
                pass

    def _apply_message(self, payload, control, lock, session):
        if not payload:
            raise ProtocolError("empty message")
        tag = payload[0]
        if tag == protocol.TAG_CAMERA:
            cam = protocol.decode_camera(payload)
            with lock:
                control["camera"] = cam        # latest wins
        elif tag == protocol.TAG_CONTROL:
            code, value = protocol.decode_control(payload)
            with lock:
                if code == protocol.CONTROL_PAUSE:
                    control["paused"] = bool(value)
                elif code == protocol.CONTROL_SEEK:
                    control["seek"] = int(value)
                elif code == protocol.CONTROL_TOGGLE_VIEW_DEPENDENCE:
                    session.cfg.view_dependence = bool(value)
                elif code == protocol.CONTROL_TOGGLE_LIMB_SWAP:
                    session.cfg.limb_swap = bool(value)
                elif code == protocol.CONTROL_TOGGLE_PLANE_OPT:
                    session.cfg.plane_opt = bool(value)
                else:
                    raise ProtocolError(f"unknown control code {code}")
        else:
            raise ProtocolError(f"unexpected message tag {tag}")
