"""Length-prefixed JSON framing: 4-byte big-endian length, then UTF-8 JSON."""

from __future__ import annotations

import json
import struct

MAX_FRAME = 64 * 1024 * 1024


class ConnectionClosed(ConnectionError):
    pass


class FrameError(ValueError):
    """Frame decoded but the payload is not valid JSON, or the frame is oversized."""


def encode_frame(obj) -> bytes:
    raw = json.dumps(obj, separators=(",", ":"), sort_keys=True).encode("utf-8")
    return struct.pack("!I", len(raw)) + raw


def send_frame(sock, obj) -> None:
    sock.sendall(encode_frame(obj))


def _recvall(sock, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionClosed("peer closed the connection")
        buf += chunk
    return buf


def recv_frame(sock):
    header = _recvall(sock, 4)
    (length,) = struct.unpack("!I", header)
    if length > MAX_FRAME:
        raise FrameError(f"frame of {length} bytes exceeds limit")
    payload = _recvall(sock, length)
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"undecodable frame payload: {exc}") from None
