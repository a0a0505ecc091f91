"""BS-side E2-lite links.

Both links expose the same small surface: ``send(frame_bytes)``,
``recv_frames()`` (non-blocking), ``request(frame_bytes, expect, timeout)``
and ``close()``. :class:`LoopbackLink` feeds an in-process RIC session
synchronously, which is what the deterministic mode uses.
:class:`SocketLink` talks TCP to a listening RIC.
"""
from __future__ import annotations

import collections
import logging
import queue
import socket
import threading
import time

from ..exceptions import ProtocolError
from .codec import HEADER, DEFAULT_PORT, FrameDecoder, MsgType

log = logging.getLogger(__name__)


class _LinkBase:
    def __init__(self):
        self.bytes_sent = collections.Counter()  # msg_type -> payload bytes
        self.frames_sent = collections.Counter()
        self.frames_received = collections.Counter()
        self._send_lock = threading.Lock()

    def _account(self, data):
        # frames are always written whole, so walk the headers
        off = 0
        while off + HEADER.size <= len(data):
            _, _, mtype, length = HEADER.unpack_from(data, off)
            self.bytes_sent[mtype] += length
            self.frames_sent[mtype] += 1
            off += HEADER.size + length

    def request(self, data, expect, timeout=5.0):
        """Send ``data`` and wait for the first frame of type ``expect``.

        Frames of other types that arrive meanwhile stay queued.
        """
        self.send(data)
        end = time.monotonic() + timeout
        while True:
            fr = self._take(expect, max(0.0, end - time.monotonic()))
            if fr is not None:
                return fr
            if time.monotonic() >= end:
                raise TimeoutError(f"no {MsgType(expect).name} within {timeout} s")


class _RicSide:
    """What the RIC sees as the connection: replies land in the BS inbox."""

    def __init__(self, link):
        self._link = link

    def send(self, data):
        self._link._inbox_bytes(data)

    def close(self):
        self._link.closed = True


class LoopbackLink(_LinkBase):
    """Synchronous in-process link to a :class:`~oranslice.ric.NearRtRic`.

    Every ``send`` is handled by the RIC before it returns, so replies are
    visible to the next ``recv_frames`` call. Bytes still cross the codec in
    both directions.
    """

    def __init__(self, ric):
        super().__init__()
        self.closed = False
        self._decoder = FrameDecoder()
        self._inbox = collections.deque()
        self._session = ric.connect(_RicSide(self))

    def _inbox_bytes(self, data):
        for fr in self._decoder.feed(data):
            self.frames_received[fr.msg_type] += 1
            self._inbox.append(fr)

    def send(self, data):
        if self.closed:
            raise ConnectionError("loopback link closed")
        self._account(data)
        self._session.feed(bytes(data))

    def recv_frames(self):
        out = list(self._inbox)
        self._inbox.clear()
        return out

    def _take(self, expect, timeout):
        for i, fr in enumerate(self._inbox):
            if fr.msg_type == expect:
                del self._inbox[i]
                return fr
        if self.closed:
            raise ConnectionError("loopback link closed")
        return None

    def close(self):
        if not self.closed:
            self.closed = True
            self._session.close()


class SocketLink(_LinkBase):
    """TCP client link; a reader thread decodes frames into a queue."""

    def __init__(self, host="127.0.0.1", port=DEFAULT_PORT, connect_timeout=5.0):
        super().__init__()
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise ConnectionError(f"cannot reach RIC at {host}:{port}: {exc}") from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._frames = queue.Queue()
        self._held = collections.deque()
        self.closed = False
        self.error = None
        self._reader = threading.Thread(target=self._read_loop, name="e2-reader", daemon=True)
        self._reader.start()

    def _read_loop(self):
        dec = FrameDecoder()
        try:
            while True:
                chunk = self._sock.recv(65536)
                if not chunk:
                    break
                for fr in dec.feed(chunk):
                    self.frames_received[fr.msg_type] += 1
                    self._frames.put(fr)
        except ProtocolError as exc:
            self.error = exc
            log.warning("RIC sent a bad frame: %s", exc)
        except OSError as exc:
            if not self.closed:
                self.error = exc
        finally:
            self.closed = True
            self._frames.put(None)

    def send(self, data):
        if self.closed:
            raise ConnectionError(f"link to RIC closed ({self.error})")
        with self._send_lock:  # whole frames only, never interleaved
            self._sock.sendall(data)
        self._account(data)

    def recv_frames(self):
        out = list(self._held)
        self._held.clear()
        while True:
            try:
                fr = self._frames.get_nowait()
            except queue.Empty:
                break
            if fr is None:
                self._frames.put(None)
                break
            out.append(fr)
        return out

    def _take(self, expect, timeout):
        for i, fr in enumerate(self._held):
            if fr.msg_type == expect:
                del self._held[i]
                return fr
        end = time.monotonic() + timeout
        while True:
            try:
                fr = self._frames.get(timeout=max(0.0, end - time.monotonic()))
            except queue.Empty:
                return None
            if fr is None:
                self._frames.put(None)
                raise ConnectionError(f"link to RIC closed ({self.error})")
            if fr.msg_type == expect:
                return fr
            self._held.append(fr)

    def close(self):
        if self.closed and self._sock.fileno() < 0:
            return
        self.closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        self._reader.join(timeout=2.0)
