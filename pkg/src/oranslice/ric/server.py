"""TCP listener for the RIC: one reader thread per BS connection."""
from __future__ import annotations

import logging
import socket
import threading
import time

from ..e2lite.codec import DEFAULT_PORT

log = logging.getLogger(__name__)


class _Conn:
    def __init__(self, sock):
        self.sock = sock
        self._lock = threading.Lock()
        self.closed = False

    def send(self, data):
        with self._lock:  # never interleave partial frames
            try:
                self.sock.sendall(data)
            except OSError as exc:
                log.info("send failed: %s", exc)

    def close(self):
        if self.closed:
            return
        self.closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class RicServer:
    """Serve a :class:`NearRtRic` on ``host:port`` (port 0 picks a free one).

    With ``status_path`` set, the RIC status JSON is rewritten every
    ``status_period_s`` seconds.
    """

    def __init__(self, ric, host="127.0.0.1", port=DEFAULT_PORT, status_path=None, status_period_s=1.0):
        self.ric = ric
        self.host = host
        self._sock = socket.create_server((host, port))
        self.port = self._sock.getsockname()[1]
        self.status_path = status_path
        self.status_period_s = status_period_s
        self._stop = threading.Event()
        self._threads = []
        self._conns = []

    def start(self):
        t = threading.Thread(target=self._accept_loop, name="ric-accept", daemon=True)
        t.start()
        self._threads.append(t)
        if self.status_path is not None:
            t = threading.Thread(target=self._status_loop, name="ric-status", daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def serve_forever(self):
        self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def _accept_loop(self):
        self._sock.settimeout(0.2)
        while not self._stop.is_set():
            try:
                sock, addr = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            sock.settimeout(None)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Conn(sock)
            self._conns.append(conn)
            log.info("E2 connection from %s:%d", *addr[:2])
            t = threading.Thread(target=self._read_loop, args=(conn,), daemon=True)
            t.start()

    def _read_loop(self, conn):
        session = self.ric.connect(conn)
        try:
            while not session.closed:
                try:
                    chunk = conn.sock.recv(65536)
                except OSError:
                    break
                if not chunk:
                    break
                session.feed(chunk)
        finally:
            session.close()

    def _status_loop(self):
        while not self._stop.wait(self.status_period_s):
            try:
                self.ric.write_status(self.status_path)
            except OSError as exc:
                log.warning("status file: %s", exc)

    def stop(self):
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        for c in self._conns:
            c.close()
        self.ric.close()
        for t in self._threads:
            t.join(timeout=2.0)
