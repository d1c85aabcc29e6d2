"""Classifier backed by a child process speaking newline-delimited JSON.

Request, one per line::

    {"id": 3, "width": 32, "height": 32, "pixels": [... W*H*3 floats, row-major ...]}

Response, one per line::

    {"id": 3, "label": 7}

Masked pixels are rendered as 0.0. Responses must echo the request id in
order; anything else is a protocol violation.
"""
from __future__ import annotations

import json
import queue
import subprocess
import threading

from .classifier import Classifier, render_scene
from .errors import BridgeError


class ExternalClassifier(Classifier):
    def __init__(self, argv, timeout=30.0, env=None):
        super().__init__()
        self.timeout = timeout
        self._next_id = 0
        self._io_lock = threading.Lock()
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            text=True, bufsize=1, env=env,
        )
        self._lines = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _classify(self, scene, applied_masks):
        pixels = render_scene(scene, applied_masks).reshape(-1)
        with self._io_lock:
            req_id = self._next_id
            self._next_id += 1
            request = {"id": req_id, "width": scene.width, "height": scene.height,
                       "pixels": [round(float(p), 6) for p in pixels]}
            try:
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise BridgeError(f"classifier process not accepting input: {exc}",
                                  payload=self._stderr_tail()) from exc
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise BridgeError(f"no response to request {req_id} within {self.timeout}s")
            if line is None:
                raise BridgeError(f"classifier process exited (code {self._proc.poll()})",
                                  payload=self._stderr_tail())
        return self._parse(line, req_id)

    @staticmethod
    def _parse(line, req_id):
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"malformed response: {exc}", payload=line) from exc
        if not isinstance(msg, dict) or "id" not in msg or "label" not in msg:
            raise BridgeError("response missing 'id' or 'label'", payload=line)
        if msg["id"] != req_id:
            raise BridgeError(f"response id {msg['id']!r} does not match request {req_id}",
                              payload=line)
        label = msg["label"]
        if not isinstance(label, int) or isinstance(label, bool) or label < 0:
            raise BridgeError(f"invalid label {label!r}", payload=line)
        return label

    def _stderr_tail(self):
        if self._proc.poll() is None:
            return None
        try:
            return self._proc.stderr.read()[-2000:]
        except (OSError, ValueError):
            return None

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        for stream in (self._proc.stdout, self._proc.stderr):
            if stream:
                stream.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
