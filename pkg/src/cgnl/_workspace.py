"""Tagged allocation accounting for intermediate buffers.

Kernels request their pairwise / lift scratch arrays through
:class:`Scratch`.  Inside a :func:`track_aux` block the bytes of every
live tagged buffer are summed and the peak is recorded; outside one the
calls are plain ``np.empty``.
"""
from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AuxTracker:
    current: int = 0
    peak: int = 0
    by_tag: dict = field(default_factory=dict)

    def _alloc(self, nbytes, tag):
        self.current += nbytes
        self.peak = max(self.peak, self.current)
        self.by_tag[tag] = max(self.by_tag.get(tag, 0), nbytes)

    def _free(self, nbytes):
        self.current -= nbytes


_active: contextvars.ContextVar[AuxTracker | None] = contextvars.ContextVar("cgnl_aux", default=None)


@contextlib.contextmanager
def track_aux():
    tracker = AuxTracker()
    token = _active.set(tracker)
    try:
        yield tracker
    finally:
        _active.reset(token)


class Scratch:
    """Scope for tagged buffers; everything allocated is released on exit."""

    def __init__(self):
        self._tracker = _active.get()
        self._held = 0

    def empty(self, shape, tag):
        arr = np.empty(shape, dtype=np.float64)
        if self._tracker is not None:
            self._tracker._alloc(arr.nbytes, tag)
            self._held += arr.nbytes
        return arr

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self._tracker is not None:
            self._tracker._free(self._held)
        self._held = 0
        return False

