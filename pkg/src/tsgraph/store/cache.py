"""Slot-bounded LRU cache of decoded slices, plus the read counters."""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, fields


@dataclass
class Counters:
    """I/O observables for one scope (a host, a timestep, a scan row)."""

    fetches: int = 0
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    slices_read: int = 0
    attr_slices_read: int = 0
    bytes_read: int = 0

    def add(self, other: "Counters") -> "Counters":
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self

    def copy(self) -> "Counters":
        return Counters(**{f.name: getattr(self, f.name) for f in fields(self)})

    def __sub__(self, other: "Counters") -> "Counters":
        return Counters(**{f.name: getattr(self, f.name) - getattr(other, f.name) for f in fields(self)})

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class SliceCache:
    """Least-recently-used cache keyed by slice id.

    ``loader(slice_id)`` reads and decodes a slice from disk and returns
    ``(value, nbytes, is_attribute)``. A capacity of 0 disables caching, so
    every fetch goes to disk. All bookkeeping runs under one lock.
    """

    def __init__(self, capacity: int, loader):
        if capacity < 0:
            raise ValueError("cache capacity must be >= 0")
        self.capacity = capacity
        self._loader = loader
        self._entries: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.counters = Counters()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, slice_id):
        return slice_id in self._entries

    def keys(self) -> list:
        """Cached ids, least recently used first."""
        with self._lock:
            return list(self._entries)

    def fetch(self, slice_id, *extra: Counters):
        with self._lock:
            scopes = (self.counters, *extra)
            for c in scopes:
                c.fetches += 1
            if slice_id in self._entries:
                self._entries.move_to_end(slice_id)
                for c in scopes:
                    c.hits += 1
                return self._entries[slice_id]
            value, nbytes, is_attr = self._loader(slice_id)
            for c in scopes:
                c.misses += 1
                c.slices_read += 1
                c.bytes_read += nbytes
                c.attr_slices_read += int(is_attr)
            if self.capacity:
                self._entries[slice_id] = value
                if len(self._entries) > self.capacity:
                    self._entries.popitem(last=False)
                    for c in scopes:
                        c.evictions += 1
            return value

    def clear(self):
        with self._lock:
            self._entries.clear()
