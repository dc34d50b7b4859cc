"""Hash tables split into independently locked partitions.

Used by the multi-threaded tiers: the visited table of subset construction
and the pair table of forward refinement.  No method ever holds more than
one partition lock.
"""

import threading


class PartitionedTable:
    """``partitions`` dicts, each guarded by its own lock.

    ``insert_or_get`` serializes on the key's partition only.
    ``get_or_insert_optimistic`` reads without the lock and only takes it
    when the entry is missing or not yet marked valid.
    """

    def __init__(self, partitions=64):
        if partitions < 1:
            raise ValueError("partitions must be >= 1")
        self.partitions = partitions
        self._maps = [{} for _ in range(partitions)]
        self._locks = [threading.Lock() for _ in range(partitions)]
        self.contended = 0

    def partition_of(self, key):
        return hash(key) % self.partitions

    def insert_or_get(self, key, value):
        """Return ``(stored_value, inserted)``; the first writer wins."""
        p = hash(key) % self.partitions
        lock = self._locks[p]
        if lock.locked():
            self.contended += 1
        with lock:
            table = self._maps[p]
            found = table.get(key)
            if found is not None:
                return found, False
            table[key] = value
            return value, True

    def get_or_insert_optimistic(self, key, value):
        """Lock-free read path; entries are ``[value, valid]`` with ``valid`` written last."""
        p = hash(key) % self.partitions
        entry = self._maps[p].get(key)
        if entry is not None and entry[1]:
            return entry[0], False
        with self._locks[p]:
            entry = self._maps[p].get(key)
            if entry is not None and entry[1]:
                return entry[0], False
            entry = [value, False]
            self._maps[p][key] = entry
            entry[1] = True
            return value, True

    def items(self):
        for p in range(self.partitions):
            with self._locks[p]:
                snapshot = list(self._maps[p].items())
            yield from snapshot

    def __len__(self):
        return sum(len(t) for t in self._maps)
