import bisect
from dataclasses import dataclass
from typing import Dict, Iterable, List, Set, Tuple

from swiftmem.core.errors import DuplicateEpisode

Entry = Tuple[int, int]  # (timestamp, episode id)


@dataclass(frozen=True, order=True)
class TimeInterval:
    """Half-open [start, end) in epoch milliseconds."""

    start: int
    end: int

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(
                f"Interval start must be < end, got [{self.start}, {self.end})"
            )

    def contains(self, ts: int) -> bool:
        return self.start <= ts < self.end


def merge_intervals(intervals: Iterable[TimeInterval]) -> List[TimeInterval]:
    """Merge overlapping or adjacent intervals into a sorted minimal cover."""
    ordered = sorted(intervals)
    if not ordered:
        return []

    merged = [ordered[0]]
    for current in ordered[1:]:
        last = merged[-1]
        if current.start <= last.end:
            if current.end > last.end:
                merged[-1] = TimeInterval(last.start, current.end)
        else:
            merged.append(current)
    return merged


def _lower_bound(timeline: List[Entry], key: Entry) -> Tuple[int, int]:
    # bisect_left with a comparison counter
    lo, hi = 0, len(timeline)
    comparisons = 0
    while lo < hi:
        mid = (lo + hi) // 2
        comparisons += 1
        if timeline[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo, comparisons


class TemporalIndex:
    """
    Per-user timelines sorted by (timestamp, id) plus a global
    id -> (user, timestamp) lookup.
    """

    def __init__(self):
        self._timelines: Dict[str, List[Entry]] = {}
        self._members: Dict[str, Set[int]] = {}
        self._lookup: Dict[int, Tuple[str, int]] = {}
        self.comparisons = 0

    def __len__(self) -> int:
        return len(self._lookup)

    def users(self) -> List[str]:
        return sorted(self._timelines)

    def timeline(self, user: str) -> List[Entry]:
        return list(self._timelines.get(user, ()))

    def lookup(self, episode_id: int) -> Tuple[str, int]:
        return self._lookup[episode_id]

    def episode_ids(self, user: str) -> Set[int]:
        """Live id set of a user's episodes (read-only by convention)."""
        return self._members.get(user, set())

    def count(self, user: str) -> int:
        return len(self._timelines.get(user, ()))

    def insert(self, user: str, timestamp: int, episode_id: int) -> None:
        if episode_id in self._lookup:
            raise DuplicateEpisode(episode_id)

        timeline = self._timelines.setdefault(user, [])
        entry = (timestamp, episode_id)
        # near-append-only: skip the search when the entry goes last
        if not timeline or timeline[-1] < entry:
            timeline.append(entry)
        else:
            bisect.insort(timeline, entry)
        self._members.setdefault(user, set()).add(episode_id)
        self._lookup[episode_id] = (user, timestamp)

    def _bounds(self, timeline: List[Entry], interval: TimeInterval) -> Tuple[int, int]:
        # ids are >= 0, so (ts, -1) sorts before every entry at ts
        lo, c1 = _lower_bound(timeline, (interval.start, -1))
        hi, c2 = _lower_bound(timeline, (interval.end, -1))
        self.comparisons += c1 + c2
        return lo, hi

    def range_query(self, user: str, interval: TimeInterval) -> List[int]:
        timeline = self._timelines.get(user)
        if not timeline:
            return []
        lo, hi = self._bounds(timeline, interval)
        return [eid for _, eid in timeline[lo:hi]]

    def multi_range_query(
        self, user: str, intervals: Iterable[TimeInterval]
    ) -> List[int]:
        timeline = self._timelines.get(user)
        if not timeline:
            return []
        result: List[int] = []
        # merged intervals are disjoint and sorted, so slices concatenate in order
        for interval in merge_intervals(intervals):
            lo, hi = self._bounds(timeline, interval)
            result.extend(eid for _, eid in timeline[lo:hi])
        return result

    def recent(self, user: str, n: int) -> List[int]:
        if n < 0:
            raise ValueError("n must be >= 0")
        timeline = self._timelines.get(user)
        if not timeline or n == 0:
            return []
        return [eid for _, eid in reversed(timeline[-n:])]
