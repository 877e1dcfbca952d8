"""
Rule-based extraction of explicit time references from query text.

Every match is widened to its natural granularity (a day, a week, a calendar
month or year) and returned as half-open UTC intervals, merged.
"""

import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import List, Optional, Tuple

from swiftmem.index.temporal import TimeInterval, merge_intervals

DAY_MS = 86_400_000

MONTHS = {
    "january": 1, "jan": 1, "february": 2, "feb": 2, "march": 3, "mar": 3,
    "april": 4, "apr": 4, "may": 5, "june": 6, "jun": 6, "july": 7, "jul": 7,
    "august": 8, "aug": 8, "september": 9, "sep": 9, "sept": 9,
    "october": 10, "oct": 10, "november": 11, "nov": 11, "december": 12,
    "dec": 12,
}  # fmt: skip

_MONTH = r"(?P<month>" + "|".join(sorted(MONTHS, key=len, reverse=True)) + r")\.?"
_ORD = r"(?:st|nd|rd|th)?"

DATE_PATTERNS = [
    ("day", re.compile(r"\b(?P<year>\d{4})-(?P<mon>\d{2})-(?P<day>\d{2})\b")),
    ("day", re.compile(rf"\b{_MONTH}\s+(?P<day>\d{{1,2}}){_ORD},?\s+(?P<year>\d{{4}})\b", re.I)),
    ("day", re.compile(rf"\b(?P<day>\d{{1,2}}){_ORD}\s+(?:of\s+)?{_MONTH},?\s+(?P<year>\d{{4}})\b", re.I)),
    ("month", re.compile(rf"\b{_MONTH},?\s+(?P<year>\d{{4}})\b", re.I)),
    ("month", re.compile(r"\b(?P<year>\d{4})-(?P<mon>\d{2})\b")),
    ("year", re.compile(r"\b(?P<year>(?:19|20|21)\d{2})\b")),
]  # fmt: skip

RELATIVE = re.compile(
    r"\b(?:(?P<which>last|this|past|previous)\s+(?:(?P<n>\d+)\s+)?(?P<unit>day|week|month|year)s?"
    r"|(?P<ago_n>\d+|a|one)\s+(?P<ago_unit>day|week|month|year)s?\s+ago"
    r"|(?P<word>today|yesterday))\b",
    re.I,
)

RANGE_GAP = re.compile(r"\s*(?:and|to|until|till|through|-|–)\s*", re.I)
RANGE_LEAD = re.compile(r"\b(?:between|from)\s+$", re.I)


@dataclass(frozen=True)
class _Match:
    start: int
    end: int
    interval: TimeInterval


def to_ms(dt: datetime) -> int:
    return int(dt.timestamp() * 1000)


def _utc(year: int, month: int = 1, day: int = 1) -> datetime:
    return datetime(year, month, day, tzinfo=timezone.utc)


def _add_months(dt: datetime, months: int) -> datetime:
    total = dt.year * 12 + (dt.month - 1) + months
    return _utc(total // 12, total % 12 + 1, 1)


def day_interval(dt: datetime) -> TimeInterval:
    start = _utc(dt.year, dt.month, dt.day)
    return TimeInterval(to_ms(start), to_ms(start + timedelta(days=1)))


def month_interval(year: int, month: int) -> TimeInterval:
    start = _utc(year, month)
    return TimeInterval(to_ms(start), to_ms(_add_months(start, 1)))


def year_interval(year: int) -> TimeInterval:
    return TimeInterval(to_ms(_utc(year)), to_ms(_utc(year + 1)))


def _interval_for(kind: str, m: re.Match) -> Optional[TimeInterval]:
    groups = m.groupdict()
    year = int(groups["year"])
    if groups.get("month"):
        month = MONTHS[groups["month"].lower()]
    elif groups.get("mon"):
        month = int(groups["mon"])
    else:
        month = 1
    try:
        if kind == "day":
            return day_interval(_utc(year, month, int(groups["day"])))
        if kind == "month":
            _utc(year, month)
            return month_interval(year, month)
        return year_interval(year)
    except ValueError:
        # not a real calendar date (e.g. 2023-02-30)
        return None


def _overlaps(span: Tuple[int, int], taken: List[Tuple[int, int]]) -> bool:
    return any(span[0] < e and s < span[1] for s, e in taken)


def _absolute_matches(text: str) -> List[_Match]:
    taken: List[Tuple[int, int]] = []
    found: List[_Match] = []
    for kind, pattern in DATE_PATTERNS:
        for m in pattern.finditer(text):
            if _overlaps(m.span(), taken):
                continue
            interval = _interval_for(kind, m)
            if interval is None:
                continue
            taken.append(m.span())
            found.append(_Match(m.start(), m.end(), interval))
    return sorted(found, key=lambda x: x.start)


def _relative_interval(m: re.Match, now: datetime) -> Optional[TimeInterval]:
    today = _utc(now.year, now.month, now.day)
    week_start = today - timedelta(days=today.weekday())

    word = (m.group("word") or "").lower()
    if word == "today":
        return day_interval(today)
    if word == "yesterday":
        return day_interval(today - timedelta(days=1))

    if m.group("ago_unit"):
        raw = m.group("ago_n").lower()
        n = 1 if raw in ("a", "one") else int(raw)
        unit = m.group("ago_unit").lower()
        if unit == "day":
            return day_interval(today - timedelta(days=n))
        if unit == "week":
            start = week_start - timedelta(weeks=n)
            return TimeInterval(to_ms(start), to_ms(start + timedelta(weeks=1)))
        if unit == "month":
            start = _add_months(_utc(now.year, now.month), -n)
            return month_interval(start.year, start.month)
        return year_interval(now.year - n)

    which = m.group("which").lower()
    unit = m.group("unit").lower()
    n = int(m.group("n")) if m.group("n") else None
    if n is not None:
        # "last 3 weeks": a rolling window ending with today
        if n <= 0:
            return None
        end = today + timedelta(days=1)
        if unit == "day":
            start = today - timedelta(days=n - 1)
        elif unit == "week":
            start = end - timedelta(weeks=n)
        elif unit == "month":
            start = _add_months(_utc(now.year, now.month), -(n - 1))
        else:
            start = _utc(now.year - (n - 1))
        return TimeInterval(to_ms(start), to_ms(end))

    offset = 0 if which == "this" else -1
    if unit == "day":
        return day_interval(today + timedelta(days=offset))
    if unit == "week":
        start = week_start + timedelta(weeks=offset)
        return TimeInterval(to_ms(start), to_ms(start + timedelta(weeks=1)))
    if unit == "month":
        start = _add_months(_utc(now.year, now.month), offset)
        return month_interval(start.year, start.month)
    return year_interval(now.year + offset)


def parse_temporal(
    query: str, reference_now: int, slack_ms: int = 0
) -> List[TimeInterval]:
    """
    Extracts explicit dates and ranges from `query`. Relative phrases are
    resolved against `reference_now` (epoch ms). `slack_ms` widens every
    interval on both sides, for approximate clues. No match -> [].
    """
    now = datetime.fromtimestamp(reference_now / 1000, tz=timezone.utc)
    matches = _absolute_matches(query)

    intervals: List[TimeInterval] = []
    consumed = set()
    # "between X and Y" / "from X to Y" collapse into one range
    for a, b in zip(matches, matches[1:]):
        if a.start in consumed:
            continue
        if RANGE_GAP.fullmatch(query[a.end : b.start]) and RANGE_LEAD.search(
            query[: a.start]
        ):
            end = max(a.interval.end, b.interval.end)
            intervals.append(TimeInterval(a.interval.start, end))
            consumed.update((a.start, b.start))
    intervals.extend(m.interval for m in matches if m.start not in consumed)

    taken = [(m.start, m.end) for m in matches]
    for m in RELATIVE.finditer(query):
        if _overlaps(m.span(), taken):
            continue
        interval = _relative_interval(m, now)
        if interval is not None:
            intervals.append(interval)

    if slack_ms:
        # clamped at the epoch; an interval wholly before it is dropped
        intervals = [
            TimeInterval(max(0, i.start - slack_ms), i.end + slack_ms)
            for i in intervals
            if i.end + slack_ms > 0
        ]
    return merge_intervals(intervals)


def parse_bound(value: str) -> int:
    """
    CLI bound to epoch ms: an integer (already ms), an ISO date or an ISO
    datetime. Naive values are read as UTC.
    """
    value = value.strip()
    if re.fullmatch(r"-?\d+", value) and len(value) != 4:
        return int(value)
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return to_ms(dt)
