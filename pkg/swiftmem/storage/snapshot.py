import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, List, NamedTuple, Sequence

from pydantic import ValidationError

from swiftmem.core.errors import CorruptSnapshot
from swiftmem.schemas.snapshot import (
    SNAPSHOT_FORMAT,
    SNAPSHOT_VERSION,
    EpisodeRecord,
    SnapshotHeader,
    TagRecord,
)


class Snapshot(NamedTuple):
    header: SnapshotHeader
    records: List[EpisodeRecord]
    tags: List[TagRecord]


def _dump_line(data: dict) -> str:
    # floats go through repr, which round-trips float64 exactly
    return json.dumps(data, ensure_ascii=False, separators=(",", ":"))


def write_snapshot(
    path: str,
    d: int,
    records: Iterable[EpisodeRecord],
    tags: Sequence[TagRecord] = (),
    rejected: int = 0,
) -> int:
    """
    Writes a line-delimited JSON snapshot and returns the episode count.
    Episode lines come first, then one line per tag. The file is written
    next to the target and moved into place.
    """
    lines = [_dump_line(r.model_dump()) for r in records]
    tag_lines = [_dump_line(t.model_dump()) for t in tags]
    body = "".join(line + "\n" for line in lines + tag_lines)
    header = SnapshotHeader(
        format=SNAPSHOT_FORMAT,
        version=SNAPSHOT_VERSION,
        d=d,
        count=len(lines),
        tags=len(tag_lines),
        rejected=rejected,
        sha256=hashlib.sha256(body.encode("utf-8")).hexdigest(),
    )

    dest = Path(path)
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = dest.with_name(dest.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(_dump_line(header.model_dump()) + "\n")
        f.write(body)
    os.replace(tmp, dest)
    return len(lines)


def _parse(model, line: str, line_no: int, what: str):
    try:
        return model.model_validate(json.loads(line))
    except (json.JSONDecodeError, ValidationError) as e:
        raise CorruptSnapshot(f"bad {what} record: {e}", line=line_no) from e


def read_snapshot(path: str) -> Snapshot:
    with open(Path(path), "r", encoding="utf-8", newline="") as f:
        raw = f.read()

    if not raw:
        raise CorruptSnapshot("empty file", line=1)
    if not raw.endswith("\n"):
        # a complete snapshot always ends with a newline
        last = raw.count("\n") + 1
        raise CorruptSnapshot("truncated final line", line=last)

    lines = raw[:-1].split("\n")
    try:
        header = SnapshotHeader.model_validate(json.loads(lines[0]))
    except (json.JSONDecodeError, ValidationError) as e:
        raise CorruptSnapshot(f"bad header: {e}", line=1) from e

    body_lines = lines[1:]
    expected = header.count + header.tags
    records: List[EpisodeRecord] = []
    tags: List[TagRecord] = []
    seen_ids = set()
    seen_tags = set()
    for offset, line in enumerate(body_lines):
        line_no = offset + 2
        if offset >= expected:
            raise CorruptSnapshot(
                f"header declares {expected} lines after it, found more", line=line_no
            )

        if offset < header.count:
            record = _parse(EpisodeRecord, line, line_no, "episode")
            key, seen, kind = record.id, seen_ids, "episode id"
            records.append(record)
        else:
            record = _parse(TagRecord, line, line_no, "tag")
            key, seen, kind = record.tag, seen_tags, "tag"
            tags.append(record)

        if len(record.emb) != header.d:
            raise CorruptSnapshot(
                f"embedding length {len(record.emb)} != d={header.d}", line=line_no
            )
        if key in seen:
            raise CorruptSnapshot(f"duplicate {kind} {key}", line=line_no)
        seen.add(key)

    if len(body_lines) < expected:
        raise CorruptSnapshot(
            f"header declares {header.count} episodes and {header.tags} tags, "
            f"found {len(body_lines)} lines",
            line=len(body_lines) + 2,
        )
    if header.sha256 is not None:
        body = "".join(line + "\n" for line in body_lines)
        if hashlib.sha256(body.encode("utf-8")).hexdigest() != header.sha256:
            raise CorruptSnapshot("checksum mismatch against header", line=1)
    return Snapshot(header, records, tags)
