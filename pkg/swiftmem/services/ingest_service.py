import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List

from pydantic import ValidationError

from swiftmem.core.errors import EmptyContent, SwiftMemError
from swiftmem.engine import SwiftMem
from swiftmem.schemas.conversations import ConversationRecord, ConversationTurn

logger = logging.getLogger(__name__)


@dataclass
class SkippedLine:
    line: int
    error: str


@dataclass
class IngestSummary:
    source_path: str
    lines: int = 0
    conversations: int = 0
    episodes: int = 0
    tags: int = 0
    edges: int = 0
    rejected_relations: int = 0
    tagger_fallbacks: int = 0
    skipped: List[SkippedLine] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def exchange_content(turns: List[ConversationTurn]) -> str:
    return "\n".join(f"{t.speaker}: {t.text}" for t in turns)


def ingest_record(engine: SwiftMem, record: ConversationRecord) -> List[int]:
    """
    Each exchange (user turn + agent reply) becomes one episode. All
    exchanges are embedded, tagged and validated before the first one is
    stored, so a failing exchange leaves nothing of the record behind.
    """
    prepared = []
    for turns in record.exchanges():
        content = exchange_content(turns)
        if not content.strip():
            raise EmptyContent("cannot ingest empty content")
        embedding = engine.embedder.embed(content)
        proposal = engine.tagger.generate_tags(content)
        engine.store.validate(
            record.user, content, turns[0].ts, embedding, proposal.tags
        )
        prepared.append((content, turns[0].ts, embedding, proposal))

    return [
        engine.store_episode(
            record.user, content, ts, embedding, proposal.tags, proposal.relations
        )
        for content, ts, embedding, proposal in prepared
    ]


def ingest_file(engine: SwiftMem, json_path: str) -> IngestSummary:
    """
    Ingests a JSONL file of conversation records. Lines that fail to parse
    or validate are skipped and reported with their line number.
    """
    path = Path(json_path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {json_path}")

    summary = IngestSummary(source_path=str(path))
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            summary.lines += 1
            try:
                record = ConversationRecord.model_validate(json.loads(line))
            except (json.JSONDecodeError, ValidationError) as e:
                _skip(summary, line_no, e)
                continue
            before = len(engine)
            try:
                ingest_record(engine, record)
            except SwiftMemError as e:
                _skip(summary, line_no, e)
                continue
            finally:
                summary.episodes += len(engine) - before
            summary.conversations += 1

    summary.tags = len(engine.dag)
    summary.edges = engine.dag.edge_count
    summary.rejected_relations = engine.dag.rejected_relations
    summary.tagger_fallbacks = getattr(engine.tagger, "fallbacks", 0)
    logger.info(
        "Ingested %d episodes from %d conversations (%d lines skipped)",
        summary.episodes,
        summary.conversations,
        len(summary.skipped),
    )
    return summary


def _skip(summary: IngestSummary, line_no: int, error: Exception) -> None:
    message = str(error).splitlines()[0] if str(error) else type(error).__name__
    logger.warning("Skipping line %d: %s", line_no, message)
    summary.skipped.append(SkippedLine(line_no, message))
