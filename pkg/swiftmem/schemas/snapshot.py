from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

SNAPSHOT_FORMAT = "swiftmem-snapshot"
SNAPSHOT_VERSION = 2


class SnapshotHeader(BaseModel):
    """
    First line of a snapshot. `count` episode lines follow, then `tags` tag
    lines. Version 1 files carry no tag lines.
    """

    format: Literal["swiftmem-snapshot"]
    version: Literal[1, 2]
    d: int = Field(ge=1)
    count: int = Field(ge=0)
    tags: int = Field(default=0, ge=0)
    rejected: int = Field(default=0, ge=0)
    sha256: Optional[str] = None


class EpisodeRecord(BaseModel):
    """One snapshot line. `rel` holds the relations proposed with the episode."""

    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0)
    user: str = Field(min_length=1)
    content: str
    ts: int = Field(ge=0)
    tags: List[str] = []
    emb: List[float]
    rel: List[Tuple[str, str]] = []


class TagRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tag: str = Field(min_length=1)
    emb: List[float]
    children: List[str] = []
