from datetime import datetime, timezone
from typing import List, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator


class ConversationTurn(BaseModel):
    speaker: str = Field(min_length=1)
    text: str = Field(min_length=1)
    # epoch milliseconds, or an ISO-8601 string (naive values are UTC)
    ts: Union[int, str]

    @field_validator("ts")
    @classmethod
    def _to_epoch_ms(cls, value):
        if isinstance(value, int):
            if value < 0:
                raise ValueError("timestamp must be >= 0")
            return value
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp() * 1000)

    @field_validator("text")
    @classmethod
    def _not_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("turn text is blank")
        return value


class ConversationRecord(BaseModel):
    """One JSONL line of `swiftmem ingest` input."""

    user: str = Field(min_length=1)
    session: Optional[str] = None
    turns: List[ConversationTurn] = Field(min_length=1)

    @model_validator(mode="after")
    def _ordered(self):
        for prev, cur in zip(self.turns, self.turns[1:]):
            if cur.ts < prev.ts:
                raise ValueError("turn timestamps must be non-decreasing")
        return self

    def exchanges(self) -> List[List[ConversationTurn]]:
        """Consecutive turn pairs; an odd last turn stands alone."""
        return [self.turns[i : i + 2] for i in range(0, len(self.turns), 2)]
