from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from swiftmem.index.tag_dag import is_valid_tag, normalize_tag


class TagRelation(BaseModel):
    parent: str
    child: str


class RawTagResponse(BaseModel):
    """The JSON object a tagging model is asked to return, before cleanup."""

    tags: List[str] = []
    relations: List[TagRelation] = []


class TagProposal(BaseModel):
    tags: List[str] = []
    relations: List[Tuple[str, str]] = []

    @model_validator(mode="after")
    def _check(self):
        for tag in self.tags:
            if not is_valid_tag(tag):
                raise ValueError(f"invalid tag '{tag}'")
        known = set(self.tags)
        for parent, child in self.relations:
            if parent not in known or child not in known:
                raise ValueError(f"relation {parent}->{child} has unknown endpoint")
        return self

    @classmethod
    def normalized(
        cls, tags: List[str], relations: List[Tuple[str, str]]
    ) -> "TagProposal":
        """
        Normalizes raw tags, drops the ones that cannot be fixed, and keeps
        only relations whose endpoints both survived.
        """
        clean: List[str] = []
        for raw in tags:
            tag = normalize_tag(raw) if isinstance(raw, str) else None
            if tag and tag not in clean:
                clean.append(tag)

        known = set(clean)
        kept: List[Tuple[str, str]] = []
        for parent, child in relations:
            p, c = normalize_tag(parent), normalize_tag(child)
            if p in known and c in known and p != c and (p, c) not in kept:
                kept.append((p, c))
        return cls(tags=clean, relations=kept)


class AdapterSpec(BaseModel):
    mode: Literal["remote", "offline"] = "offline"
    endpoint: Optional[str] = None
    model: Optional[str] = None
    timeout_ms: int = Field(default=10_000, ge=1)
    d: int = Field(default=384, ge=1)

    @model_validator(mode="after")
    def _remote_needs_endpoint(self):
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("remote mode requires an endpoint")
        return self


class EmbedderSpec(AdapterSpec):
    pass


class TaggerSpec(AdapterSpec):
    pass
