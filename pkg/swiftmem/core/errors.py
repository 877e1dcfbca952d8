from typing import Optional


class SwiftMemError(Exception):
    """Base class for every error the engine raises on purpose."""


class DimensionMismatch(SwiftMemError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"Embedding has dimension {got}, store expects {expected}")
        self.expected = expected
        self.got = got


class InvalidTag(SwiftMemError):
    def __init__(self, tag: str):
        super().__init__(f"Invalid tag '{tag}'")
        self.tag = tag


class InvalidEpisode(SwiftMemError):
    pass


class EpisodeNotFound(SwiftMemError):
    def __init__(self, episode_id: int):
        super().__init__(f"Episode {episode_id} not found")
        self.episode_id = episode_id


class DuplicateEpisode(SwiftMemError):
    def __init__(self, episode_id: int):
        super().__init__(f"Episode {episode_id} is already indexed")
        self.episode_id = episode_id


class UnknownTag(SwiftMemError):
    def __init__(self, tag: str):
        super().__init__(f"Tag '{tag}' does not exist")
        self.tag = tag


class SelfLoop(SwiftMemError):
    def __init__(self, tag: str):
        super().__init__(f"Relation from '{tag}' to itself")
        self.tag = tag


class ZeroNorm(SwiftMemError):
    pass


class EmptyContent(SwiftMemError):
    pass


class EmptyText(SwiftMemError):
    pass


class RemoteUnavailable(SwiftMemError):
    pass


class EmbedderFailure(SwiftMemError):
    pass


class CorruptSnapshot(SwiftMemError):
    def __init__(self, message: str, line: Optional[int] = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"Corrupt snapshot{where}: {message}")
        self.line = line
