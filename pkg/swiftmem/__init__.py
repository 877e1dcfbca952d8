"""swiftmem: query-aware indexing and retrieval over conversational episodes."""

from swiftmem.core.config import Settings, StoreConfig
from swiftmem.engine import SwiftMem

__version__ = "0.1.0"

__all__ = ["Settings", "StoreConfig", "SwiftMem", "__version__"]
