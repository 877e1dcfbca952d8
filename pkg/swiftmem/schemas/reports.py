"""JSON shapes of the bench, ablation and scaling reports."""

from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field


class LatencyStats(BaseModel):
    mean_us: float = 0.0
    p50_us: float = 0.0
    p95_us: float = 0.0

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "LatencyStats":
        if len(samples) == 0:
            return cls()
        arr = np.asarray(samples, dtype=np.float64)
        return cls(
            mean_us=float(arr.mean()),
            p50_us=float(np.percentile(arr, 50)),
            p95_us=float(np.percentile(arr, 95)),
        )


class CandidateStats(BaseModel):
    mean: float = 0.0
    p50: float = 0.0
    p95: float = 0.0
    max: int = 0
    fraction_of_n: float = 0.0

    @classmethod
    def from_counts(cls, counts: Sequence[int], n: int) -> "CandidateStats":
        if len(counts) == 0:
            return cls()
        arr = np.asarray(counts, dtype=np.float64)
        mean = float(arr.mean())
        return cls(
            mean=mean,
            p50=float(np.percentile(arr, 50)),
            p95=float(np.percentile(arr, 95)),
            max=int(arr.max()),
            fraction_of_n=mean / n if n else 0.0,
        )


class ConsolidationBlock(BaseModel):
    fragmentation_before: float
    fragmentation_after: float
    moved: int
    clusters: int
    latency_before: LatencyStats
    latency_after: LatencyStats
    hits_identical: bool


class BenchReport(BaseModel):
    n: int
    tags: int
    users: int
    queries: int
    seed: int
    d: int
    k: int
    d_max: int
    top_k: int
    workers: int = 1
    indexed: LatencyStats = Field(default_factory=LatencyStats)
    exhaustive: LatencyStats = Field(default_factory=LatencyStats)
    speedup: float = 0.0
    candidates: CandidateStats = Field(default_factory=CandidateStats)
    candidate_counts: List[int] = []
    recall_vs_exhaustive: float = Field(default=0.0, ge=0.0, le=1.0)
    evidence_recall: float = Field(default=0.0, ge=0.0, le=1.0)
    fallbacks: int = 0
    # the only baseline measured is the in-process exhaustive scan
    baseline: str = "exhaustive"
    consolidation: Optional[ConsolidationBlock] = None


class AblationRow(BaseModel):
    hint_ratio: float = Field(ge=0.0, le=1.0)
    hinted_queries: int
    latency: LatencyStats
    candidates: CandidateStats
    recall_vs_exhaustive: float = Field(ge=0.0, le=1.0)
    evidence_recall: float = Field(ge=0.0, le=1.0)


class AblationReport(BaseModel):
    n: int
    tags: int
    users: int
    queries: int
    seed: int
    distractor_only: bool = False
    rows: List[AblationRow] = []


class ScaleRow(BaseModel):
    n: int
    indexed_mean_us: float
    exhaustive_mean_us: float
    candidates_mean: float
    speedup: float


class ScaleReport(BaseModel):
    tags: int
    queries: int
    seed: int
    rows: List[ScaleRow] = []
    # last size over first size
    indexed_growth: float = 0.0
    exhaustive_growth: float = 0.0
