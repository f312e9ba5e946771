"""Deployment-time layout knobs and subgraph bin packing."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass


class BalanceMetric(enum.Enum):
    VERTICES = "vertices"
    EDGES = "edges"
    VERTICES_EDGES = "vertices+edges"

    def size(self, sg) -> int:
        if self is BalanceMetric.VERTICES:
            return sg.n_vertices
        if self is BalanceMetric.EDGES:
            return sg.n_edges
        return sg.n_vertices + sg.n_edges


@dataclass(frozen=True)
class LayoutConfig:
    bins_per_partition: int = 1
    instances_per_slice: int = 1
    balance_metric: BalanceMetric = BalanceMetric.VERTICES_EDGES

    def __post_init__(self):
        if self.bins_per_partition < 1:
            raise ValueError("bins_per_partition must be >= 1")
        if self.instances_per_slice < 1:
            raise ValueError("instances_per_slice must be >= 1")
        if not isinstance(self.balance_metric, BalanceMetric):
            object.__setattr__(self, "balance_metric", BalanceMetric(self.balance_metric))

    def as_dict(self) -> dict:
        return {
            "bins_per_partition": self.bins_per_partition,
            "instances_per_slice": self.instances_per_slice,
            "balance_metric": self.balance_metric.value,
        }


def lpt(weights: dict, bins: int) -> list[list]:
    """Longest-processing-time packing of ``{item: weight}`` into ``bins`` bins.

    Items go heaviest first (ties by item id) into the currently lightest bin
    (ties by bin index). Each bin lists its items in placement order.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    order = sorted(weights, key=lambda item: (-weights[item], item))
    heap = [(0, b) for b in range(bins)]
    out: list[list] = [[] for _ in range(bins)]
    for item in order:
        load, b = heapq.heappop(heap)
        out[b].append(item)
        heapq.heappush(heap, (load + weights[item], b))
    return out


def bin_pack(subgraphs, bins: int, metric: BalanceMetric = BalanceMetric.VERTICES_EDGES) -> list[list[int]]:
    """Subgraph ids grouped into ``bins`` bins of balanced size."""
    metric = BalanceMetric(metric)
    return lpt({sg.subgraph_id: metric.size(sg) for sg in subgraphs}, bins)
