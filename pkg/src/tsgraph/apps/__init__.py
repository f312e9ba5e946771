"""Bundled iBSP applications, selectable by name."""

from __future__ import annotations

from .nhop import NHop
from .pagerank import PageRank
from .sssp import SSSP
from .track import Track

APPS = {
    "sssp": SSSP,
    "nhop": NHop,
    "pagerank": PageRank,
    "track": Track,
}


def build(name: str, deployment, *, source=None, n_hops=6, target_id=None, initial_location=None,
          search_depth=3, pr_iters=30, temporal=False):
    """Application object plus its input messages for a named app."""
    if name == "sssp":
        if source is None:
            raise ValueError("sssp needs a source vertex")
        return SSSP(temporal=temporal), SSSP.inputs(deployment, source)
    if name == "nhop":
        if source is None:
            raise ValueError("nhop needs a source vertex")
        return NHop(n_hops), NHop.inputs(deployment, source)
    if name == "pagerank":
        return PageRank(pr_iters), {}
    if name == "track":
        if target_id is None or initial_location is None:
            raise ValueError("track needs a target id and an initial location")
        return Track(target_id, search_depth), Track.inputs(deployment, initial_location)
    raise KeyError(name)


__all__ = ["APPS", "NHop", "PageRank", "SSSP", "Track", "build"]
