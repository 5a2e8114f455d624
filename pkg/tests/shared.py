"""Cached builds shared between test modules (bent domains take seconds)."""

from functools import lru_cache

from hilbend.bend import punctured_torus_bend


@lru_cache(maxsize=None)
def bent(t, depth=6):
    return punctured_torus_bend(t, depth)
