"""Mood-aware music recommendation.

Load a snapshot directory written by ``flowmoods`` (or by
:func:`build_snapshot`), start sessions and page through tracks::

    stack = flowmoods.Stack.load("snapshot")
    session = stack.start("u0001", mood="party", seed=7)
    track = session.next()
"""

from ._flowmoods import (
    AnnIndex,
    Error,
    Session,
    Stack,
    build_snapshot,
    evaluate_scores,
    exact_topk,
    moods,
)

__all__ = [
    "AnnIndex",
    "Error",
    "Session",
    "Stack",
    "build_snapshot",
    "evaluate_scores",
    "exact_topk",
    "moods",
]
