"""Exhaustive poset-space search prover for sorting lower bounds."""

__version__ = "0.1.0"

from .posets import (
    Poset,
    Relation,
    add_comparison,
    dual,
    hasse_reduce,
    transitive_closure,
)
from .config import SearchConfig
from .backward import BackwardAdvice, backward_search, load_advice
from .forward import SortabilityVerdict, forward_search

__all__ = [
    "BackwardAdvice",
    "Poset",
    "Relation",
    "SearchConfig",
    "SortabilityVerdict",
    "add_comparison",
    "backward_search",
    "dual",
    "forward_search",
    "hasse_reduce",
    "load_advice",
    "transitive_closure",
]
