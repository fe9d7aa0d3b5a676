"""Bundled Feynman-graph files (meson decay, NN, NN-bar, the two 4th-order loops)."""

from __future__ import annotations

from importlib import resources

from .diagram.graph import FeynmanGraph, parse_feynman_graph

EXAMPLES = ("meson_decay", "nn_tree", "nnbar_s", "nn_loop", "meson_loop", "through_leg")


def example_text(name: str) -> str:
    if name not in EXAMPLES:
        raise KeyError(f"no bundled graph {name!r}; choose from {', '.join(EXAMPLES)}")
    return resources.files("catfeyn.data").joinpath(f"{name}.graph").read_text()


def example_graph(name: str) -> FeynmanGraph:
    return parse_feynman_graph(example_text(name))
