"""Categorical diagrams: graph syntax, IR, rewriting and numeric semantics."""
