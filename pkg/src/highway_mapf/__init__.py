"""Lifelong multi-agent path finding with strict and soft highway heuristics."""

__version__ = "0.1.0"
