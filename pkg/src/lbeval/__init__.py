"""Retrieval run evaluation and leaderboard meta-evaluation."""

__version__ = "0.1.0"
