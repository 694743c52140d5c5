"""Experiment orchestration: CLI, configs, persistence, and the verification
corpus."""

from .corpus import CorpusInstance, corpus, random_connected_graph
from .experiments import KINDS, ConfigError, run_experiment
from .records import ResultRecord, ResultSink, input_hash, load_records, replay

__all__ = [
    "KINDS",
    "ConfigError",
    "CorpusInstance",
    "ResultRecord",
    "ResultSink",
    "corpus",
    "input_hash",
    "load_records",
    "random_connected_graph",
    "replay",
    "run_experiment",
]
