"""Interpretable tabular classification with weighted Lukasiewicz logic networks.

A classifier is a sparse network of fuzzy And/Or nodes over threshold
predicates.  Training couples gradient descent on the node weights with a
bandit-driven prune-and-regrow search over the predicate bindings.  Trained
models emit logically sound per-sample rule explanations.
"""

from .logic import (
    BlockShape,
    LogicKind,
    NodeParams,
    block_forward,
    eval_conjunction,
    eval_disjunction,
    masked_input,
    node_gradients,
    required_child_value,
)
from .network import Network, Predicate, ThresholdCondition, init_network, parameter_count, predict
from .config import ArchitectureConfig, RunConfig, TrainConfig

__all__ = [
    "ArchitectureConfig",
    "BlockShape",
    "LogicKind",
    "Network",
    "NodeParams",
    "Predicate",
    "RunConfig",
    "ThresholdCondition",
    "TrainConfig",
    "block_forward",
    "eval_conjunction",
    "eval_disjunction",
    "init_network",
    "masked_input",
    "node_gradients",
    "parameter_count",
    "predict",
    "required_child_value",
]
