"""Configuration objects for each pipeline stage.

Defaults follow the benchmark setup this model family is normally run with:
embedding size 64, four propagation layers with dims 64/32/16/8, Adam with
learning rate 1e-4, batch size 1024, dropout ratio 0.1, L2 1e-5, early
stopping on validation Recall@20 with patience 50.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .validation import (
    check_choice,
    check_positive,
    check_positive_int,
    check_unit_interval,
)

EMBED_MODES = ("transd", "transr")
LOSS_ORDERS = ("conventional", "paper")
FUSION_KINDS = ("multiplication", "addition", "concatenation", "none")
FUSION_CONTEXTS = ("mean", "per-triplet")
AGGREGATORS = ("bi-interaction", "gcn", "graphsage")
TRAIN_MODES = ("alternating", "joint")


@dataclass(frozen=True)
class EmbedConfig:
    """Initial translational embedding of the collaborative graph.

    ``mode`` selects dynamic projection vectors ("transd") or one static
    projection matrix per relation ("transr"). Entity and relation embeddings
    share a single dimension so the downstream Hadamard fusion is defined.

    ``loss_order`` controls the argument order inside the pairwise logistic
    loss: "conventional" penalizes negatives that score above positives;
    "paper" applies the reversed order printed in the source formulation.
    Only the margin-free logistic objective is implemented.
    """

    dim: int = 64
    mode: str = "transd"
    logistic_loss: bool = True
    loss_order: str = "conventional"

    def __post_init__(self):
        check_positive_int("dim", self.dim)
        check_choice("mode", self.mode, EMBED_MODES)
        check_choice("loss_order", self.loss_order, LOSS_ORDERS)
        if not self.logistic_loss:
            raise ValueError("only the margin-free logistic loss is supported")


@dataclass(frozen=True)
class FusionConfig:
    """Explicit entity-relation fusion ahead of attention.

    ``kind`` "none" skips the combine step but still applies the learned
    reparameterization, so every variant feeds identically shaped vectors
    downstream. Concatenation uses a 2n->n transform to restore the width.

    ``context`` picks the layer-0 per-entity vector: "mean" averages an
    entity's fused vectors over all incident (relation, role) contexts;
    "per-triplet" additionally feeds each first-hop message its own
    edge-specific fused tail vector.
    """

    kind: str = "multiplication"
    shared_weights: bool = False
    context: str = "mean"
    dim: int = 64

    def __post_init__(self):
        check_choice("kind", self.kind, FUSION_KINDS)
        check_choice("context", self.context, FUSION_CONTEXTS)
        check_positive_int("dim", self.dim)

    @property
    def input_dim(self) -> int:
        return 2 * self.dim if self.kind == "concatenation" else self.dim


@dataclass(frozen=True)
class PropagationConfig:
    """Stacked attentive propagation layers.

    ``layer_dims`` are the output widths after the full-width input layer;
    weight matrices are rectangular d_{l-1} x d_l. Node dropout suppresses
    individual incoming ego messages during training with inverted rescaling.
    """

    layer_dims: tuple[int, ...] = (64, 32, 16, 8)
    aggregator: str = "bi-interaction"
    node_dropout: float = 0.1
    leaky_slope: float = 0.01

    def __post_init__(self):
        if len(self.layer_dims) < 1:
            raise ValueError("at least one propagation layer is required")
        for d in self.layer_dims:
            check_positive_int("layer_dims entry", d)
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        check_choice("aggregator", self.aggregator, AGGREGATORS)
        check_unit_interval("node_dropout", self.node_dropout)
        check_positive("leaky_slope", self.leaky_slope)

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims)

    def dims_with_input(self, input_dim: int) -> tuple[int, ...]:
        return (input_dim,) + self.layer_dims


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule for the alternating two-loss training loop."""

    learning_rate: float = 1e-4
    batch_size: int = 1024
    l2_user: float = 1e-5
    l2_item: float = 1e-5
    mode: str = "alternating"
    max_epochs: int = 1000
    patience: int = 50
    monitor_k: int = 20
    seed: int = 0

    def __post_init__(self):
        check_positive("learning_rate", self.learning_rate)
        check_positive_int("batch_size", self.batch_size)
        if self.l2_user < 0 or self.l2_item < 0:
            raise ValueError("L2 coefficients must be non-negative")
        check_choice("mode", self.mode, TRAIN_MODES)
        check_positive_int("max_epochs", self.max_epochs)
        check_positive_int("patience", self.patience)
        check_positive_int("monitor_k", self.monitor_k)


@dataclass(frozen=True)
class ModelConfig:
    """Bundle of the per-stage configurations with consistent dimensions."""

    embed: EmbedConfig = field(default_factory=EmbedConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.embed.dim != self.fusion.dim:
            raise ValueError(
                f"embedding dim {self.embed.dim} != fusion dim {self.fusion.dim}"
            )

    @property
    def dim(self) -> int:
        return self.embed.dim

    @property
    def final_dim(self) -> int:
        return self.dim + sum(self.propagation.layer_dims)
