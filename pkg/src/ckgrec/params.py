"""Trainable parameter tables and their canonical group layout.

The group order defined by :meth:`ModelParams.groups` is the single source of
truth for optimizer state, checkpoint payload order, and gradient-check
sweeps. Shared fusion weights are one underlying array exposed under one
name, so an optimizer step can never split them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .numeric import xavier_fill
from .validation import spawn_rng


@dataclass
class EmbedParams:
    """Entity/relation embeddings plus projection parameters.

    TransD carries one projection vector per entity and per relation;
    TransR instead carries one (dim x dim) matrix per relation.
    """

    entity_emb: np.ndarray
    relation_emb: np.ndarray
    entity_proj: np.ndarray | None = None
    relation_proj: np.ndarray | None = None
    relation_mat: np.ndarray | None = None

    @property
    def mode(self) -> str:
        return "transr" if self.relation_mat is not None else "transd"

    @property
    def n_entities(self) -> int:
        return self.entity_emb.shape[0]

    @property
    def dim(self) -> int:
        return self.entity_emb.shape[1]


@dataclass
class FusionParams:
    """Reparameterization weights; ``shared`` aliases tail onto head."""

    w_head: np.ndarray
    w_tail: np.ndarray
    bias: np.ndarray
    shared: bool = False

    def __post_init__(self):
        if self.shared:
            self.w_tail = self.w_head


@dataclass
class LayerParams:
    """Aggregator weights of one propagation layer (w2 only for bi-interaction)."""

    w1: np.ndarray
    w2: np.ndarray | None = None


@dataclass
class ModelParams:
    """The full trainable parameter set."""

    embed: EmbedParams
    fusion: FusionParams
    layers: list[LayerParams]

    def groups(self) -> dict[str, np.ndarray]:
        """Named tensors in canonical (checkpoint/optimizer) order."""
        out: dict[str, np.ndarray] = {
            "entity_emb": self.embed.entity_emb,
            "relation_emb": self.embed.relation_emb,
        }
        if self.embed.mode == "transd":
            out["entity_proj"] = self.embed.entity_proj
            out["relation_proj"] = self.embed.relation_proj
        else:
            out["relation_mat"] = self.embed.relation_mat
        out["fusion_w_head"] = self.fusion.w_head
        if not self.fusion.shared:
            out["fusion_w_tail"] = self.fusion.w_tail
        out["fusion_bias"] = self.fusion.bias
        for l, lp in enumerate(self.layers, start=1):
            out[f"agg_w1_l{l}"] = lp.w1
            if lp.w2 is not None:
                out[f"agg_w2_l{l}"] = lp.w2
        return out

    def embed_groups(self) -> dict[str, np.ndarray]:
        """Subset updated by the translational-embedding loss pass."""
        names = ("entity_emb", "relation_emb", "entity_proj", "relation_proj", "relation_mat")
        return {k: v for k, v in self.groups().items() if k in names}

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.groups().items()}

    def copy(self) -> "ModelParams":
        embed = EmbedParams(
            entity_emb=self.embed.entity_emb.copy(),
            relation_emb=self.embed.relation_emb.copy(),
            entity_proj=None if self.embed.entity_proj is None else self.embed.entity_proj.copy(),
            relation_proj=None if self.embed.relation_proj is None else self.embed.relation_proj.copy(),
            relation_mat=None if self.embed.relation_mat is None else self.embed.relation_mat.copy(),
        )
        fusion = FusionParams(
            w_head=self.fusion.w_head.copy(),
            w_tail=self.fusion.w_tail,  # re-aliased below when shared
            bias=self.fusion.bias.copy(),
            shared=self.fusion.shared,
        )
        if not self.fusion.shared:
            fusion.w_tail = self.fusion.w_tail.copy()
        layers = [
            LayerParams(w1=lp.w1.copy(), w2=None if lp.w2 is None else lp.w2.copy())
            for lp in self.layers
        ]
        return ModelParams(embed=embed, fusion=fusion, layers=layers)

    def check_finite(self) -> bool:
        return all(np.all(np.isfinite(arr)) for arr in self.groups().values())


def init_params(n_entities: int, n_relations: int, config: ModelConfig, seed: int) -> ModelParams:
    """Xavier-initialized parameters; deterministic per seed.

    Every table gets its own named substream of the master seed so adding or
    removing a group never shifts another group's draw.
    """
    d = config.dim
    fused_in = config.fusion.input_dim

    def draw(key: int, shape, fan_in: int, fan_out: int) -> np.ndarray:
        return xavier_fill(spawn_rng(seed, key), shape, fan_in, fan_out)

    embed = EmbedParams(
        entity_emb=draw(0, (n_entities, d), n_entities, d),
        relation_emb=draw(1, (n_relations, d), n_relations, d),
    )
    if config.embed.mode == "transd":
        embed.entity_proj = draw(2, (n_entities, d), n_entities, d)
        embed.relation_proj = draw(3, (n_relations, d), n_relations, d)
    else:
        embed.relation_mat = draw(4, (n_relations, d, d), d, d)

    fusion = FusionParams(
        w_head=draw(5, (fused_in, d), fused_in, d),
        w_tail=draw(6, (fused_in, d), fused_in, d),
        bias=np.zeros(d),
        shared=config.fusion.shared_weights,
    )

    layers = []
    dims = config.propagation.dims_with_input(d)
    for l in range(config.propagation.n_layers):
        d_in, d_out = dims[l], dims[l + 1]
        if config.propagation.aggregator == "graphsage":
            w1 = draw(10 + 2 * l, (2 * d_in, d_out), 2 * d_in, d_out)
            layers.append(LayerParams(w1=w1))
        elif config.propagation.aggregator == "gcn":
            w1 = draw(10 + 2 * l, (d_in, d_out), d_in, d_out)
            layers.append(LayerParams(w1=w1))
        else:
            w1 = draw(10 + 2 * l, (d_in, d_out), d_in, d_out)
            w2 = draw(11 + 2 * l, (d_in, d_out), d_in, d_out)
            layers.append(LayerParams(w1=w1, w2=w2))
    return ModelParams(embed=embed, fusion=fusion, layers=layers)
