import numpy as np
import pytest

from ckgrec.config import (
    EmbedConfig,
    FusionConfig,
    ModelConfig,
    PropagationConfig,
    TrainConfig,
)
from ckgrec.data import InteractionSet, KnowledgeTriples
from ckgrec.graph import build_ckg
from ckgrec.params import init_params


def toy_interactions():
    return InteractionSet(
        n_users=3,
        n_items=3,
        pairs=np.array([[0, 0], [0, 1], [1, 1], [2, 2], [2, 0]], dtype=np.int64),
        user_ids=(10, 11, 12),
        item_ids=(100, 101, 102),
    )


def toy_kg():
    return KnowledgeTriples(
        n_items=3,
        n_attributes=2,
        n_relations=2,
        triples=np.array([[0, 0, 3], [1, 0, 3], [2, 1, 4]], dtype=np.int64),
        attribute_ids=(900, 901),
        relation_ids=(7, 8),
    )


def toy_model_config(dim=5, **kw):
    return ModelConfig(
        embed=EmbedConfig(dim=dim, mode=kw.get("mode", "transd"),
                          loss_order=kw.get("loss_order", "conventional")),
        fusion=FusionConfig(dim=dim, kind=kw.get("fusion", "multiplication"),
                            shared_weights=kw.get("shared_weights", False),
                            context=kw.get("context", "mean")),
        propagation=PropagationConfig(
            layer_dims=kw.get("layer_dims", (dim, 3)),
            aggregator=kw.get("aggregator", "bi-interaction"),
            node_dropout=kw.get("node_dropout", 0.0),
        ),
        train=TrainConfig(batch_size=kw.get("batch_size", 4), seed=kw.get("seed", 3)),
    )


@pytest.fixture
def toy_ckg():
    """3 users, 3 items, 2 attributes, 2 KG relations, inverse edges on."""
    test = InteractionSet(
        n_users=3, n_items=3,
        pairs=np.array([[0, 2], [1, 0]], dtype=np.int64),
        user_ids=(10, 11, 12), item_ids=(100, 101, 102),
    )
    validation = InteractionSet(
        n_users=3, n_items=3,
        pairs=np.array([[1, 2], [2, 1]], dtype=np.int64),
        user_ids=(10, 11, 12), item_ids=(100, 101, 102),
    )
    return build_ckg(toy_interactions(), toy_kg(), test=test, validation=validation, inverse=True)


@pytest.fixture
def toy_setup(toy_ckg):
    cfg = toy_model_config()
    params = init_params(toy_ckg.n_entities, toy_ckg.n_relations, cfg, seed=11)
    return toy_ckg, cfg, params


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Worst coordinate-wise relative error, floored to absorb zero gradients."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
