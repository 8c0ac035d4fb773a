"""Scikit-learn style estimator wrapping the full pipeline.

The estimator takes flat hyperparameters (so ``get_params``/``set_params``
and ``clone`` behave as usual), fits on a :class:`CollaborativeKG`, and then
ranks, scores, evaluates, and explains from the trained representations.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .checkpoint import check_dataset_match, load_checkpoint, save_checkpoint
from .config import (
    EmbedConfig,
    FusionConfig,
    ModelConfig,
    PropagationConfig,
    TrainConfig,
)
from .evaluation import MetricReport, RankingResult, evaluate, rank_items
from .explain import ExplanationReport, export_graph, extract_paths
from .graph import CollaborativeKG
from .propagation import attention_index
from .recommender import FinalRepresentations, predict as predict_pair, representations, train


class CKGRecommender(BaseEstimator):
    """Collaborative knowledge-graph recommender.

    Pipeline: translational initial embedding of the union graph, explicit
    entity-relation fusion, attention-weighted multi-layer propagation, and
    dot-product ranking trained with a pairwise objective.

    Parameters mirror the stage configurations; see :mod:`ckgrec.config`
    for the semantics and defaults of each knob.
    """

    def __init__(
        self,
        embed_dim: int = 64,
        embed_mode: str = "transd",
        loss_order: str = "conventional",
        fusion: str = "multiplication",
        shared_weights: bool = False,
        fusion_context: str = "mean",
        layer_dims: tuple[int, ...] = (64, 32, 16, 8),
        aggregator: str = "bi-interaction",
        node_dropout: float = 0.1,
        learning_rate: float = 1e-4,
        batch_size: int = 1024,
        l2_user: float = 1e-5,
        l2_item: float = 1e-5,
        train_mode: str = "alternating",
        max_epochs: int = 1000,
        patience: int = 50,
        monitor_k: int = 20,
        seed: int = 0,
        verbose: int = 0,
    ):
        self.embed_dim = embed_dim
        self.embed_mode = embed_mode
        self.loss_order = loss_order
        self.fusion = fusion
        self.shared_weights = shared_weights
        self.fusion_context = fusion_context
        self.layer_dims = layer_dims
        self.aggregator = aggregator
        self.node_dropout = node_dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.l2_user = l2_user
        self.l2_item = l2_item
        self.train_mode = train_mode
        self.max_epochs = max_epochs
        self.patience = patience
        self.monitor_k = monitor_k
        self.seed = seed
        self.verbose = verbose

    # -- configuration -----------------------------------------------------
    def model_config(self) -> ModelConfig:
        return ModelConfig(
            embed=EmbedConfig(
                dim=self.embed_dim, mode=self.embed_mode, loss_order=self.loss_order
            ),
            fusion=FusionConfig(
                kind=self.fusion,
                shared_weights=self.shared_weights,
                context=self.fusion_context,
                dim=self.embed_dim,
            ),
            propagation=PropagationConfig(
                layer_dims=tuple(self.layer_dims),
                aggregator=self.aggregator,
                node_dropout=self.node_dropout,
            ),
            train=TrainConfig(
                learning_rate=self.learning_rate,
                batch_size=self.batch_size,
                l2_user=self.l2_user,
                l2_item=self.l2_item,
                mode=self.train_mode,
                max_epochs=self.max_epochs,
                patience=self.patience,
                monitor_k=self.monitor_k,
                seed=self.seed,
            ),
        )

    # -- fitting -----------------------------------------------------------
    def fit(self, ckg: CollaborativeKG, y=None, initial_params=None, epoch_offset: int = 0):
        if not isinstance(ckg, CollaborativeKG):
            raise TypeError("fit expects a CollaborativeKG (see ckgrec.graph.build_ckg)")
        config = self.model_config()
        callback = None
        if self.verbose:
            def callback(rec):
                print(
                    f"epoch {rec.epoch}: embed={rec.embed_loss:.4f} "
                    f"pred={rec.pred_loss:.4f} val_recall@{self.monitor_k}={rec.val_recall:.4f}"
                )
        result = train(ckg, config, initial=initial_params, epoch_offset=epoch_offset, callback=callback)
        self.ckg_ = ckg
        self.params_ = result.params
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_recall_ = result.best_recall
        self.best_ndcg_ = result.best_ndcg
        self._refresh_representations()
        return self

    def _refresh_representations(self):
        config = self.model_config()
        self.attention_ = attention_index(self.ckg_, self.params_, config.fusion)
        self.representations_ = representations(
            self.ckg_, self.params_, config, self.attention_
        )

    def _require_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "this CKGRecommender instance is not fitted yet; call fit first"
            )

    # -- inference ----------------------------------------------------------
    def predict(self, X) -> np.ndarray:
        """Scores for (user, item) id pairs, shape (n_pairs, 2) -> (n_pairs,)."""
        self._require_fitted()
        pairs = np.asarray(X, dtype=np.int64)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError("predict expects an (n, 2) array of (user, item) ids")
        reps = self.representations_
        if pairs.size:
            if pairs.min() < 0 or pairs[:, 0].max() >= reps.users.shape[0] \
                    or pairs[:, 1].max() >= reps.items.shape[0]:
                raise IndexError("user or item id out of range")
        return np.einsum("kd,kd->k", reps.users[pairs[:, 0]], reps.items[pairs[:, 1]])

    def predict_pair(self, user: int, item: int) -> float:
        self._require_fitted()
        return predict_pair(
            self.representations_.users[user], self.representations_.items[item]
        )

    def rank(self, user: int, exclude_train: bool = True) -> RankingResult:
        self._require_fitted()
        return rank_items(self.representations_, self.ckg_, user, exclude_train=exclude_train)

    def recommend(self, user: int, k: int = 20) -> np.ndarray:
        """Top-k item ids for a user, training positives excluded."""
        return self.rank(user).top(k)

    def evaluate_split(self, split: str = "test", k: int = 20, exclude_train: bool = True) -> MetricReport:
        self._require_fitted()
        return evaluate(self.representations_, self.ckg_, split=split, k=k, exclude_train=exclude_train)

    def explain(
        self,
        user: int,
        item: int | None = None,
        max_hops: int = 3,
        top_p: int = 5,
        score_mode: str = "sum",
    ) -> ExplanationReport:
        """Attention paths to an item (defaults to the user's top pick)."""
        self._require_fitted()
        if item is None:
            top = self.recommend(user, k=1)
            if top.size == 0:
                raise ValueError(f"user {user} has no candidate items to explain")
            item = int(top[0])
        return extract_paths(
            self.ckg_,
            self.attention_,
            user,
            item,
            max_hops=max_hops,
            top_p=top_p,
            score_mode=score_mode,
            prediction=self.predict_pair(user, item),
        )

    def export_explanation(self, report: ExplanationReport, path, fmt: str = "dot"):
        self._require_fitted()
        return export_graph(report, self.ckg_, path, fmt=fmt)

    # -- persistence ----------------------------------------------------------
    def save(self, path, extra_metrics: dict | None = None):
        self._require_fitted()
        ckg = self.ckg_
        dataset = {
            "n_users": ckg.n_users,
            "n_items": ckg.n_items,
            "n_attributes": ckg.n_attributes,
            "n_kg_relations": ckg.n_kg_relations,
            "inverse": ckg.inverse,
        }
        metrics = {
            "best_epoch": self.best_epoch_,
            "best_val_recall": self.best_recall_,
            "best_val_ndcg": self.best_ndcg_,
        }
        metrics.update(extra_metrics or {})
        return save_checkpoint(path, self.params_, self.get_params(), dataset, metrics)

    @classmethod
    def load(cls, path, ckg: CollaborativeKG) -> "CKGRecommender":
        bundle = load_checkpoint(path)
        check_dataset_match(bundle, ckg.n_entities, ckg.n_relations)
        known = cls().get_params()
        kwargs = {k: v for k, v in bundle.config.items() if k in known}
        if "layer_dims" in kwargs:
            kwargs["layer_dims"] = tuple(kwargs["layer_dims"])
        est = cls(**kwargs)
        est.ckg_ = ckg
        est.params_ = bundle.params
        est.history_ = []
        est.best_epoch_ = bundle.metrics.get("best_epoch", 0)
        est.best_recall_ = bundle.metrics.get("best_val_recall", 0.0)
        est.best_ndcg_ = bundle.metrics.get("best_val_ndcg", 0.0)
        est._refresh_representations()
        return est
