"""End-to-end model: layer concatenation, dot-product scoring, pairwise
ranking loss, the joint objective with L2, and the alternating training loop
with validation-based early stopping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig
from .embedding import embed_loss_and_grads, train_embed_epoch
from .exceptions import TrainingDivergedError
from .fusion import fuse_all, fuse_all_backward
from .graph import CollaborativeKG, _bpr_cache, sample_bpr_batch, sample_negative_tails
from .numeric import AdamState, adam_step, sigmoid, softplus
from .params import ModelParams, init_params
from .propagation import AttentionIndex, attention_index, propagate_backward, propagate_forward
from .validation import spawn_rng


@dataclass(frozen=True)
class FinalRepresentations:
    """Concatenated per-layer vectors for users and items."""

    users: np.ndarray
    items: np.ndarray

    @property
    def dim(self) -> int:
        return self.users.shape[1]


def final_reps(layer_tables, ckg: CollaborativeKG) -> FinalRepresentations:
    """Concatenate layer tables (input layer first) and slice user/item rows."""
    tables = list(layer_tables)
    if not tables:
        raise ValueError("at least the layer-0 table is required")
    rows = tables[0].shape[0]
    for t in tables:
        if t.shape[0] != rows:
            raise ValueError("layer tables disagree on entity count")
    full = np.hstack(tables)
    m, n = ckg.n_users, ckg.n_items
    return FinalRepresentations(users=full[:m], items=full[m : m + n])


def predict(u_rep: np.ndarray, i_rep: np.ndarray) -> float:
    """Preference score of one user-item pair."""
    u_rep = np.asarray(u_rep, dtype=np.float64)
    i_rep = np.asarray(i_rep, dtype=np.float64)
    if u_rep.shape != i_rep.shape:
        raise ValueError(f"representation dims differ: {u_rep.shape} vs {i_rep.shape}")
    return float(u_rep @ i_rep)


def bpr_loss(batch, user_reps: np.ndarray, item_reps: np.ndarray) -> float:
    """Mean -log sigmoid(score(u, i) - score(u, j)) over (u, i, j) rows."""
    batch = np.asarray(batch, dtype=np.int64)
    ru = user_reps[batch[:, 0]]
    ri = item_reps[batch[:, 1]]
    rj = item_reps[batch[:, 2]]
    x = np.einsum("kd,kd->k", ru, ri - rj)
    return float(np.mean(softplus(-x)))


def l2_penalty(params: ModelParams, ckg: CollaborativeKG, l2_user: float, l2_item: float) -> float:
    """Weighted squared norm of every parameter group.

    User rows of the entity table carry the user coefficient; item and
    attribute rows, and every other tensor, carry the item coefficient.
    """
    m = ckg.n_users
    total = 0.0
    for name, arr in params.groups().items():
        if name == "entity_emb":
            total += l2_user * float(np.sum(arr[:m] ** 2))
            total += l2_item * float(np.sum(arr[m:] ** 2))
        else:
            total += l2_item * float(np.sum(arr**2))
    return total


def _l2_grads(params, ckg, l2_user, l2_item, grads):
    m = ckg.n_users
    for name, arr in params.groups().items():
        if name == "entity_emb":
            grads[name][:m] += 2.0 * l2_user * arr[:m]
            grads[name][m:] += 2.0 * l2_item * arr[m:]
        else:
            grads[name] += 2.0 * l2_item * arr


def forward_representations(
    ckg: CollaborativeKG,
    params: ModelParams,
    config: ModelConfig,
    attention: AttentionIndex,
    training: bool = False,
    rng=None,
):
    """All-entity representation table plus the caches for backprop."""
    fused = fuse_all(ckg, params, config.fusion)
    edge_ctx = fused.tail_ctx if config.fusion.context == "per-triplet" else None
    tables, pcache = propagate_forward(
        ckg, fused.table, attention, params.layers, config.propagation,
        training=training, rng=rng, edge_tail_ctx=edge_ctx,
    )
    all_tables = [fused.table] + tables
    reps = np.hstack(all_tables)
    return reps, (fused, pcache, all_tables)


def representations(
    ckg: CollaborativeKG,
    params: ModelParams,
    config: ModelConfig,
    attention: AttentionIndex | None = None,
) -> FinalRepresentations:
    """Evaluation-mode final representations (no dropout)."""
    if attention is None:
        attention = attention_index(ckg, params, config.fusion)
    reps, _ = forward_representations(ckg, params, config, attention, training=False)
    m, n = ckg.n_users, ckg.n_items
    return FinalRepresentations(users=reps[:m], items=reps[m : m + n])


def pred_loss_and_grads(
    ckg: CollaborativeKG,
    params: ModelParams,
    config: ModelConfig,
    attention: AttentionIndex,
    batch,
    l2_user: float = 0.0,
    l2_item: float = 0.0,
    training: bool = False,
    rng=None,
    want_grads: bool = True,
):
    """Ranking loss (plus optional L2) with gradients for every group.

    Attention coefficients are treated as constants: they are refreshed once
    per epoch, not differentiated through.
    """
    batch = np.asarray(batch, dtype=np.int64)
    reps, (fused, pcache, tables) = forward_representations(
        ckg, params, config, attention, training=training, rng=rng
    )
    m = ckg.n_users
    u_ent = batch[:, 0]
    i_ent = m + batch[:, 1]
    j_ent = m + batch[:, 2]
    ru, ri, rj = reps[u_ent], reps[i_ent], reps[j_ent]
    x = np.einsum("kd,kd->k", ru, ri - rj)
    loss = float(np.mean(softplus(-x)))
    if l2_user or l2_item:
        loss += l2_penalty(params, ckg, l2_user, l2_item)
    if not want_grads:
        return loss, None

    grads = params.zero_grads()
    dx = -sigmoid(-x) / batch.shape[0]
    d_reps = np.zeros_like(reps)
    np.add.at(d_reps, u_ent, dx[:, None] * (ri - rj))
    np.add.at(d_reps, i_ent, dx[:, None] * ru)
    np.add.at(d_reps, j_ent, -dx[:, None] * ru)

    offsets = np.cumsum([0] + [t.shape[1] for t in tables])
    d_tables = [d_reps[:, offsets[k] : offsets[k + 1]] for k in range(len(tables))]
    d_table0, d_edge_ctx = propagate_backward(
        ckg, attention, params.layers, config.propagation, pcache, d_tables[1:], grads
    )
    d_table0 = d_table0 + d_tables[0]
    fuse_all_backward(
        ckg, params, config.fusion, fused, d_table0, grads, d_tail_ctx=d_edge_ctx
    )
    if l2_user or l2_item:
        _l2_grads(params, ckg, l2_user, l2_item, grads)
    return loss, grads


def total_objective(
    embed_component: float,
    pred_component: float,
    params: ModelParams,
    ckg: CollaborativeKG,
    l2_user: float,
    l2_item: float,
) -> float:
    """Overall objective: embedding loss + ranking loss + weighted L2."""
    return embed_component + pred_component + l2_penalty(params, ckg, l2_user, l2_item)


def total_objective_and_grads(
    ckg: CollaborativeKG,
    params: ModelParams,
    config: ModelConfig,
    attention: AttentionIndex,
    embed_batch,
    pred_batch,
    l2_user: float,
    l2_item: float,
):
    """Joint objective over fixed batches, with gradients on every group."""
    e_loss, e_grads = embed_loss_and_grads(params, embed_batch, config.embed)
    p_loss, p_grads = pred_loss_and_grads(
        ckg, params, config, attention, pred_batch, l2_user=l2_user, l2_item=l2_item
    )
    for name, g in e_grads.items():
        p_grads[name] += g
    return e_loss + p_loss, p_grads


@dataclass
class EpochRecord:
    epoch: int
    embed_loss: float
    pred_loss: float
    val_recall: float
    val_ndcg: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_recall: float = 0.0
    best_ndcg: float = 0.0
    stopped_early: bool = False


def train(
    ckg: CollaborativeKG,
    config: ModelConfig,
    initial: ModelParams | None = None,
    epoch_offset: int = 0,
    callback=None,
) -> TrainResult:
    """Alternating (or joint) optimization with early stopping.

    Per epoch: a full shuffled pass of embedding-loss batches, an attention
    refresh, then a full pass of ranking-loss batches with L2. Validation
    Recall@K is monitored every epoch and the best parameters are returned.
    """
    from .evaluation import evaluate  # deferred to avoid an import cycle

    tc = config.train
    seed = tc.seed
    params = initial if initial is not None else init_params(
        ckg.n_entities, ckg.n_relations, config, seed
    )
    adam_embed = AdamState(learning_rate=tc.learning_rate)
    adam_pred = AdamState(learning_rate=tc.learning_rate)
    rng_embed = spawn_rng(seed, 100)
    rng_pred = spawn_rng(seed, 101)
    rng_drop = spawn_rng(seed, 102)
    bpr_cache = _bpr_cache(ckg)
    n_train = len(ckg.train)
    if n_train == 0:
        raise ValueError("training split is empty")
    n_pred_batches = max(1, math.ceil(n_train / tc.batch_size))
    pred_batch_size = min(tc.batch_size, n_train)
    all_groups = params.groups()

    result = TrainResult(params=params.copy())
    epochs_since_best = 0
    for epoch in range(epoch_offset + 1, epoch_offset + tc.max_epochs + 1):
        try:
            if tc.mode == "alternating":
                e_loss = train_embed_epoch(
                    params, ckg, adam_embed, tc.batch_size, rng_embed, config.embed
                )
                attention = attention_index(ckg, params, config.fusion)
                p_total = 0.0
                for _ in range(n_pred_batches):
                    batch = sample_bpr_batch(ckg, pred_batch_size, rng_pred, bpr_cache)
                    loss, grads = pred_loss_and_grads(
                        ckg, params, config, attention, batch,
                        l2_user=tc.l2_user, l2_item=tc.l2_item,
                        training=True, rng=rng_drop,
                    )
                    if not np.isfinite(loss):
                        raise FloatingPointError("ranking loss diverged")
                    adam_step(adam_pred, all_groups, grads)
                    p_total += loss
                p_loss = p_total / n_pred_batches
            else:  # joint
                attention = attention_index(ckg, params, config.fusion)
                order = rng_embed.permutation(ckg.n_triples)
                e_total = p_total = 0.0
                n_steps = 0
                for lo in range(0, order.size, tc.batch_size):
                    idx = order[lo : lo + tc.batch_size]
                    tn = sample_negative_tails(ckg, ckg.heads[idx], ckg.rels[idx], rng_embed)
                    embed_batch = np.column_stack(
                        [ckg.heads[idx], ckg.rels[idx], ckg.tails[idx], tn]
                    )
                    pred_batch = sample_bpr_batch(ckg, pred_batch_size, rng_pred, bpr_cache)
                    e_loss_b, e_grads = embed_loss_and_grads(params, embed_batch, config.embed)
                    p_loss_b, grads = pred_loss_and_grads(
                        ckg, params, config, attention, pred_batch,
                        l2_user=tc.l2_user, l2_item=tc.l2_item,
                        training=True, rng=rng_drop,
                    )
                    for name, g in e_grads.items():
                        grads[name] += g
                    if not (np.isfinite(e_loss_b) and np.isfinite(p_loss_b)):
                        raise FloatingPointError("joint loss diverged")
                    adam_step(adam_pred, all_groups, grads)
                    e_total += e_loss_b * idx.size
                    p_total += p_loss_b
                    n_steps += 1
                e_loss = e_total / max(order.size, 1)
                p_loss = p_total / max(n_steps, 1)
        except FloatingPointError as exc:
            raise TrainingDivergedError(
                f"epoch {epoch}: {exc}", last_good=result.params
            ) from exc
        if not params.check_finite():
            raise TrainingDivergedError(
                f"epoch {epoch}: parameters became non-finite", last_good=result.params
            )

        reps = representations(ckg, params, config, attention)
        report = evaluate(reps, ckg, split="validation", k=tc.monitor_k)
        record = EpochRecord(
            epoch=epoch,
            embed_loss=e_loss,
            pred_loss=p_loss,
            val_recall=report.recall,
            val_ndcg=report.ndcg,
        )
        result.history.append(record)
        if callback is not None:
            callback(record)

        if report.recall > result.best_recall or result.best_epoch == 0:
            result.best_recall = report.recall
            result.best_ndcg = report.ndcg
            result.best_epoch = epoch
            result.params = params.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= tc.patience:
                result.stopped_early = True
                break
    return result
