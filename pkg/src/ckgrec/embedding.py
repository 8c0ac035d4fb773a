"""Initial graph embedding: dynamic (per-entity) or static (per-relation)
projections, translation-based triplet scoring, and the pairwise logistic
embedding loss with hand-derived gradients.

The dynamic projection never materializes the projection matrix: with one
projection vector p_e per entity and q_r per relation,

    M_r e = q_r (p_e . e) + e

which is a rank-one update of the identity applied on the fly. The static
mode stores a full matrix per relation instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import EmbedConfig
from .graph import CollaborativeKG, sample_negative_tails
from .numeric import AdamState, adam_step, sigmoid, softplus
from .params import EmbedParams, ModelParams
from .validation import as_rng, check_choice, check_index

ROLES = ("head", "tail")


# --- batched projection with explicit backward ------------------------------

@dataclass
class ProjectionCache:
    ent_ids: np.ndarray
    rel_ids: np.ndarray
    vectors: np.ndarray
    dots: np.ndarray | None = None  # TransD: p_e . v per row


def project_batch(embed: EmbedParams, ent_ids, rel_ids, vectors) -> tuple[np.ndarray, ProjectionCache]:
    """Project ``vectors`` (one per row) into their relation spaces."""
    ent_ids = np.asarray(ent_ids, dtype=np.int64)
    rel_ids = np.asarray(rel_ids, dtype=np.int64)
    vectors = np.asarray(vectors, dtype=np.float64)
    if embed.mode == "transd":
        dots = np.einsum("kd,kd->k", embed.entity_proj[ent_ids], vectors)
        out = embed.relation_proj[rel_ids] * dots[:, None] + vectors
        return out, ProjectionCache(ent_ids, rel_ids, vectors, dots)
    mats = embed.relation_mat[rel_ids]
    out = np.einsum("kij,kj->ki", mats, vectors)
    return out, ProjectionCache(ent_ids, rel_ids, vectors)


def project_batch_backward(
    embed: EmbedParams,
    cache: ProjectionCache,
    grad_out: np.ndarray,
    grads: dict[str, np.ndarray],
) -> np.ndarray:
    """Accumulate parameter gradients; return the gradient on the input vectors."""
    ent, rel, v = cache.ent_ids, cache.rel_ids, cache.vectors
    if embed.mode == "transd":
        q = embed.relation_proj[rel]
        p = embed.entity_proj[ent]
        gq = np.einsum("kd,kd->k", grad_out, q)  # d loss / d dots
        np.add.at(grads["relation_proj"], rel, grad_out * cache.dots[:, None])
        np.add.at(grads["entity_proj"], ent, v * gq[:, None])
        return grad_out + p * gq[:, None]
    mats = embed.relation_mat[rel]
    np.add.at(grads["relation_mat"], rel, np.einsum("ki,kj->kij", grad_out, v))
    return np.einsum("kij,ki->kj", mats, grad_out)


# --- public single-triplet surface -------------------------------------------

def project(params: ModelParams | EmbedParams, entity: int, relation: int, role: str = "head") -> np.ndarray:
    """Relation-space image of one entity's embedding."""
    embed = params.embed if isinstance(params, ModelParams) else params
    check_choice("role", role, ROLES)
    check_index("entity", entity, embed.entity_emb.shape[0])
    check_index("relation", relation, embed.relation_emb.shape[0])
    out, _ = project_batch(embed, [entity], [relation], embed.entity_emb[[entity]])
    return out[0]


def score_triplet(params: ModelParams | EmbedParams, h: int, r: int, t: int) -> float:
    """Translation plausibility -||h_proj + r - t_proj||^2; 0 is a perfect fit."""
    embed = params.embed if isinstance(params, ModelParams) else params
    hp = project(embed, h, r, "head")
    tp = project(embed, t, r, "tail")
    delta = hp + embed.relation_emb[r] - tp
    return float(-np.dot(delta, delta))


# --- pairwise embedding loss --------------------------------------------------

def _score_batch(embed: EmbedParams, h, r, t):
    hp, hc = project_batch(embed, h, r, embed.entity_emb[h])
    tp, tc = project_batch(embed, t, r, embed.entity_emb[t])
    delta = hp + embed.relation_emb[r] - tp
    g = -np.einsum("kd,kd->k", delta, delta)
    return g, (delta, hc, tc)


def _score_batch_backward(embed: EmbedParams, cache, dg, grads):
    delta, hc, tc = cache
    ddelta = -2.0 * delta * dg[:, None]
    np.add.at(grads["relation_emb"], hc.rel_ids, ddelta)
    dh_vec = project_batch_backward(embed, hc, ddelta, grads)
    dt_vec = project_batch_backward(embed, tc, -ddelta, grads)
    np.add.at(grads["entity_emb"], hc.ent_ids, dh_vec)
    np.add.at(grads["entity_emb"], tc.ent_ids, dt_vec)


def embed_loss(params: ModelParams, batch: np.ndarray, config: EmbedConfig) -> float:
    """Mean logistic ranking loss over (h, r, t, t_neg) rows."""
    loss, _ = embed_loss_and_grads(params, batch, config, want_grads=False)
    return loss


def embed_loss_and_grads(
    params: ModelParams,
    batch: np.ndarray,
    config: EmbedConfig,
    want_grads: bool = True,
) -> tuple[float, dict[str, np.ndarray] | None]:
    """Loss plus gradients on the embedding parameter groups.

    ``batch`` is (B, 4) int rows (head, relation, tail, corrupted tail).
    """
    batch = np.asarray(batch, dtype=np.int64)
    h, r, t, tn = batch[:, 0], batch[:, 1], batch[:, 2], batch[:, 3]
    embed = params.embed
    g_pos, cache_pos = _score_batch(embed, h, r, t)
    g_neg, cache_neg = _score_batch(embed, h, r, tn)
    sign = 1.0 if config.loss_order == "conventional" else -1.0
    x = sign * (g_pos - g_neg)
    loss = float(np.mean(softplus(-x)))
    if not want_grads:
        return loss, None
    grads = {name: np.zeros_like(arr) for name, arr in params.embed_groups().items()}
    dx = -sigmoid(-x) / batch.shape[0]
    _score_batch_backward(embed, cache_pos, sign * dx, grads)
    _score_batch_backward(embed, cache_neg, -sign * dx, grads)
    return loss, grads


def train_embed_epoch(
    params: ModelParams,
    ckg: CollaborativeKG,
    adam: AdamState,
    batch_size: int,
    rng,
    config: EmbedConfig,
) -> float:
    """One shuffled pass over all stored triplets with fresh corrupted tails.

    Returns the triplet-weighted mean loss of the epoch.
    """
    rng = as_rng(rng)
    order = rng.permutation(ckg.n_triples)
    total = 0.0
    groups = params.embed_groups()
    for lo in range(0, order.size, batch_size):
        idx = order[lo : lo + batch_size]
        h, r, t = ckg.heads[idx], ckg.rels[idx], ckg.tails[idx]
        tn = sample_negative_tails(ckg, h, r, rng)
        batch = np.column_stack([h, r, t, tn])
        loss, grads = embed_loss_and_grads(params, batch, config)
        if not np.isfinite(loss):
            raise FloatingPointError("embedding loss diverged to a non-finite value")
        adam_step(adam, groups, grads)
        total += loss * idx.size
    return total / max(order.size, 1)


def projection_param_count(embed: EmbedParams) -> dict[str, int]:
    """Per-relation projection parameter counts (embedding + projection)."""
    d = embed.dim
    if embed.mode == "transd":
        return {"per_relation": d + d, "per_entity": d + d}
    return {"per_relation": d + d * d, "per_entity": d}
