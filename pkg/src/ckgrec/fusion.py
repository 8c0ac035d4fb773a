"""Explicit entity-relation fusion.

Each stored triplet yields two fused context vectors: its head embedding and
its tail embedding, both projected into the relation space, combined with the
relation embedding, then passed through a learned transform with ReLU:

    head context:  relu(combine(h_proj, r) @ W_head + b)
    tail context:  relu(combine(t_proj, r) @ W_tail + b)

The per-entity layer-0 vector is the mean of the entity's context vectors
over every (relation, role) slot it occupies; entities with no edges pass
their raw embedding through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import FusionConfig
from .embedding import ProjectionCache, project_batch, project_batch_backward
from .graph import CollaborativeKG
from .numeric import relu
from .params import FusionParams, ModelParams
from .validation import as_float_vector, check_choice


def fuse(e_proj: np.ndarray, r: np.ndarray, config: FusionConfig) -> np.ndarray:
    """Combine one projected entity vector with one relation vector."""
    e_proj = as_float_vector("e_proj", e_proj)
    r = as_float_vector("r", r, dim=e_proj.shape[0])
    if config.kind == "multiplication":
        return e_proj * r
    if config.kind == "addition":
        return e_proj + r
    if config.kind == "concatenation":
        return np.concatenate([e_proj, r])
    return e_proj.copy()  # "none"


def reparameterize(fused: np.ndarray, params: FusionParams, role: str = "head") -> np.ndarray:
    """Learned nonlinear transform relu(fused @ W + b); output is >= 0."""
    check_choice("role", role, ("head", "tail"))
    w = params.w_head if role == "head" else params.w_tail
    fused = as_float_vector("fused", fused, dim=w.shape[0])
    return relu(fused @ w + params.bias)


def _combine(vecs: np.ndarray, rels: np.ndarray, rel_emb: np.ndarray, kind: str) -> np.ndarray:
    r = rel_emb[rels]
    if kind == "multiplication":
        return vecs * r
    if kind == "addition":
        return vecs + r
    if kind == "concatenation":
        return np.hstack([vecs, r])
    return vecs


@dataclass
class _SideCache:
    proj: ProjectionCache
    projected: np.ndarray
    combined: np.ndarray
    pre: np.ndarray


@dataclass
class FusedEmbeddings:
    """Layer-0 entity table plus the per-triplet context vectors behind it."""

    table: np.ndarray       # (n_entities, dim)
    head_ctx: np.ndarray    # (n_triples, dim), aligned with the triplet store
    tail_ctx: np.ndarray
    context_counts: np.ndarray  # contexts per entity; 0 marks isolated entities
    _cache: tuple | None = field(default=None, repr=False)


def fuse_all(ckg: CollaborativeKG, params: ModelParams, config: FusionConfig) -> FusedEmbeddings:
    """Fused context vectors for every triplet and the entity-level table."""
    embed = params.embed
    fus = params.fusion
    heads, rels, tails = ckg.heads, ckg.rels, ckg.tails

    def side(ent_ids, weight):
        projected, pcache = project_batch(embed, ent_ids, rels, embed.entity_emb[ent_ids])
        combined = _combine(projected, rels, embed.relation_emb, config.kind)
        pre = combined @ weight + fus.bias
        return relu(pre), _SideCache(pcache, projected, combined, pre)

    head_ctx, hcache = side(heads, fus.w_head)
    tail_ctx, tcache = side(tails, fus.w_tail)

    n_ent = ckg.n_entities
    counts = np.bincount(heads, minlength=n_ent) + np.bincount(tails, minlength=n_ent)
    sums = np.zeros((n_ent, embed.dim))
    np.add.at(sums, heads, head_ctx)
    np.add.at(sums, tails, tail_ctx)
    table = embed.entity_emb.copy()
    linked = counts > 0
    table[linked] = sums[linked] / counts[linked, None]

    return FusedEmbeddings(
        table=table,
        head_ctx=head_ctx,
        tail_ctx=tail_ctx,
        context_counts=counts,
        _cache=(hcache, tcache),
    )


def fuse_all_backward(
    ckg: CollaborativeKG,
    params: ModelParams,
    config: FusionConfig,
    fused: FusedEmbeddings,
    d_table: np.ndarray,
    grads: dict[str, np.ndarray],
    d_head_ctx: np.ndarray | None = None,
    d_tail_ctx: np.ndarray | None = None,
) -> None:
    """Backpropagate gradients on the entity table (and optionally on the raw
    per-triplet context vectors) into every upstream parameter group."""
    heads, tails = ckg.heads, ckg.tails
    counts = fused.context_counts
    isolated = counts == 0
    if np.any(isolated):
        grads["entity_emb"][isolated] += d_table[isolated]

    scale = np.zeros_like(counts, dtype=np.float64)
    scale[~isolated] = 1.0 / counts[~isolated]
    dh_ctx = d_table[heads] * scale[heads, None]
    dt_ctx = d_table[tails] * scale[tails, None]
    if d_head_ctx is not None:
        dh_ctx = dh_ctx + d_head_ctx
    if d_tail_ctx is not None:
        dt_ctx = dt_ctx + d_tail_ctx

    hcache, tcache = fused._cache
    _side_backward(ckg, params, config, hcache, dh_ctx, "head", grads)
    _side_backward(ckg, params, config, tcache, dt_ctx, "tail", grads)


def _side_backward(ckg, params, config, cache: _SideCache, d_ctx, role, grads):
    fus = params.fusion
    embed = params.embed
    rels = ckg.rels
    weight = fus.w_head if role == "head" else fus.w_tail
    wkey = "fusion_w_head" if (role == "head" or fus.shared) else "fusion_w_tail"

    dpre = d_ctx * (cache.pre > 0)
    grads[wkey] += cache.combined.T @ dpre
    grads["fusion_bias"] += dpre.sum(axis=0)
    dcombined = dpre @ weight.T

    d = embed.dim
    if config.kind == "multiplication":
        dproj = dcombined * embed.relation_emb[rels]
        np.add.at(grads["relation_emb"], rels, dcombined * cache.projected)
    elif config.kind == "addition":
        dproj = dcombined
        np.add.at(grads["relation_emb"], rels, dcombined)
    elif config.kind == "concatenation":
        dproj = dcombined[:, :d]
        np.add.at(grads["relation_emb"], rels, dcombined[:, d:])
    else:
        dproj = dcombined

    dvec = project_batch_backward(embed, cache.proj, dproj, grads)
    np.add.at(grads["entity_emb"], cache.proj.ent_ids, dvec)
