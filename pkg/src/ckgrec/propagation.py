"""Attentive embedding propagation over the collaborative graph.

Per-triplet attention scores are computed from the fused context vectors,
softmax-normalized within each head's ego-network, then used as fixed mixing
weights while stacked aggregation layers shrink the entity tables. Attention
is refreshed once per training epoch; gradients flow through the messages and
aggregator weights but not through the attention coefficients themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import FusionConfig, PropagationConfig
from .fusion import FusedEmbeddings, fuse_all
from .graph import CollaborativeKG
from .numeric import leaky_relu
from .params import LayerParams, ModelParams
from .validation import as_float_vector, as_rng, check_index


# --- attention ----------------------------------------------------------------

@dataclass(frozen=True)
class AttentionIndex:
    """Normalized per-triplet attention, aligned with the graph's triplet store."""

    weights: np.ndarray
    head_ptr: np.ndarray = field(repr=False)

    def ego_weights(self, h: int) -> np.ndarray:
        lo, hi = self.head_ptr[h], self.head_ptr[h + 1]
        return self.weights[lo:hi]

    def edge_weight(self, position: int) -> float:
        return float(self.weights[position])


def attention_score(
    params: ModelParams,
    h: int,
    r: int,
    t: int,
    h_star: np.ndarray,
    t_star: np.ndarray,
) -> float:
    """Raw (unnormalized) triplet attention from fused head/tail vectors.

    Projects both fused vectors into the relation space with the initial
    embedding layer's projection operators, then scores
    ``(t_proj)^T tanh(h_proj + r)``.
    """
    from .embedding import project_batch  # local import avoids a cycle at import time

    embed = params.embed
    check_index("relation", r, embed.relation_emb.shape[0])
    h_star = as_float_vector("h_star", h_star, dim=embed.dim)
    t_star = as_float_vector("t_star", t_star, dim=embed.dim)
    hp, _ = project_batch(embed, [h], [r], h_star[None, :])
    tp, _ = project_batch(embed, [t], [r], t_star[None, :])
    return float(tp[0] @ np.tanh(hp[0] + embed.relation_emb[r]))


def normalize_ego(scores: np.ndarray) -> np.ndarray:
    """Stable softmax over one ego-network's raw scores; empty stays empty."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return scores.copy()
    if not np.all(np.isfinite(scores)):
        raise ValueError("attention scores must be finite")
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


def segment_softmax(values: np.ndarray, head_ptr: np.ndarray) -> np.ndarray:
    """Softmax within each CSR segment of ``values``; empty segments skipped."""
    out = np.empty_like(values)
    starts, ends = head_ptr[:-1], head_ptr[1:]
    nonempty = starts < ends
    if not np.any(nonempty):
        return out
    seg_starts = starts[nonempty]
    seg_max = np.maximum.reduceat(values, seg_starts)
    seg_of_edge = np.repeat(np.arange(seg_starts.size), (ends - starts)[nonempty])
    shifted = np.exp(values - seg_max[seg_of_edge])
    seg_sum = np.add.reduceat(shifted, seg_starts)
    out[:] = shifted / seg_sum[seg_of_edge]
    return out


def attention_index(
    ckg: CollaborativeKG,
    params: ModelParams,
    fusion_config: FusionConfig,
    fused: FusedEmbeddings | None = None,
) -> AttentionIndex:
    """Recompute normalized attention for every triplet from current parameters."""
    from .embedding import project_batch

    embed = params.embed
    if fused is None:
        fused = fuse_all(ckg, params, fusion_config)
    hp, _ = project_batch(embed, ckg.heads, ckg.rels, fused.head_ctx)
    tp, _ = project_batch(embed, ckg.tails, ckg.rels, fused.tail_ctx)
    delta = np.einsum(
        "kd,kd->k", tp, np.tanh(hp + embed.relation_emb[ckg.rels])
    )
    weights = segment_softmax(delta, ckg.head_ptr)
    return AttentionIndex(weights=weights, head_ptr=ckg.head_ptr)


# --- single-vector aggregator surface -------------------------------------------

def aggregate_ego(weights: np.ndarray, tail_vectors: np.ndarray) -> np.ndarray:
    """Attention-weighted combination of neighbor vectors; empty egos give 0."""
    tail_vectors = np.asarray(tail_vectors, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        dim = tail_vectors.shape[1] if tail_vectors.ndim == 2 else tail_vectors.shape[0]
        return np.zeros(dim)
    return weights @ tail_vectors


def bi_interaction(h_vec, ego_vec, w1, w2, slope: float = 0.01) -> np.ndarray:
    """Sum of an additive and a multiplicative transform, each through LeakyReLU."""
    h_vec = np.asarray(h_vec, dtype=np.float64)
    ego_vec = np.asarray(ego_vec, dtype=np.float64)
    return leaky_relu((h_vec + ego_vec) @ w1, slope) + leaky_relu((h_vec * ego_vec) @ w2, slope)


def gcn_aggregate(h_vec, ego_vec, w, slope: float = 0.01) -> np.ndarray:
    return leaky_relu((np.asarray(h_vec) + np.asarray(ego_vec)) @ w, slope)


def graphsage_aggregate(h_vec, ego_vec, w, slope: float = 0.01) -> np.ndarray:
    joined = np.concatenate([np.asarray(h_vec, dtype=np.float64), np.asarray(ego_vec, dtype=np.float64)])
    return leaky_relu(joined @ w, slope)


# --- stacked propagation with explicit backward ---------------------------------

@dataclass
class _LayerCache:
    x_prev: np.ndarray
    ego: np.ndarray
    sum_in: np.ndarray | None
    prod_in: np.ndarray | None
    cat_in: np.ndarray | None
    pre1: np.ndarray
    pre2: np.ndarray | None
    keep_mask: np.ndarray | None
    src: np.ndarray  # per-edge message source vectors (layer input at tails)
    from_edge_ctx: bool


@dataclass
class PropagationCache:
    layers: list[_LayerCache]


def propagate(
    ckg: CollaborativeKG,
    table0: np.ndarray,
    attention: AttentionIndex,
    layer_params: list[LayerParams],
    config: PropagationConfig,
    training: bool = False,
    rng=None,
    edge_tail_ctx: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Layer tables [X_1 .. X_L] from the layer-0 entity table."""
    tables, _ = propagate_forward(
        ckg, table0, attention, layer_params, config, training=training, rng=rng,
        edge_tail_ctx=edge_tail_ctx,
    )
    return tables


def propagate_forward(
    ckg: CollaborativeKG,
    table0: np.ndarray,
    attention: AttentionIndex,
    layer_params: list[LayerParams],
    config: PropagationConfig,
    training: bool = False,
    rng=None,
    edge_tail_ctx: np.ndarray | None = None,
) -> tuple[list[np.ndarray], PropagationCache]:
    """Forward pass retaining every intermediate needed for the backward pass.

    ``edge_tail_ctx`` (per-triplet vectors) replaces the table lookup for the
    first hop's message sources when per-triplet fusion context is enabled.
    """
    heads, tails = ckg.heads, ckg.tails
    w = attention.weights
    p = config.node_dropout if training else 0.0
    if p > 0.0:
        rng = as_rng(rng)
    slope = config.leaky_slope
    n_ent = table0.shape[0]

    x_prev = table0
    tables: list[np.ndarray] = []
    caches: list[_LayerCache] = []
    for l, lp in enumerate(layer_params, start=1):
        if l == 1 and edge_tail_ctx is not None:
            src = edge_tail_ctx
            from_edge = True
        else:
            src = x_prev[tails]
            from_edge = False
        msg = src * w[:, None]
        keep = None
        if p > 0.0:
            keep = rng.random(msg.shape[0]) >= p
            msg = msg * (keep[:, None] / (1.0 - p))
        ego = np.zeros((n_ent, x_prev.shape[1]))
        np.add.at(ego, heads, msg)

        if config.aggregator == "bi-interaction":
            sum_in = x_prev + ego
            prod_in = x_prev * ego
            pre1 = sum_in @ lp.w1
            pre2 = prod_in @ lp.w2
            x = leaky_relu(pre1, slope) + leaky_relu(pre2, slope)
            cache = _LayerCache(x_prev, ego, sum_in, prod_in, None, pre1, pre2, keep, src, from_edge)
        elif config.aggregator == "gcn":
            sum_in = x_prev + ego
            pre1 = sum_in @ lp.w1
            x = leaky_relu(pre1, slope)
            cache = _LayerCache(x_prev, ego, sum_in, None, None, pre1, None, keep, src, from_edge)
        else:  # graphsage
            cat_in = np.hstack([x_prev, ego])
            pre1 = cat_in @ lp.w1
            x = leaky_relu(pre1, slope)
            cache = _LayerCache(x_prev, ego, None, None, cat_in, pre1, None, keep, src, from_edge)
        tables.append(x)
        caches.append(cache)
        x_prev = x
    return tables, PropagationCache(layers=caches)


def _leaky_grad(pre: np.ndarray, slope: float) -> np.ndarray:
    return np.where(pre > 0, 1.0, slope)


def propagate_backward(
    ckg: CollaborativeKG,
    attention: AttentionIndex,
    layer_params: list[LayerParams],
    config: PropagationConfig,
    cache: PropagationCache,
    d_tables: list[np.ndarray],
    grads: dict[str, np.ndarray],
) -> tuple[np.ndarray, np.ndarray | None]:
    """Backward through the stack given per-layer output gradients.

    ``d_tables[l-1]`` holds the direct gradient on layer l's output (for
    instance from the concatenated final representation); gradients flowing
    down from deeper layers are accumulated internally. Returns the gradient
    on the layer-0 table and, when the first hop consumed per-edge context
    vectors, the gradient on those.
    """
    heads, tails = ckg.heads, ckg.tails
    w = attention.weights
    p = config.node_dropout
    slope = config.leaky_slope
    d_tables = [d.copy() for d in d_tables]
    d_edge_ctx = None

    for l in range(len(layer_params), 0, -1):
        lc = cache.layers[l - 1]
        lp = layer_params[l - 1]
        d_out = d_tables[l - 1]
        if config.aggregator == "bi-interaction":
            dpre1 = d_out * _leaky_grad(lc.pre1, slope)
            dpre2 = d_out * _leaky_grad(lc.pre2, slope)
            grads[f"agg_w1_l{l}"] += lc.sum_in.T @ dpre1
            grads[f"agg_w2_l{l}"] += lc.prod_in.T @ dpre2
            dsum = dpre1 @ lp.w1.T
            dprod = dpre2 @ lp.w2.T
            dx_prev = dsum + dprod * lc.ego
            dego = dsum + dprod * lc.x_prev
        elif config.aggregator == "gcn":
            dpre1 = d_out * _leaky_grad(lc.pre1, slope)
            grads[f"agg_w1_l{l}"] += lc.sum_in.T @ dpre1
            dsum = dpre1 @ lp.w1.T
            dx_prev = dsum.copy()
            dego = dsum
        else:  # graphsage
            dpre1 = d_out * _leaky_grad(lc.pre1, slope)
            grads[f"agg_w1_l{l}"] += lc.cat_in.T @ dpre1
            dcat = dpre1 @ lp.w1.T
            d_in = lc.x_prev.shape[1]
            dx_prev = dcat[:, :d_in].copy()
            dego = dcat[:, d_in:]

        dmsg = dego[heads]
        if lc.keep_mask is not None:
            dmsg = dmsg * (lc.keep_mask[:, None] / (1.0 - p))
        dsrc = dmsg * w[:, None]
        if lc.from_edge_ctx:
            d_edge_ctx = dsrc
        else:
            np.add.at(dx_prev, tails, dsrc)

        if l > 1:
            d_tables[l - 2] += dx_prev
        else:
            d_table0 = dx_prev
    return d_table0, d_edge_ctx
