"""Attention-weighted relational paths from a user to a recommended item.

Paths are simple (no repeated entity), depth-limited, enumerated exhaustively
over the stored triplets (inverse edges included when the graph carries
them). Each edge contributes its normalized attention weight; a path's score
is the sum of its edge weights by default, or their product behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import CollaborativeKG
from .propagation import AttentionIndex
from .validation import check_choice, check_index, check_positive_int


@dataclass(frozen=True)
class ExplanationPath:
    """Alternating entity/edge walk: nodes[0] is the user, nodes[-1] the item."""

    nodes: tuple[int, ...]
    relations: tuple[int, ...]
    weights: tuple[float, ...]
    score: float

    @property
    def hops(self) -> int:
        return len(self.relations)


@dataclass(frozen=True)
class ExplanationReport:
    user: int
    item: int
    prediction: float
    paths: tuple[ExplanationPath, ...] = field(default_factory=tuple)


def extract_paths(
    ckg: CollaborativeKG,
    attention: AttentionIndex,
    u: int,
    i: int,
    max_hops: int = 3,
    top_p: int = 5,
    score_mode: str = "sum",
    prediction: float = 0.0,
) -> ExplanationReport:
    """Top scoring simple paths from user ``u`` to item ``i`` (entity ids are
    user/item indices, not global entity ids)."""
    check_index("user", u, ckg.n_users)
    check_index("item", i, ckg.n_items)
    check_positive_int("top_p", top_p)
    check_choice("score_mode", score_mode, ("sum", "product"))
    if not 2 <= max_hops <= 4:
        raise ValueError(f"max_hops must lie in [2, 4], got {max_hops}")
    if attention.weights.shape[0] != ckg.n_triples:
        raise ValueError("attention index does not match this graph")

    start = ckg.user_entity(u)
    goal = ckg.item_entity(i)
    found: list[ExplanationPath] = []

    def dfs(node: int, nodes: list[int], rels: list[int], weights: list[float]):
        depth = len(rels)
        if node == goal and depth > 0:
            score = sum(weights) if score_mode == "sum" else float(np.prod(weights))
            found.append(ExplanationPath(tuple(nodes), tuple(rels), tuple(weights), score))
            return  # simple paths cannot revisit the goal
        if depth == max_hops:
            return
        lo, hi = ckg.head_ptr[node], ckg.head_ptr[node + 1]
        for pos in range(lo, hi):
            nxt = int(ckg.tails[pos])
            if nxt in nodes:
                continue
            rel = int(ckg.rels[pos])
            wgt = float(attention.weights[pos])
            nodes.append(nxt)
            rels.append(rel)
            weights.append(wgt)
            dfs(nxt, nodes, rels, weights)
            nodes.pop()
            rels.pop()
            weights.pop()

    dfs(start, [start], [], [])
    found.sort(key=lambda p: (-p.score, p.nodes))
    return ExplanationReport(
        user=u, item=i, prediction=prediction, paths=tuple(found[:top_p])
    )


def export_graph(
    report: ExplanationReport,
    ckg: CollaborativeKG,
    path,
    fmt: str = "dot",
) -> Path:
    """Write the report as a DOT graph or as structured text, byte-stably."""
    check_choice("fmt", fmt, ("dot", "text"))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = _dot_lines(report, ckg) if fmt == "dot" else _text_lines(report, ckg)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _dot_lines(report: ExplanationReport, ckg: CollaborativeKG) -> list[str]:
    user_label = ckg.entity_label(ckg.user_entity(report.user))
    item_label = ckg.entity_label(ckg.item_entity(report.item))
    lines = [
        "digraph explanation {",
        f'  // user {user_label} -> item {item_label}, score {report.prediction:.4f}',
        "  rankdir=LR;",
    ]
    nodes: list[str] = []
    edges: list[str] = []
    seen_nodes: set[str] = set()
    seen_edges: set[str] = set()
    for p in report.paths:
        for ent in p.nodes:
            label = ckg.entity_label(ent)
            if label not in seen_nodes:
                seen_nodes.add(label)
                nodes.append(f'  "{label}";')
        for a, rel, wgt, b in zip(p.nodes, p.relations, p.weights, p.nodes[1:]):
            key = f'  "{ckg.entity_label(a)}" -> "{ckg.entity_label(b)}" ' \
                  f'[label="{ckg.relation_label(rel)} ({wgt:.4f})"];'
            if key not in seen_edges:
                seen_edges.add(key)
                edges.append(key)
    lines.extend(sorted(nodes))
    lines.extend(sorted(edges))
    lines.append("}")
    return lines


def _text_lines(report: ExplanationReport, ckg: CollaborativeKG) -> list[str]:
    user_label = ckg.entity_label(ckg.user_entity(report.user))
    item_label = ckg.entity_label(ckg.item_entity(report.item))
    lines = [
        f"user {user_label} item {item_label} prediction {report.prediction:.4f} "
        f"paths {len(report.paths)}"
    ]
    for p in report.paths:
        steps = [ckg.entity_label(p.nodes[0])]
        for rel, wgt, node in zip(p.relations, p.weights, p.nodes[1:]):
            steps.append(f"-[{ckg.relation_label(rel)}:{wgt:.4f}]->")
            steps.append(ckg.entity_label(node))
        lines.append(" ".join(steps) + f"  score={p.score:.4f}")
    return lines
