"""Bundled synthetic dataset with planted structure.

Items are grouped into clusters; each cluster owns a disjoint pool of
attributes and every item links to a few attributes from its own pool. The
relation type of an item-attribute edge is the attribute's cluster, so
relation embeddings carry real signal. Each user prefers one cluster and
draws most interactions from it, plus uniform noise. A model that picks up
the item-attribute structure can therefore rank the held-out in-cluster
items far above chance.

Files are written in the standard benchmark layout (user-major interaction
lines, ``head relation tail`` triples), so the regular prepare/train/eval
pipeline runs on them unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import as_rng, check_positive_int, check_unit_interval


@dataclass(frozen=True)
class SyntheticSpec:
    n_users: int = 200
    n_items: int = 100
    n_attributes: int = 50
    n_clusters: int = 5
    interactions_per_user: tuple[int, int] = (12, 18)
    attributes_per_item: tuple[int, int] = (2, 4)
    noise: float = 0.2
    seed: int = 0

    def __post_init__(self):
        check_positive_int("n_users", self.n_users)
        check_positive_int("n_items", self.n_items)
        check_positive_int("n_attributes", self.n_attributes)
        check_positive_int("n_clusters", self.n_clusters)
        check_unit_interval("noise", self.noise)
        if self.n_clusters > min(self.n_items, self.n_attributes):
            raise ValueError("more clusters than items or attributes")

    @property
    def n_relations(self) -> int:
        return self.n_clusters


@dataclass(frozen=True)
class SyntheticData:
    interactions: list[tuple[int, int]]
    kg_triples: list[tuple[int, int, int]]
    item_cluster: np.ndarray
    user_cluster: np.ndarray


def generate(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticData:
    rng = as_rng(spec.seed)
    item_cluster = np.arange(spec.n_items) % spec.n_clusters
    attr_cluster = np.arange(spec.n_attributes) % spec.n_clusters
    # attribute entity ids live after the item ids in the shared space
    attr_ids = spec.n_items + np.arange(spec.n_attributes)

    kg: set[tuple[int, int, int]] = set()
    lo_a, hi_a = spec.attributes_per_item
    for item in range(spec.n_items):
        pool = attr_ids[attr_cluster == item_cluster[item]]
        n_attr = int(rng.integers(lo_a, hi_a + 1))
        chosen = rng.choice(pool, size=min(n_attr, pool.size), replace=False)
        rel = int(item_cluster[item])  # relation type encodes the cluster
        for a in np.sort(chosen):
            kg.add((item, rel, int(a)))

    interactions: set[tuple[int, int]] = set()
    user_cluster = np.empty(spec.n_users, dtype=np.int64)
    lo_i, hi_i = spec.interactions_per_user
    all_items = np.arange(spec.n_items)
    for user in range(spec.n_users):
        c = int(rng.integers(spec.n_clusters))
        user_cluster[user] = c
        own = all_items[item_cluster == c]
        other = all_items[item_cluster != c]
        k = int(rng.integers(lo_i, hi_i + 1))
        n_noise = int(round(k * spec.noise))
        n_own = min(k - n_noise, own.size)
        picks = list(rng.choice(own, size=n_own, replace=False))
        if n_noise and other.size:
            picks += list(rng.choice(other, size=min(n_noise, other.size), replace=False))
        for item in picks:
            interactions.add((user, int(item)))

    return SyntheticData(
        interactions=sorted(interactions),
        kg_triples=sorted(kg),
        item_cluster=item_cluster,
        user_cluster=user_cluster,
    )


def write_dataset(data: SyntheticData, out_dir) -> dict[str, Path]:
    """Write ``interactions.txt`` and ``kg.txt`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inter_path = out_dir / "interactions.txt"
    kg_path = out_dir / "kg.txt"

    by_user: dict[int, list[int]] = {}
    for u, i in data.interactions:
        by_user.setdefault(u, []).append(i)
    with open(inter_path, "w", encoding="utf-8") as fh:
        for u in sorted(by_user):
            items = " ".join(str(i) for i in sorted(by_user[u]))
            fh.write(f"{u} {items}\n")
    with open(kg_path, "w", encoding="utf-8") as fh:
        for h, r, t in data.kg_triples:
            fh.write(f"{h} {r} {t}\n")
    return {"interactions": inter_path, "kg": kg_path}
