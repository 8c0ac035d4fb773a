"""Collaborative knowledge graph: entity registry, triplet store, ego index.

Entity ids are laid out users first, then items, then attributes:

    user u        -> u
    item i        -> n_users + i
    attribute a   -> n_users + n_items + a

Relation 0 is the user-item interaction; knowledge relations follow at
1..L. With inverse relations enabled every triplet (h, r, t) is mirrored as
(t, r + L + 1, h), so messages can flow both ways during propagation.

Triplets are stored as three aligned arrays sorted by (head, relation, tail)
with a CSR-style offset table, which makes ego-network lookups, per-head
softmax segments, and attention bookkeeping cheap and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .data import InteractionSet, KnowledgeTriples
from .exceptions import SparsityError
from .validation import as_rng, check_index

INTERACT_RELATION = 0


@dataclass(frozen=True)
class EgoNetwork:
    """A head entity with all triplets it heads, sorted by (relation, tail)."""

    head: int
    relations: np.ndarray
    tails: np.ndarray

    def __len__(self) -> int:
        return self.relations.shape[0]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return zip(self.relations.tolist(), self.tails.tolist())


@dataclass(frozen=True)
class CollaborativeKG:
    """Immutable union of the interaction graph and the knowledge graph."""

    n_users: int
    n_items: int
    n_attributes: int
    n_kg_relations: int
    inverse: bool
    heads: np.ndarray
    rels: np.ndarray
    tails: np.ndarray
    head_ptr: np.ndarray
    train: InteractionSet
    test: InteractionSet
    validation: InteractionSet
    attribute_ids: tuple[int, ...] = ()
    relation_ids: tuple[int, ...] = ()
    triple_set: frozenset = field(repr=False, default=frozenset())

    @property
    def n_entities(self) -> int:
        return self.n_users + self.n_items + self.n_attributes

    @property
    def n_relations(self) -> int:
        base = self.n_kg_relations + 1
        return 2 * base if self.inverse else base

    @property
    def n_triples(self) -> int:
        return self.heads.shape[0]

    def inverse_of(self, rel: int) -> int:
        """Id of the mirror relation (defined only when inverse is enabled)."""
        if not self.inverse:
            raise ValueError("graph was built without inverse relations")
        base = self.n_kg_relations + 1
        return rel + base if rel < base else rel - base

    def is_inverse_relation(self, rel: int) -> bool:
        return self.inverse and rel > self.n_kg_relations

    # entity id helpers -----------------------------------------------------
    def user_entity(self, u: int) -> int:
        return check_index("user", u, self.n_users)

    def item_entity(self, i: int) -> int:
        return self.n_users + check_index("item", i, self.n_items)

    def attribute_entity(self, a: int) -> int:
        return self.n_users + self.n_items + check_index("attribute", a, self.n_attributes)

    def entity_kind(self, ent: int) -> str:
        check_index("entity", ent, self.n_entities)
        if ent < self.n_users:
            return "user"
        if ent < self.n_users + self.n_items:
            return "item"
        return "attribute"

    def entity_label(self, ent: int) -> str:
        """Human-readable ``kind:original_id`` label for exports."""
        kind = self.entity_kind(ent)
        if kind == "user":
            orig = self.train.user_ids[ent]
        elif kind == "item":
            orig = self.train.item_ids[ent - self.n_users]
        else:
            idx = ent - self.n_users - self.n_items
            orig = self.attribute_ids[idx] if self.attribute_ids else idx
        return f"{kind}:{orig}"

    def relation_label(self, rel: int) -> str:
        check_index("relation", rel, self.n_relations)
        base = self.n_kg_relations + 1
        r = rel
        suffix = ""
        if self.inverse and rel >= base:
            r = rel - base
            suffix = "^-1"
        if r == INTERACT_RELATION:
            return "interact" + suffix
        orig = self.relation_ids[r - 1] if self.relation_ids else r - 1
        return f"rel{orig}{suffix}"

    # graph access ----------------------------------------------------------
    def ego(self, h: int) -> EgoNetwork:
        check_index("head entity", h, self.n_entities)
        lo, hi = self.head_ptr[h], self.head_ptr[h + 1]
        return EgoNetwork(head=h, relations=self.rels[lo:hi], tails=self.tails[lo:hi])

    def has_triple(self, h: int, r: int, t: int) -> bool:
        return (int(h), int(r), int(t)) in self.triple_set

    def edge_position(self, h: int, r: int, t: int) -> int:
        """Index of a stored triplet in the aligned arrays; -1 if absent."""
        lo, hi = self.head_ptr[h], self.head_ptr[h + 1]
        seg_r = self.rels[lo:hi]
        seg_t = self.tails[lo:hi]
        idx = np.searchsorted(seg_r * (self.n_entities + 1) + seg_t, r * (self.n_entities + 1) + t)
        if idx < seg_r.size and seg_r[idx] == r and seg_t[idx] == t:
            return int(lo + idx)
        return -1

    def train_items_by_user(self) -> list[np.ndarray]:
        return self.train.items_by_user()


def ego(ckg: CollaborativeKG, h: int) -> EgoNetwork:
    return ckg.ego(h)


def build_ckg(
    train: InteractionSet,
    kg: KnowledgeTriples | None,
    *,
    test: InteractionSet | None = None,
    validation: InteractionSet | None = None,
    inverse: bool = True,
) -> CollaborativeKG:
    """Assemble the union graph from the train split and the KG.

    Only training interactions become ``interact`` triplets; held-out splits
    ride along purely for evaluation. With ``inverse`` every stored triplet
    gains a mirrored copy under its inverse relation id.
    """
    n_users = train.n_users
    n_items = train.n_items
    if kg is None:
        kg = KnowledgeTriples(
            n_items=n_items,
            n_attributes=0,
            n_relations=0,
            triples=np.empty((0, 3), dtype=np.int64),
            attribute_ids=(),
            relation_ids=(),
        )
    if kg.n_items not in (0, n_items):
        raise ValueError(
            f"knowledge graph indexed over {kg.n_items} items, interactions have {n_items}"
        )

    def empty_like(base: InteractionSet) -> InteractionSet:
        return InteractionSet(
            n_users=base.n_users,
            n_items=base.n_items,
            pairs=np.empty((0, 2), dtype=np.int64),
            user_ids=base.user_ids,
            item_ids=base.item_ids,
        )

    test = test if test is not None else empty_like(train)
    validation = validation if validation is not None else empty_like(train)

    base = kg.n_relations + 1  # interact + KG relations
    rows = []
    if len(train):
        u = train.pairs[:, 0]
        i = train.pairs[:, 1] + n_users
        rows.append(np.column_stack([u, np.zeros(len(train), dtype=np.int64), i]))
    if len(kg):
        h = kg.triples[:, 0] + n_users
        r = kg.triples[:, 1] + 1
        t = kg.triples[:, 2] + n_users
        rows.append(np.column_stack([h, r, t]))
    triples = np.concatenate(rows) if rows else np.empty((0, 3), dtype=np.int64)
    if inverse and triples.size:
        mirrored = np.column_stack([triples[:, 2], triples[:, 1] + base, triples[:, 0]])
        triples = np.concatenate([triples, mirrored])

    order = np.lexsort((triples[:, 2], triples[:, 1], triples[:, 0]))
    triples = triples[order]
    n_entities = n_users + n_items + kg.n_attributes
    head_ptr = np.searchsorted(triples[:, 0], np.arange(n_entities + 1))
    return CollaborativeKG(
        n_users=n_users,
        n_items=n_items,
        n_attributes=kg.n_attributes,
        n_kg_relations=kg.n_relations,
        inverse=inverse,
        heads=triples[:, 0].copy(),
        rels=triples[:, 1].copy(),
        tails=triples[:, 2].copy(),
        head_ptr=head_ptr,
        train=train,
        test=test,
        validation=validation,
        attribute_ids=kg.attribute_ids,
        relation_ids=kg.relation_ids,
        triple_set=frozenset((int(h), int(r), int(t)) for h, r, t in triples),
    )


def sample_negative_tail(
    ckg: CollaborativeKG,
    h: int,
    r: int,
    rng,
    max_attempts: int = 100,
) -> int:
    """Uniform corrupted tail t' with (h, r, t') absent from the graph.

    Rejection sampling over all entities, bounded by ``max_attempts``; on
    exhaustion returns a uniform entity so the sampler always terminates.
    """
    rng = as_rng(rng)
    n = ckg.n_entities
    for _ in range(max_attempts):
        cand = int(rng.integers(n))
        if (h, r, cand) not in ckg.triple_set:
            return cand
    return int(rng.integers(n))


def sample_negative_tails(ckg: CollaborativeKG, heads, rels, rng, max_attempts: int = 100) -> np.ndarray:
    """Vectorized convenience wrapper over :func:`sample_negative_tail`."""
    rng = as_rng(rng)
    out = np.empty(len(heads), dtype=np.int64)
    for k, (h, r) in enumerate(zip(heads, rels)):
        out[k] = sample_negative_tail(ckg, int(h), int(r), rng, max_attempts)
    return out


def sample_bpr_triple(
    ckg: CollaborativeKG,
    rng,
    *,
    _cache=None,
    max_attempts: int = 100,
) -> tuple[int, int, int]:
    """One (user, positive item, negative item) ranking triple.

    The user is uniform over users with at least one training item, the
    positive uniform over that user's training items, the negative uniform
    over items the user has not interacted with in train.
    """
    rng = as_rng(rng)
    items_by_user, eligible = _cache if _cache is not None else _bpr_cache(ckg)
    if eligible.size == 0:
        raise SparsityError("no user has training interactions")
    for _ in range(max_attempts):
        u = int(eligible[rng.integers(eligible.size)])
        pos_items = items_by_user[u]
        if pos_items.size >= ckg.n_items:
            continue  # user saw everything; pick someone else
        i = int(pos_items[rng.integers(pos_items.size)])
        while True:
            j = int(rng.integers(ckg.n_items))
            if not _in_sorted(pos_items, j):
                return u, i, j
    raise SparsityError("could not sample a user with unseen items")


def _in_sorted(arr: np.ndarray, value: int) -> bool:
    idx = np.searchsorted(arr, value)
    return idx < arr.size and arr[idx] == value


def _bpr_cache(ckg: CollaborativeKG):
    items_by_user = ckg.train_items_by_user()
    eligible = np.array(
        [u for u, its in enumerate(items_by_user) if its.size > 0], dtype=np.int64
    )
    return items_by_user, eligible


def sample_bpr_batch(ckg: CollaborativeKG, size: int, rng, _cache=None) -> np.ndarray:
    """(size, 3) array of ranking triples sharing one cached index."""
    rng = as_rng(rng)
    cache = _cache if _cache is not None else _bpr_cache(ckg)
    out = np.empty((size, 3), dtype=np.int64)
    for k in range(size):
        out[k] = sample_bpr_triple(ckg, rng, _cache=cache)
    return out
