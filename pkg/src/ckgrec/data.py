"""Interaction and knowledge-triple ingestion, N-core filtering, splitting.

File formats follow the widely circulated benchmark layout:

* interaction files: one user per line, ``user_id item_id item_id ...``,
  whitespace separated, non-negative integers; a user may appear on several
  lines and duplicate pairs collapse;
* knowledge-graph files: one triple per line, ``head relation tail``.

Internal ids are contiguous and assigned by sorting the original ids, so any
re-run over the same files reproduces the same mapping.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DataFormatError, SparsityError
from .validation import check_positive_int

FOLDS = ("train", "test", "validation")


@dataclass(frozen=True)
class InteractionSet:
    """Deduplicated user-item pairs over contiguous internal ids.

    ``pairs`` is an (P, 2) int64 array sorted by (user, item). ``user_ids``
    and ``item_ids`` map internal id -> original id; the id spaces are shared
    by every split derived from the same source.
    """

    n_users: int
    n_items: int
    pairs: np.ndarray
    user_ids: tuple[int, ...]
    item_ids: tuple[int, ...]

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.size and (
            pairs[:, 0].max() >= self.n_users
            or pairs[:, 1].max() >= self.n_items
            or pairs.min() < 0
        ):
            raise ValueError("interaction ids out of range")
        # canonical (user, item) ordering so per-user slices stay sorted
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        if pairs.shape[0] > 1:
            same = np.all(pairs[1:] == pairs[:-1], axis=1)
            if np.any(same):
                raise ValueError("duplicate interaction pairs")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def pair_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(i)) for u, i in self.pairs}

    def items_by_user(self) -> list[np.ndarray]:
        """Per-user sorted item arrays, indexable by internal user id."""
        out = [np.empty(0, dtype=np.int64) for _ in range(self.n_users)]
        if len(self) == 0:
            return out
        users = self.pairs[:, 0]
        bounds = np.searchsorted(users, np.arange(self.n_users + 1))
        for u in range(self.n_users):
            out[u] = self.pairs[bounds[u] : bounds[u + 1], 1].copy()
        return out

    def user_index(self) -> dict[int, int]:
        return {orig: idx for idx, orig in enumerate(self.user_ids)}

    def item_index(self) -> dict[int, int]:
        return {orig: idx for idx, orig in enumerate(self.item_ids)}


@dataclass(frozen=True)
class KnowledgeTriples:
    """Item-attribute triples over the item id space extended by attributes.

    Entities 0..n_items-1 are the items of the companion interaction set;
    attribute entities follow at n_items..n_items+n_attributes-1. Relations
    are contiguous 0..n_relations-1.
    """

    n_items: int
    n_attributes: int
    n_relations: int
    triples: np.ndarray  # (K, 3) int64 rows (head, relation, tail)
    attribute_ids: tuple[int, ...]
    relation_ids: tuple[int, ...]

    def __post_init__(self):
        n_ent = self.n_items + self.n_attributes
        if self.triples.size:
            h, r, t = self.triples[:, 0], self.triples[:, 1], self.triples[:, 2]
            if h.min() < 0 or h.max() >= n_ent or t.min() < 0 or t.max() >= n_ent:
                raise ValueError("triple entity ids out of range")
            if r.min() < 0 or r.max() >= self.n_relations:
                raise ValueError("triple relation ids out of range")

    def __len__(self) -> int:
        return self.triples.shape[0]


def _int_tokens(path, line_no: int, line: str) -> list[int]:
    toks = line.split()
    vals = []
    for tok in toks:
        try:
            v = int(tok)
        except ValueError:
            raise DataFormatError(path, line_no, f"non-integer token {tok!r}") from None
        if v < 0:
            raise DataFormatError(path, line_no, f"negative id {v}")
        vals.append(v)
    return vals


def _make_interactions(pair_set: Iterable[tuple[int, int]]) -> InteractionSet:
    """Compact original-id pairs into a canonical InteractionSet."""
    pairs = sorted(set(pair_set))
    users = sorted({u for u, _ in pairs})
    items = sorted({i for _, i in pairs})
    umap = {orig: idx for idx, orig in enumerate(users)}
    imap = {orig: idx for idx, orig in enumerate(items)}
    arr = np.array(
        sorted((umap[u], imap[i]) for u, i in pairs), dtype=np.int64
    ).reshape(len(pairs), 2)
    return InteractionSet(
        n_users=len(users),
        n_items=len(items),
        pairs=arr,
        user_ids=tuple(users),
        item_ids=tuple(items),
    )


def load_interactions(paths) -> InteractionSet:
    """Parse one or more user-major interaction files into a single set."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    raw: set[tuple[int, int]] = set()
    for path in paths:
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                vals = _int_tokens(path, line_no, line)
                user, items = vals[0], vals[1:]
                raw.update((user, item) for item in items)
    if not raw:
        raise DataFormatError(paths[-1], 0, "no interactions found")
    return _make_interactions(raw)


def load_kg(path, item_index: Mapping[int, int] | None = None) -> KnowledgeTriples:
    """Parse a triple file; entities that are not known items become attributes.

    ``item_index`` maps original item ids to internal item ids (from the
    interaction set the graph will be joined with). Without it, every entity
    is treated as an attribute.
    """
    path = Path(path)
    item_index = dict(item_index or {})
    n_items = (max(item_index.values()) + 1) if item_index else 0
    raw: set[tuple[int, int, int]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            vals = _int_tokens(path, line_no, line)
            if len(vals) != 3:
                raise DataFormatError(
                    path, line_no, f"expected 'head relation tail', got {len(vals)} fields"
                )
            raw.add((vals[0], vals[1], vals[2]))

    entities = {e for h, _, t in raw for e in (h, t)}
    attributes = sorted(e for e in entities if e not in item_index)
    relations = sorted({r for _, r, _ in raw})
    amap = {orig: n_items + idx for idx, orig in enumerate(attributes)}
    rmap = {orig: idx for idx, orig in enumerate(relations)}

    def ent(orig: int) -> int:
        return item_index.get(orig, amap.get(orig, -1))

    rows = sorted((ent(h), rmap[r], ent(t)) for h, r, t in raw)
    triples = np.array(rows, dtype=np.int64).reshape(len(rows), 3)
    return KnowledgeTriples(
        n_items=n_items,
        n_attributes=len(attributes),
        n_relations=len(relations),
        triples=triples,
        attribute_ids=tuple(attributes),
        relation_ids=tuple(relations),
    )


def ncore_filter(inter: InteractionSet, n: int) -> InteractionSet:
    """Iteratively drop users and items with fewer than ``n`` interactions.

    Runs to a fixed point and re-compacts ids. Raises SparsityError when
    nothing survives.
    """
    check_positive_int("n", n)
    pairs = {(inter.user_ids[u], inter.item_ids[i]) for u, i in inter.pairs}
    while True:
        ucnt: dict[int, int] = {}
        icnt: dict[int, int] = {}
        for u, i in pairs:
            ucnt[u] = ucnt.get(u, 0) + 1
            icnt[i] = icnt.get(i, 0) + 1
        keep = {
            (u, i) for u, i in pairs if ucnt[u] >= n and icnt[i] >= n
        }
        if keep == pairs:
            break
        pairs = keep
    if not pairs:
        raise SparsityError(f"no interactions survive {n}-core filtering")
    return _make_interactions(pairs)


def split(
    inter: InteractionSet,
    ratios: Sequence[float] = (0.7, 0.2, 0.1),
    seed: int = 0,
) -> tuple[InteractionSet, InteractionSet, InteractionSet]:
    """Per-user random partition into (train, test, validation).

    Test and validation take floor(k * ratio) of each user's k interactions;
    train receives the remainder, so every user keeps at least one training
    pair. The three outputs share the parent's id spaces.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    if ratios[0] <= 0:
        raise ValueError("train ratio must be positive")
    rng = np.random.default_rng(seed)
    folds: dict[str, list[np.ndarray]] = {f: [] for f in FOLDS}
    by_user = inter.items_by_user()
    for u, items in enumerate(by_user):
        k = items.size
        if k == 0:
            raise SparsityError(f"user {inter.user_ids[u]} has no interactions")
        perm = items[rng.permutation(k)]
        n_test = int(np.floor(k * ratios[1]))
        n_valid = int(np.floor(k * ratios[2]))
        n_train = k - n_test - n_valid
        cuts = np.split(perm, [n_train, n_train + n_test])
        for fold, chunk in zip(FOLDS, cuts):
            if chunk.size:
                ucol = np.full(chunk.size, u, dtype=np.int64)
                folds[fold].append(np.column_stack([ucol, chunk]))

    def build(chunks: list[np.ndarray]) -> InteractionSet:
        if chunks:
            arr = np.concatenate(chunks)
            arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
        else:
            arr = np.empty((0, 2), dtype=np.int64)
        return InteractionSet(
            n_users=inter.n_users,
            n_items=inter.n_items,
            pairs=arr,
            user_ids=inter.user_ids,
            item_ids=inter.item_ids,
        )

    return build(folds["train"]), build(folds["test"]), build(folds["validation"])


def write_split_manifest(path, train: InteractionSet, test: InteractionSet, validation: InteractionSet) -> None:
    """Line-oriented ``user item fold`` manifest using original ids."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for fold, part in zip(FOLDS, (train, test, validation)):
            for u, i in part.pairs:
                fh.write(f"{part.user_ids[u]} {part.item_ids[i]} {fold}\n")


def read_split_manifest(path) -> tuple[InteractionSet, InteractionSet, InteractionSet]:
    """Rebuild the three folds (with shared id spaces) from a manifest."""
    path = Path(path)
    per_fold: dict[str, set[tuple[int, int]]] = {f: set() for f in FOLDS}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            toks = line.split()
            if len(toks) != 3 or toks[2] not in FOLDS:
                raise DataFormatError(path, line_no, f"expected 'user item fold', got {line!r}")
            u, i = _int_tokens(path, line_no, " ".join(toks[:2]))
            per_fold[toks[2]].add((u, i))
    if not per_fold["train"]:
        raise DataFormatError(path, 0, "manifest holds no training pairs")

    users = sorted({u for fold in per_fold.values() for u, _ in fold})
    items = sorted({i for fold in per_fold.values() for _, i in fold})
    umap = {orig: idx for idx, orig in enumerate(users)}
    imap = {orig: idx for idx, orig in enumerate(items)}

    def build(pair_set: set[tuple[int, int]]) -> InteractionSet:
        rows = sorted((umap[u], imap[i]) for u, i in pair_set)
        arr = np.array(rows, dtype=np.int64).reshape(len(rows), 2)
        return InteractionSet(
            n_users=len(users),
            n_items=len(items),
            pairs=arr,
            user_ids=tuple(users),
            item_ids=tuple(items),
        )

    return build(per_fold["train"]), build(per_fold["test"]), build(per_fold["validation"])
