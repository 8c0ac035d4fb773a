"""Full-catalog ranking with train exclusion, Recall@K and NDCG@K."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import CollaborativeKG
from .recommender import FinalRepresentations
from .validation import check_choice, check_index, check_positive_int

SPLITS = ("train", "test", "validation")


@dataclass(frozen=True)
class RankingResult:
    """Items ordered by descending score; ties break on ascending item id."""

    user: int
    item_ids: np.ndarray
    scores: np.ndarray

    def top(self, k: int) -> np.ndarray:
        return self.item_ids[:k]


@dataclass
class MetricReport:
    k: int
    recall: float
    ndcg: float
    n_users: int
    per_user: list[tuple[int, float, float]] = field(default_factory=list)


def rank_items(
    reps: FinalRepresentations,
    ckg: CollaborativeKG,
    u: int,
    exclude_train: bool = True,
) -> RankingResult:
    """Score every candidate item for one user.

    Training positives are removed from the candidate set; a user who has
    interacted with the whole catalog yields an empty ranking.
    """
    check_index("user", u, ckg.n_users)
    scores = reps.items @ reps.users[u]
    if exclude_train:
        lo = np.searchsorted(ckg.train.pairs[:, 0], u)
        hi = np.searchsorted(ckg.train.pairs[:, 0], u + 1)
        train_items = ckg.train.pairs[lo:hi, 1]
        keep = np.ones(ckg.n_items, dtype=bool)
        keep[train_items] = False
        cand = np.nonzero(keep)[0]
    else:
        cand = np.arange(ckg.n_items)
    cand_scores = scores[cand]
    order = np.lexsort((cand, -cand_scores))
    return RankingResult(user=u, item_ids=cand[order], scores=cand_scores[order])


def recall_at_k(ranking, test_items, k: int) -> float:
    """Fraction of held-out items appearing in the top k."""
    check_positive_int("k", k)
    ranked = ranking.item_ids if isinstance(ranking, RankingResult) else np.asarray(ranking)
    test = set(int(i) for i in test_items)
    if not test:
        raise ValueError("user has no held-out items")
    hits = sum(1 for i in ranked[:k] if int(i) in test)
    return hits / len(test)


def ndcg_at_k(ranking, test_items, k: int) -> float:
    """Binary-gain NDCG: DCG with 1/log2(rank+1) over hits, divided by the
    ideal DCG of min(|test|, k) leading hits."""
    check_positive_int("k", k)
    ranked = ranking.item_ids if isinstance(ranking, RankingResult) else np.asarray(ranking)
    test = set(int(i) for i in test_items)
    if not test:
        raise ValueError("user has no held-out items")
    dcg = 0.0
    for rank, item in enumerate(ranked[:k], start=1):
        if int(item) in test:
            dcg += 1.0 / math.log2(rank + 1)
    ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(len(test), k) + 1))
    return dcg / ideal


def evaluate(
    reps: FinalRepresentations,
    ckg: CollaborativeKG,
    split: str = "test",
    k: int = 20,
    exclude_train: bool = True,
) -> MetricReport:
    """Mean Recall@K and NDCG@K over users with held-out items in ``split``.

    Users whose candidate set is empty after train exclusion are skipped, as
    are users without held-out items; means run over the remaining users.
    """
    check_choice("split", split, SPLITS)
    check_positive_int("k", k)
    inter = getattr(ckg, "validation" if split == "validation" else split)
    held = inter.items_by_user()
    per_user: list[tuple[int, float, float]] = []
    for u in range(ckg.n_users):
        test_items = held[u]
        if test_items.size == 0:
            continue
        ranking = rank_items(reps, ckg, u, exclude_train=exclude_train)
        if ranking.item_ids.size == 0:
            continue
        per_user.append(
            (u, recall_at_k(ranking, test_items, k), ndcg_at_k(ranking, test_items, k))
        )
    if not per_user:
        raise ValueError(f"no evaluable user in split {split!r}")
    recalls = [r for _, r, _ in per_user]
    ndcgs = [n for _, _, n in per_user]
    return MetricReport(
        k=k,
        recall=float(np.mean(recalls)),
        ndcg=float(np.mean(ndcgs)),
        n_users=len(per_user),
        per_user=per_user,
    )


def write_report(report: MetricReport, ckg: CollaborativeKG, out_prefix) -> tuple[Path, Path]:
    """Emit a key-value summary and a JSONL file with one record per user."""
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    summary_path = out_prefix.with_suffix(".summary.txt")
    records_path = out_prefix.with_suffix(".users.jsonl")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(f"k: {report.k}\n")
        fh.write(f"users_evaluated: {report.n_users}\n")
        fh.write(f"recall@{report.k}: {report.recall!r}\n")
        fh.write(f"ndcg@{report.k}: {report.ndcg!r}\n")
    with open(records_path, "w", encoding="utf-8") as fh:
        for u, rec, ndcg in report.per_user:
            fh.write(json.dumps({
                "type": "user",
                "user": int(ckg.train.user_ids[u]),
                "recall": rec,
                "ndcg": ndcg,
            }, sort_keys=True) + "\n")
        fh.write(json.dumps({
            "type": "summary",
            "k": report.k,
            "users": report.n_users,
            "recall": report.recall,
            "ndcg": report.ndcg,
        }, sort_keys=True) + "\n")
    return summary_path, records_path
