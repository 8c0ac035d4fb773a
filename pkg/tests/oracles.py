"""Independent brute-force oracles used to cross-check the implementation.

Everything here is written in plain loops over sets and lists, deliberately
sharing no code with the package internals it validates.
"""

import math


def brute_recall(ranked_items, test_items, k):
    test = set(test_items)
    hits = [i for i in list(ranked_items)[:k] if i in test]
    return len(hits) / len(test)


def brute_ndcg(ranked_items, test_items, k):
    test = set(test_items)
    dcg = 0.0
    for rank, item in enumerate(list(ranked_items)[:k], start=1):
        if item in test:
            dcg += 1.0 / math.log2(rank + 1)
    ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(len(test), k) + 1))
    return dcg / ideal


def brute_rank(scores_by_item, excluded):
    """Descending-score, tie-by-ascending-id ordering of the remaining items."""
    cand = [i for i in sorted(scores_by_item) if i not in excluded]
    return sorted(cand, key=lambda i: (-scores_by_item[i], i))


def brute_valid_tails(triples, n_entities, h, r):
    present = {t for hh, rr, t in triples if hh == h and rr == r}
    return [t for t in range(n_entities) if t not in present]


def brute_ego_size(triples, h):
    return sum(1 for hh, _, _ in triples if hh == h)


def brute_ncore(pairs, n):
    """Fixed point of dropping users/items with fewer than n interactions."""
    pairs = set(pairs)
    while True:
        ucnt, icnt = {}, {}
        for u, i in pairs:
            ucnt[u] = ucnt.get(u, 0) + 1
            icnt[i] = icnt.get(i, 0) + 1
        keep = {(u, i) for u, i in pairs if ucnt[u] >= n and icnt[i] >= n}
        if keep == pairs:
            return pairs
        pairs = keep


def brute_paths(edges, start, goal, max_hops):
    """All simple paths start->goal up to max_hops.

    ``edges`` is a list of (head, relation, tail, weight); returns a list of
    (nodes, relations, weights) tuples.
    """
    adjacency = {}
    for h, r, t, w in edges:
        adjacency.setdefault(h, []).append((r, t, w))
    results = []

    def walk(node, nodes, rels, weights):
        if node == goal and rels:
            results.append((tuple(nodes), tuple(rels), tuple(weights)))
            return
        if len(rels) == max_hops:
            return
        for r, t, w in adjacency.get(node, []):
            if t in nodes:
                continue
            walk(t, nodes + [t], rels + [r], weights + [w])

    walk(start, [start], [], [])
    return results
