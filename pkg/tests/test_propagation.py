import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckgrec.config import PropagationConfig
from ckgrec.data import InteractionSet, KnowledgeTriples
from ckgrec.graph import build_ckg
from ckgrec.numeric import leaky_relu
from ckgrec.params import init_params
from ckgrec.propagation import (
    aggregate_ego,
    attention_index,
    attention_score,
    bi_interaction,
    gcn_aggregate,
    graphsage_aggregate,
    normalize_ego,
    propagate,
)
from ckgrec.recommender import final_reps, representations

from conftest import toy_model_config


class TestAttentionScore:
    def test_zero_tail_vector_scores_zero(self, toy_setup):
        ckg, cfg, params = toy_setup
        h_star = np.ones(cfg.dim)
        assert attention_score(params, 0, 0, 4, h_star, np.zeros(cfg.dim)) == 0.0

    def test_identity_projection_hand_value(self, toy_setup):
        ckg, cfg, params = toy_setup
        params.embed.entity_proj[:] = 0.0
        params.embed.relation_proj[:] = 0.0
        params.embed.relation_emb[:] = 0.0
        e1 = np.zeros(cfg.dim)
        e1[0] = 1.0
        # (t*)^T tanh(h*) with h* = t* = e1
        assert attention_score(params, 0, 0, 4, e1, e1) == pytest.approx(np.tanh(1.0))

    def test_depends_only_on_its_own_triplet(self, toy_setup):
        ckg, cfg, params = toy_setup
        rng = np.random.default_rng(0)
        h_star, t_star = rng.normal(size=(2, cfg.dim))
        before = attention_score(params, 1, 2, 5, h_star, t_star)
        params.embed.entity_emb[:] = rng.normal(size=params.embed.entity_emb.shape)
        after = attention_score(params, 1, 2, 5, h_star, t_star)
        assert before == after  # raw embeddings of other entities play no role


class TestNormalizeEgo:
    def test_equal_scores_uniform(self):
        np.testing.assert_allclose(normalize_ego(np.zeros(4)), np.full(4, 0.25))

    def test_hand_softmax(self):
        w = normalize_ego(np.array([0.0, np.log(3.0)]))
        np.testing.assert_allclose(w, [0.25, 0.75])

    def test_shift_invariance(self):
        scores = np.array([0.3, -1.2, 2.0])
        np.testing.assert_allclose(
            normalize_ego(scores), normalize_ego(scores + 123.4), atol=1e-12
        )

    def test_empty_stays_empty(self):
        assert normalize_ego(np.empty(0)).size == 0

    def test_huge_scores_stable(self):
        w = normalize_ego(np.array([1000.0, 1000.0]))
        np.testing.assert_allclose(w, [0.5, 0.5])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12))
    @settings(max_examples=200, deadline=None)
    def test_simplex_property(self, scores):
        w = normalize_ego(np.array(scores, dtype=np.float64))
        assert abs(w.sum() - 1.0) < 1e-9
        assert np.all(w > 0.0) and np.all(w <= 1.0)


class TestAggregators:
    def test_single_neighbor_full_weight(self):
        tails = np.array([[3.0, 4.0]])
        np.testing.assert_array_equal(aggregate_ego(np.array([1.0]), tails), [3.0, 4.0])

    def test_two_neighbors_half_weight(self):
        tails = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(
            aggregate_ego(np.array([0.5, 0.5]), tails), [0.5, 0.5]
        )

    def test_empty_ego_gives_zero(self):
        out = aggregate_ego(np.empty(0), np.empty((0, 3)))
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_bi_interaction_zero_ego(self):
        w = np.eye(3)
        h = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(
            bi_interaction(h, np.zeros(3), w, w), leaky_relu(h)
        )

    def test_bi_interaction_hand_value(self):
        w = np.eye(2)
        ones = np.ones(2)
        # LeakyReLU(2) + LeakyReLU(1) per coordinate
        np.testing.assert_allclose(bi_interaction(ones, ones, w, w), [3.0, 3.0])

    def test_gcn_zero_ego(self):
        rng = np.random.default_rng(1)
        w = rng.normal(size=(3, 2))
        h = rng.normal(size=3)
        np.testing.assert_allclose(
            gcn_aggregate(h, np.zeros(3), w), leaky_relu(h @ w)
        )

    def test_graphsage_output_dim(self):
        w = np.ones((6, 2))
        out = graphsage_aggregate(np.ones(3), np.ones(3), w)
        assert out.shape == (2,)

    def test_three_aggregators_agree_on_zero_ego(self):
        rng = np.random.default_rng(2)
        w1 = np.abs(rng.normal(size=(3, 3)))
        w2 = rng.normal(size=(3, 3))
        sage_w = np.vstack([w1, w2])  # lower block multiplies the zero ego half
        h = np.abs(rng.normal(size=3))
        zero = np.zeros(3)
        bi = bi_interaction(h, zero, w1, w2)
        gcn = gcn_aggregate(h, zero, w1)
        sage = graphsage_aggregate(h, zero, sage_w)
        np.testing.assert_allclose(bi, gcn)
        np.testing.assert_allclose(gcn, sage)


class TestAttentionIndex:
    def test_weights_sum_to_one_per_ego(self, toy_setup):
        ckg, cfg, params = toy_setup
        attn = attention_index(ckg, params, cfg.fusion)
        for h in range(ckg.n_entities):
            w = attn.ego_weights(h)
            if w.size:
                assert abs(w.sum() - 1.0) < 1e-6
                assert np.all(w > 0.0)

    def test_matches_single_triplet_scoring(self, toy_setup):
        from ckgrec.fusion import fuse_all

        ckg, cfg, params = toy_setup
        fused = fuse_all(ckg, params, cfg.fusion)
        attn = attention_index(ckg, params, cfg.fusion)
        h = int(ckg.heads[0])
        lo, hi = ckg.head_ptr[h], ckg.head_ptr[h + 1]
        raw = np.array([
            attention_score(
                params, h, int(ckg.rels[k]), int(ckg.tails[k]),
                fused.head_ctx[k], fused.tail_ctx[k],
            )
            for k in range(lo, hi)
        ])
        np.testing.assert_allclose(attn.ego_weights(h), normalize_ego(raw), atol=1e-12)


def chain_ckg():
    """user0 - item0 - attr0 - attr1 chain (plus inverse edges)."""
    inter = InteractionSet(1, 1, np.array([[0, 0]], dtype=np.int64), (0,), (0,))
    kg = KnowledgeTriples(
        n_items=1, n_attributes=2, n_relations=2,
        triples=np.array([[0, 0, 1], [1, 1, 2]], dtype=np.int64),
        attribute_ids=(50, 51), relation_ids=(0, 1),
    )
    return build_ckg(inter, kg, inverse=True)


class TestPropagate:
    def test_single_edge_unrolls_to_bi_interaction(self):
        inter = InteractionSet(1, 1, np.array([[0, 0]], dtype=np.int64), (0,), (0,))
        ckg = build_ckg(inter, None, inverse=False)  # one edge: user -> item
        cfg = toy_model_config(layer_dims=(4,), node_dropout=0.0, dim=4)
        params = init_params(ckg.n_entities, ckg.n_relations, cfg, seed=0)
        attn = attention_index(ckg, params, cfg.fusion)
        from ckgrec.fusion import fuse_all

        fused = fuse_all(ckg, params, cfg.fusion)
        tables = propagate(ckg, fused.table, attn, params.layers, cfg.propagation)
        lp = params.layers[0]
        expected_user = bi_interaction(fused.table[0], fused.table[1], lp.w1, lp.w2)
        expected_item = bi_interaction(fused.table[1], np.zeros(4), lp.w1, lp.w2)
        np.testing.assert_allclose(tables[0][0], expected_user)
        np.testing.assert_allclose(tables[0][1], expected_item)

    def test_deterministic_without_dropout(self, toy_setup):
        ckg, cfg, params = toy_setup
        attn = attention_index(ckg, params, cfg.fusion)
        from ckgrec.fusion import fuse_all

        table0 = fuse_all(ckg, params, cfg.fusion).table
        a = propagate(ckg, table0, attn, params.layers, cfg.propagation)
        b = propagate(ckg, table0, attn, params.layers, cfg.propagation)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_layer_dims_shrink(self, toy_setup):
        ckg, cfg, params = toy_setup
        attn = attention_index(ckg, params, cfg.fusion)
        from ckgrec.fusion import fuse_all

        table0 = fuse_all(ckg, params, cfg.fusion).table
        tables = propagate(ckg, table0, attn, params.layers, cfg.propagation)
        assert [t.shape[1] for t in tables] == list(cfg.propagation.layer_dims)

    def test_locality_two_layers(self):
        ckg = chain_ckg()
        cfg = toy_model_config(layer_dims=(5, 3))
        params = init_params(ckg.n_entities, ckg.n_relations, cfg, seed=7)

        def head_layer2(p):
            attn = attention_index(ckg, p, cfg.fusion)
            from ckgrec.fusion import fuse_all

            table0 = fuse_all(ckg, p, cfg.fusion).table
            return propagate(ckg, table0, attn, p.layers, cfg.propagation)[1][0]

        base = head_layer2(params)
        # attr1 (entity 3) is three hops from the user: no influence at L=2
        far = params.copy()
        far.embed.entity_emb[3] += 1.0
        far.embed.entity_proj[3] -= 0.5
        np.testing.assert_array_equal(head_layer2(far), base)
        # attr0 (entity 2) is two hops away: influence must show up
        near = params.copy()
        near.embed.entity_emb[2] += 1.0
        assert not np.array_equal(head_layer2(near), base)

    def test_dropout_mean_matches_dropout_off(self):
        # linear operating point: everything positive keeps LeakyReLU affine
        inter = InteractionSet(1, 2, np.array([[0, 0], [0, 1]], dtype=np.int64),
                               (0,), (0, 1))
        ckg = build_ckg(inter, None, inverse=True)
        cfg = toy_model_config(layer_dims=(3,), node_dropout=0.4, dim=3)
        params = init_params(ckg.n_entities, ckg.n_relations, cfg, seed=1)
        for lp in params.layers:
            lp.w1 = np.abs(lp.w1)
            lp.w2 = np.abs(lp.w2)
        attn = attention_index(ckg, params, cfg.fusion)
        table0 = np.abs(np.random.default_rng(0).normal(size=(ckg.n_entities, 3))) + 0.1
        off = propagate(ckg, table0, attn, params.layers, cfg.propagation)[-1]

        rng = np.random.default_rng(42)
        n = 1000
        acc = np.zeros_like(off)
        samples = []
        for _ in range(n):
            out = propagate(ckg, table0, attn, params.layers, cfg.propagation,
                            training=True, rng=rng)[-1]
            samples.append(out)
            acc += out
        mean = acc / n
        se = np.std(np.stack(samples), axis=0, ddof=1) / np.sqrt(n)
        assert np.all(np.abs(mean - off) <= 3.0 * se + 1e-12)

    def test_dropout_off_equals_training_false(self, toy_setup):
        ckg, cfg, params = toy_setup
        attn = attention_index(ckg, params, cfg.fusion)
        from ckgrec.fusion import fuse_all

        table0 = fuse_all(ckg, params, cfg.fusion).table
        eval_out = propagate(ckg, table0, attn, params.layers, cfg.propagation,
                             training=False, rng=np.random.default_rng(0))
        again = propagate(ckg, table0, attn, params.layers, cfg.propagation)
        for x, y in zip(eval_out, again):
            assert np.array_equal(x, y)

    def test_default_stack_concat_dim_184(self):
        inter = InteractionSet(2, 2, np.array([[0, 0], [1, 1]], dtype=np.int64),
                               (0, 1), (0, 1))
        ckg = build_ckg(inter, None, inverse=True)
        cfg = toy_model_config(dim=64, layer_dims=(64, 32, 16, 8))
        params = init_params(ckg.n_entities, ckg.n_relations, cfg, seed=0)
        reps = representations(ckg, params, cfg)
        assert reps.users.shape[1] == 184
        assert reps.items.shape[1] == 184


class TestFinalReps:
    def test_concat_order(self, toy_ckg):
        t0 = np.arange(toy_ckg.n_entities * 2, dtype=np.float64).reshape(-1, 2)
        t1 = -np.arange(toy_ckg.n_entities * 2, dtype=np.float64).reshape(-1, 2)
        reps = final_reps([t0, t1], toy_ckg)
        np.testing.assert_array_equal(reps.users[0], [0.0, 1.0, -0.0, -1.0])

    def test_missing_layer_rejected(self, toy_ckg):
        with pytest.raises(ValueError):
            final_reps([], toy_ckg)

    def test_row_count_mismatch_rejected(self, toy_ckg):
        t0 = np.zeros((toy_ckg.n_entities, 2))
        bad = np.zeros((toy_ckg.n_entities - 1, 2))
        with pytest.raises(ValueError):
            final_reps([t0, bad], toy_ckg)
