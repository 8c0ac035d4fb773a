import numpy as np
import pytest

from ckgrec.config import EmbedConfig
from ckgrec.embedding import (
    embed_loss,
    embed_loss_and_grads,
    project,
    projection_param_count,
    score_triplet,
    train_embed_epoch,
)
from ckgrec.numeric import AdamState, finite_diff_grad, softplus
from ckgrec.params import init_params

from conftest import max_rel_err, toy_model_config


def zero_projection(params):
    params.embed.entity_proj[:] = 0.0
    params.embed.relation_proj[:] = 0.0


class TestProject:
    def test_zero_entity_projection_is_identity(self, toy_setup):
        ckg, cfg, params = toy_setup
        params.embed.entity_proj[:] = 0.0
        for e in range(ckg.n_entities):
            for r in range(ckg.n_relations):
                np.testing.assert_array_equal(
                    project(params, e, r), params.embed.entity_emb[e]
                )

    def test_zero_relation_projection_is_identity(self, toy_setup):
        ckg, cfg, params = toy_setup
        params.embed.relation_proj[:] = 0.0
        for e in range(0, ckg.n_entities, 2):
            np.testing.assert_array_equal(project(params, e, 1), params.embed.entity_emb[e])

    def test_hand_worked_rank_one_update(self, toy_setup):
        ckg, cfg, params = toy_setup
        d = cfg.dim
        params.embed.entity_emb[0, :] = 0.0
        params.embed.entity_emb[0, :2] = [1.0, 0.0]
        params.embed.relation_proj[0, :] = 0.0
        params.embed.relation_proj[0, :2] = [2.0, 3.0]

        params.embed.entity_proj[0, :] = 0.0
        params.embed.entity_proj[0, :2] = [0.0, 1.0]  # orthogonal to e
        np.testing.assert_allclose(project(params, 0, 0)[:2], [1.0, 0.0])

        params.embed.entity_proj[0, :2] = [1.0, 0.0]  # aligned with e
        np.testing.assert_allclose(project(params, 0, 0)[:2], [3.0, 3.0])

    def test_transr_uses_relation_matrix(self, toy_ckg):
        cfg = toy_model_config(mode="transr")
        params = init_params(toy_ckg.n_entities, toy_ckg.n_relations, cfg, seed=1)
        e, r = 2, 1
        expected = params.embed.relation_mat[r] @ params.embed.entity_emb[e]
        np.testing.assert_allclose(project(params, e, r), expected)

    def test_transd_and_transr_agree_under_identity(self, toy_ckg):
        cfg_d = toy_model_config(mode="transd")
        cfg_r = toy_model_config(mode="transr")
        pd = init_params(toy_ckg.n_entities, toy_ckg.n_relations, cfg_d, seed=2)
        pr = init_params(toy_ckg.n_entities, toy_ckg.n_relations, cfg_r, seed=2)
        pr.embed.entity_emb[:] = pd.embed.entity_emb
        zero_projection(pd)
        pr.embed.relation_mat[:] = np.eye(cfg_r.dim)
        rng = np.random.default_rng(0)
        for _ in range(100):
            e = int(rng.integers(toy_ckg.n_entities))
            r = int(rng.integers(toy_ckg.n_relations))
            np.testing.assert_array_equal(project(pd, e, r), project(pr, e, r))

    def test_out_of_range_ids(self, toy_setup):
        ckg, cfg, params = toy_setup
        with pytest.raises(IndexError):
            project(params, ckg.n_entities, 0)
        with pytest.raises(IndexError):
            project(params, 0, ckg.n_relations)

    def test_param_counts(self, toy_ckg):
        d = 5
        pd = init_params(toy_ckg.n_entities, toy_ckg.n_relations, toy_model_config(), seed=0)
        pr = init_params(toy_ckg.n_entities, toy_ckg.n_relations,
                         toy_model_config(mode="transr"), seed=0)
        assert projection_param_count(pd.embed) == {"per_relation": 2 * d, "per_entity": 2 * d}
        assert projection_param_count(pr.embed) == {"per_relation": d + d * d, "per_entity": d}
        # concrete table shapes back the counts
        assert pd.embed.relation_proj.shape == (toy_ckg.n_relations, d)
        assert pr.embed.relation_mat.shape == (toy_ckg.n_relations, d, d)


class TestScore:
    def test_exact_translation_scores_zero(self, toy_setup):
        ckg, cfg, params = toy_setup
        zero_projection(params)
        params.embed.entity_emb[1] = params.embed.entity_emb[0] + params.embed.relation_emb[0]
        assert score_triplet(params, 0, 0, 1) == pytest.approx(0.0, abs=1e-12)

    def test_unit_displacement(self, toy_setup):
        ckg, cfg, params = toy_setup
        zero_projection(params)
        params.embed.entity_emb[0] = 0.0
        params.embed.entity_emb[1] = 0.0
        params.embed.relation_emb[0] = 0.0
        params.embed.relation_emb[0, 0] = 1.0
        assert score_triplet(params, 0, 0, 1) == pytest.approx(-1.0)

    def test_matches_recomputed_norm(self, toy_setup):
        ckg, cfg, params = toy_setup
        h, r, t = 2, 3, 5
        delta = (
            project(params, h, r, "head")
            + params.embed.relation_emb[r]
            - project(params, t, r, "tail")
        )
        assert score_triplet(params, h, r, t) == pytest.approx(-float(delta @ delta))

    def test_never_positive(self, toy_setup):
        ckg, cfg, params = toy_setup
        rng = np.random.default_rng(8)
        for _ in range(200):
            h, t = rng.integers(ckg.n_entities, size=2)
            r = rng.integers(ckg.n_relations)
            assert score_triplet(params, int(h), int(r), int(t)) <= 0.0


class TestEmbedLoss:
    def _forced_scores(self, params):
        # g(h, r, t) = -10 with t' giving g = 0
        zero_projection(params)
        params.embed.entity_emb[:] = 0.0
        params.embed.relation_emb[:] = 0.0
        params.embed.entity_emb[4, 0] = np.sqrt(10.0)  # positive tail is off by 10
        return np.array([[0, 0, 4, 5]], dtype=np.int64)

    def test_equal_scores_give_ln2(self, toy_setup):
        ckg, cfg, params = toy_setup
        zero_projection(params)
        params.embed.entity_emb[:] = 0.0
        batch = np.array([[0, 0, 4, 5]], dtype=np.int64)
        assert embed_loss(params, batch, cfg.embed) == pytest.approx(np.log(2.0))

    def test_paper_order_rewards_better_negative(self, toy_setup):
        ckg, cfg, params = toy_setup
        batch = self._forced_scores(params)
        paper = EmbedConfig(dim=cfg.dim, loss_order="paper")
        # g_neg - g_pos = +10 under the printed argument order
        assert embed_loss(params, batch, paper) == pytest.approx(softplus(-10.0), rel=1e-9)
        assert embed_loss(params, batch, paper) == pytest.approx(4.5398e-5, rel=1e-3)

    def test_conventional_order_penalizes_it(self, toy_setup):
        ckg, cfg, params = toy_setup
        batch = self._forced_scores(params)
        assert embed_loss(params, batch, cfg.embed) == pytest.approx(softplus(10.0), rel=1e-9)

    @pytest.mark.parametrize("mode", ["transd", "transr"])
    def test_gradients_match_finite_differences(self, toy_ckg, mode):
        cfg = toy_model_config(mode=mode)
        params = init_params(toy_ckg.n_entities, toy_ckg.n_relations, cfg, seed=11)
        rng = np.random.default_rng(0)
        idx = rng.integers(0, toy_ckg.n_triples, size=6)
        tneg = rng.integers(0, toy_ckg.n_entities, size=6)
        batch = np.column_stack(
            [toy_ckg.heads[idx], toy_ckg.rels[idx], toy_ckg.tails[idx], tneg]
        )
        _, grads = embed_loss_and_grads(params, batch, cfg.embed)
        for name, arr in params.embed_groups().items():
            fd = finite_diff_grad(
                lambda _x: embed_loss(params, batch, cfg.embed), arr, 1e-6
            )
            assert max_rel_err(grads[name], fd) < 1e-4, name


class TestTrainEmbedEpoch:
    def test_loss_decreases_on_toy_graph(self, toy_setup):
        ckg, cfg, params = toy_setup
        adam = AdamState(learning_rate=0.05)
        rng = np.random.default_rng(1)
        first = train_embed_epoch(params, ckg, adam, batch_size=8, rng=rng, config=cfg.embed)
        last = None
        for _ in range(19):
            last = train_embed_epoch(params, ckg, adam, batch_size=8, rng=rng, config=cfg.embed)
        assert last < first

    def test_zero_learning_rate_freezes_params(self, toy_setup):
        ckg, cfg, params = toy_setup
        snapshot = {k: v.copy() for k, v in params.groups().items()}
        adam = AdamState(learning_rate=1e-300)  # effectively zero, still valid
        train_embed_epoch(params, ckg, adam, batch_size=8,
                          rng=np.random.default_rng(0), config=cfg.embed)
        for name, arr in params.groups().items():
            np.testing.assert_allclose(arr, snapshot[name], atol=1e-250)

    def test_fixed_seed_reproduces_trajectory(self, toy_ckg):
        def run():
            cfg = toy_model_config()
            params = init_params(toy_ckg.n_entities, toy_ckg.n_relations, cfg, seed=5)
            adam = AdamState(learning_rate=0.01)
            rng = np.random.default_rng(9)
            return [
                train_embed_epoch(params, toy_ckg, adam, 8, rng, cfg.embed)
                for _ in range(5)
            ]

        assert run() == run()
