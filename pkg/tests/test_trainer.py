import numpy as np
import pytest

from uavmarl.autodiff import Adam, Module, param
from uavmarl.autodiff import tensor as T
from uavmarl.distributions import log_prob
from uavmarl.env import preset
from uavmarl.errors import ConfigError, DomainError
from uavmarl.trainer import loop as loop_mod
from uavmarl.trainer import (
    VARIANTS, AgentData, CommEnvAdapter, MatrixGameAdapter, Trainer, TrainerConfig, ValueNorm, collect_rollouts,
    estimate_advantages, evaluate_policies, gae, natural_gradient_step, ne_deviation_probe, read_metrics,
    surrogate_objective, trust_region_step, write_metrics,
)
from uavmarl.trainer.rollout import normalize_advantages
from uavmarl.trainer.updates import backtrack, penalized_ascent

SMALL = dict(hidden=16, embed_dim=8, attn_dim=8, epochs=2, critic_epochs=1, minibatches=2, eval_seeds=(7,))


@pytest.fixture(scope="module")
def adapter():
    return CommEnvAdapter(preset("2x4", t_max=12))


def make_trainer(adapter, variant="GA-MATR", seed=0, **kw):
    return Trainer(adapter, TrainerConfig(variant=variant, seed=seed, **{**SMALL, **kw}))


def fresh_batch(tr, seed=0, steps=24):
    b = collect_rollouts(tr.adapter, tr.actors, steps, np.random.default_rng(seed), with_graph=tr.cfg.uses_graph)
    tr.attach_values(b, range(tr.num_agents))
    return estimate_advantages(b, tr.cfg.gamma, tr.cfg.gae_lambda)


def checksums(tr):
    return [a.checksum() for a in tr.actors] + [c.checksum() for c in tr.critics]


# -- advantages ----------------------------------------------------------------

def test_gae_telescoping():
    adv = gae([1.0, 1.0], [0.0, 0.0], [False, True], 0.0, gamma=1.0, lam=1.0)
    assert adv.tolist() == [2.0, 1.0]


def test_gae_lambda_zero_is_td():
    rng = np.random.default_rng(0)
    r, v = rng.normal(size=6), rng.normal(size=6)
    dones = np.array([0, 0, 1, 0, 0, 0], bool)
    last = 0.7
    nxt = np.append(v[1:], last) * ~dones
    assert np.allclose(gae(r, v, dones, last, 0.9, 0.0), r + 0.9 * nxt - v, atol=1e-12)


def test_gae_resets_at_episode_boundary():
    adv = gae([1.0, 1.0, 1.0], [0.0] * 3, [False, True, False], 5.0, gamma=1.0, lam=1.0)
    assert adv.tolist() == [2.0, 1.0, 6.0]


def test_normalization_contract():
    adv = normalize_advantages(np.random.default_rng(1).normal(3, 5, size=(200, 3)))
    assert np.allclose(adv.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(adv.var(axis=0), 1, atol=1e-6)
    assert np.all(normalize_advantages(np.ones((4, 1))) == 0)


def test_batch_advantages_normalized(adapter):
    b = fresh_batch(make_trainer(adapter))
    assert np.allclose(b.advantages.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(b.advantages.var(axis=0), 1, atol=1e-6)
    assert np.all(np.isfinite(b.returns))


# -- surrogate -----------------------------------------------------------------

def test_surrogate_at_origin(adapter):
    tr = make_trainer(adapter)
    b = fresh_batch(tr)
    for m in range(tr.num_agents):
        obj, excluded = surrogate_objective(tr.actors[m], AgentData.from_batch(b, m))
        assert abs(obj.item()) <= 1e-9 and excluded == 0


def hand_data(tr, batch, ratios, adv):
    # behaviour log-probs chosen so the current actor's ratio equals ``ratios``
    n = len(ratios)
    d = AgentData.from_batch(batch, 0)
    acts = d.actions.take(np.arange(n))
    cur = log_prob(tr.actors[0](d.obs[:n]), acts).data
    return AgentData(d.obs[:n], acts, cur - np.log(ratios), np.asarray(adv, float), np.ones(n))


def test_surrogate_hand_case(adapter):
    tr = make_trainer(adapter)
    b = fresh_batch(tr)
    d = hand_data(tr, b, [1.0, 2.0, 0.5], [1.0, 1.0, 2.0])
    obj, _ = surrogate_objective(tr.actors[0], d)
    assert obj.item() == pytest.approx((1.0 + 2.0 + 1.0) / 3, abs=1e-12)
    d.pred_ratio = np.array([2.0, 1.0, 1.0])
    assert surrogate_objective(tr.actors[0], d)[0].item() == pytest.approx((2.0 + 2.0 + 1.0) / 3, abs=1e-12)


def test_surrogate_linearity(adapter):
    tr = make_trainer(adapter)
    b = fresh_batch(tr)
    d = hand_data(tr, b, [1.5, 0.8, 1.1, 0.9], [0.3, -1.0, 0.7, 0.2])
    base = surrogate_objective(tr.actors[0], d)[0].item()
    d.advantages = d.advantages.copy()
    d.advantages[1] *= 2
    doubled = surrogate_objective(tr.actors[0], d)[0].item()
    assert doubled - base == pytest.approx(0.8 * -1.0 / 4, abs=1e-12)


def test_surrogate_overflow_excluded(adapter):
    tr = make_trainer(adapter)
    b = fresh_batch(tr)
    d = hand_data(tr, b, [np.exp(80.0), 2.0, 1.0], [1.0, 1.0, 1.0])
    obj, excluded = surrogate_objective(tr.actors[0], d, ratio_cap=50.0)
    assert excluded == 1
    assert obj.item() == pytest.approx(1.5, abs=1e-12)


# -- trust-region step ---------------------------------------------------------

def test_zero_advantages_identity(adapter):
    tr = make_trainer(adapter)
    b = fresh_batch(tr)
    d = AgentData.from_batch(b, 0)
    d.advantages = np.zeros_like(d.advantages)
    before = tr.actors[0].get_flat()
    res = trust_region_step(tr.actors[0], tr.actor_opts[0], d, tr.cfg, np.random.default_rng(0))
    assert np.max(np.abs(tr.actors[0].get_flat() - before)) <= 1e-8
    assert res.surrogate_gain == pytest.approx(0.0, abs=1e-12)


class Quad(Module):
    def __init__(self):
        self.x = param(np.array([0.5, -1.0, 2.0]))


def test_unconstrained_step_matches_adam():
    target = np.array([1.0, 2.0, -3.0])
    lr, epochs = 0.05, 7
    mod = Quad()
    opt = Adam(mod.parameters(), lr=lr, maximize=True)
    theta0 = mod.get_flat()
    assert penalized_ascent(mod, opt, lambda idx: -T.square(mod.x - target).sum(), 1, epochs, 1,
                            np.random.default_rng(0))
    ok, tries, _ = backtrack(mod, theta0, mod.get_flat() - theta0, lambda: (True,), 0.5, 10)
    assert ok and tries == 1
    # plain Adam ascent written out by hand
    x, m, v = theta0.copy(), np.zeros(3), np.zeros(3)
    for t in range(1, epochs + 1):
        g = -2 * (x - target)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x = x + lr * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert np.allclose(mod.get_flat(), x, atol=1e-12)


def test_backtrack_restores_on_failure():
    mod = Quad()
    theta0 = mod.get_flat()
    ok, tries, _ = backtrack(mod, theta0, np.ones(3), lambda: (False,), 0.5, 4)
    assert not ok and tries == 4 and np.array_equal(mod.get_flat(), theta0)


@pytest.mark.parametrize("variant", ["GA-MATR", "MATR", "HATRPO"])
def test_accepted_steps_respect_trust_region(adapter, variant):
    tr = make_trainer(adapter, variant, seed=1, rollout_steps=24)
    recs = [r for _ in range(3) for r in tr.train_iteration(evaluate=False)]
    acc = [r for r in recs if r["accepted"]]
    assert acc
    for r in acc:
        assert r["kl"] <= tr.cfg.kl_limit and r["surrogate_gain"] >= 0


def test_natural_gradient_step(adapter):
    tr = make_trainer(adapter, "HATRPO")
    d = AgentData.from_batch(fresh_batch(tr), 0)
    before = tr.actors[0].get_flat()
    res = natural_gradient_step(tr.actors[0], d, tr.cfg)
    assert res.accepted and 0 < res.kl <= tr.cfg.kl_limit and res.surrogate_gain >= 0
    assert not np.array_equal(before, tr.actors[0].get_flat())


def test_theory_penalty():
    cfg = TrainerConfig(penalty_mode="theory", gamma=0.9)
    assert cfg.penalty(np.array([0.5, -2.0])) == pytest.approx(4 * 0.9 * 2.0 / 0.01)
    assert TrainerConfig().penalty(np.array([9.0])) == 1.0


# -- iteration bookkeeping -----------------------------------------------------

def test_permutation_reproducible(adapter):
    orders = []
    for _ in range(2):
        tr = make_trainer(adapter, rollout_steps=12, epochs=1)
        seq = []
        for _ in range(6):
            tr.train_iteration(evaluate=False)
            seq.append(tuple(tr.last_order))
        orders.append(seq)
    assert orders[0] == orders[1]
    assert len(set(orders[0])) > 1
    assert all(sorted(o) == [0, 1] for o in orders[0])


def test_first_agent_sees_unit_predecessor_ratio(adapter, monkeypatch):
    tr = make_trainer(adapter, rollout_steps=12, epochs=1)
    seen = []
    orig = Trainer.update_agent

    def spy(self, m, data):
        seen.append(data.pred_ratio.copy())
        return orig(self, m, data)

    monkeypatch.setattr(Trainer, "update_agent", spy)
    tr.train_iteration(evaluate=False)
    assert len(seen) == 2
    assert np.all(seen[0] == 1.0)


def test_ippo_never_uses_predecessor_ratios(adapter, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("predecessor ratio evaluated")

    monkeypatch.setattr(loop_mod, "policy_ratio", boom)
    tr = make_trainer(adapter, "IPPO", rollout_steps=12)
    recs = tr.train_iteration(evaluate=False)
    assert all(r["accepted"] for r in recs)


def test_variant_isolation(adapter):
    trainers = [make_trainer(adapter, v, seed=3) for v in VARIANTS]
    ref = [a.checksum() for a in trainers[0].actors]
    batches = []
    for tr in trainers:
        assert [a.checksum() for a in tr.actors] == ref
        batches.append(collect_rollouts(adapter, tr.actors, 12, np.random.default_rng(tr.rollout_rng.bit_generator.seed_seq)))
    for b in batches[1:]:
        assert np.array_equal(b.obs, batches[0].obs) and np.array_equal(b.rewards, batches[0].rewards)


def test_variant_flags():
    assert TrainerConfig(variant="MATR").uses_graph is False
    assert TrainerConfig(variant="MATR").uses_attention is False
    assert TrainerConfig(variant="GA-MATR").uses_graph and TrainerConfig(variant="GA-MATR").uses_attention
    assert TrainerConfig(variant="IPPO").update_rule == "clipped"


def test_each_agent_updated_once_per_iteration(adapter):
    tr = make_trainer(adapter, rollout_steps=12, epochs=1)
    recs = tr.train_iteration(evaluate=True)
    assert sorted(r["order_position"] for r in recs) == [0, 1]
    assert all(np.isfinite(r["eval_reward"]) for r in recs)


def test_frozen_agents(adapter):
    tr = make_trainer(adapter, rollout_steps=12)
    frozen = tr.actors[1].checksum()
    recs = tr.train_iteration(agents=[0], evaluate=False)
    assert tr.actors[1].checksum() == frozen
    assert recs[1]["order_position"] == -1


# -- rollouts and evaluation ---------------------------------------------------

def test_rollout_records_per_episode(adapter):
    tr = make_trainer(adapter)
    b = collect_rollouts(adapter, tr.actors, adapter.episode_len, np.random.default_rng(0))
    assert b.size == adapter.episode_len and b.obs.shape[:2] == (12, 2)
    assert b.dones[-1] and b.dones.sum() == 1


def test_rollout_deterministic(adapter):
    tr = make_trainer(adapter)
    a = collect_rollouts(adapter, tr.actors, 30, np.random.default_rng(5))
    b = collect_rollouts(adapter, tr.actors, 30, np.random.default_rng(5))
    for f in ("obs", "logp", "rewards", "dones", "episode_returns"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_rollout_reward_passthrough(adapter):
    tr = make_trainer(adapter)
    b = collect_rollouts(adapter, tr.actors, 15, np.random.default_rng(2), keep_transitions=True)
    assert np.array_equal(b.rewards, np.stack([o.rewards for o in b.transitions]))
    assert np.allclose(b.episode_returns[0], b.rewards[:12].sum(axis=0))


def test_rollout_rejects_non_finite_reward():
    game = MatrixGameAdapter(np.full((2, 2, 2), np.nan))
    tr = Trainer(game, TrainerConfig(variant="MATR", **SMALL))
    with pytest.raises(DomainError):
        collect_rollouts(game, tr.actors, 2, np.random.default_rng(0))


def test_graph_variant_needs_topology():
    with pytest.raises(ConfigError):
        Trainer(MatrixGameAdapter(), TrainerConfig(variant="GA-MATR"))


def test_evaluation_pure_and_repeatable(adapter):
    tr = make_trainer(adapter)
    before = checksums(tr)
    r1 = evaluate_policies(adapter, tr.actors, [3, 4])
    r2 = evaluate_policies(adapter, tr.actors, [3, 4])
    assert checksums(tr) == before
    assert np.array_equal(r1.per_seed, r2.per_seed) and r1.mean.shape == (2,)


# -- probe ---------------------------------------------------------------------

def test_probe_zero_budget(adapter):
    tr = make_trainer(adapter)
    assert ne_deviation_probe(tr, 0, 0).improvement == 0.0


def test_probe_leaves_trainer_untouched(adapter):
    tr = make_trainer(adapter, rollout_steps=12, epochs=1)
    before = checksums(tr)
    res = ne_deviation_probe(tr, 1, 2)
    assert checksums(tr) == before
    assert len(res.history) == 2 and res.improvement >= 0


def test_probe_on_matrix_game():
    game = MatrixGameAdapter()
    assert game.pure_nash_equilibria() == [(1, 1)]
    tr = Trainer(game, TrainerConfig(variant="MATR", seed=0, rollout_steps=64, hidden=16, eval_seeds=(0,)))
    tr.train(25)
    for agent in (0, 1):
        assert ne_deviation_probe(tr, agent, 20).improvement <= 0.01


# -- config, value normalization, files ----------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        TrainerConfig(kl_limit=0.0)
    with pytest.raises(ConfigError):
        TrainerConfig(backtrack_factor=1.0)
    with pytest.raises(ConfigError):
        TrainerConfig(variant="SAC")
    with pytest.raises(ConfigError):
        TrainerConfig.from_dict({"lr": 1.0})
    cfg = TrainerConfig(variant="IPPO", eval_seeds=(1, 2))
    assert TrainerConfig.from_dict(cfg.to_dict()) == cfg


def test_value_norm_roundtrip():
    vn = ValueNorm()
    x = np.random.default_rng(0).normal(50, 10, size=100)
    for _ in range(20):
        vn.update(x)
    assert np.allclose(vn.denormalize(vn.normalize(x)), x)
    mean, var = vn.stats()
    assert mean == pytest.approx(x.mean(), rel=1e-6)


def test_checkpoint_roundtrip(adapter, tmp_path):
    a, b = make_trainer(adapter, seed=0), make_trainer(adapter, seed=9)
    a.save(tmp_path / "c.npz")
    b.load(tmp_path / "c.npz")
    assert checksums(a) == checksums(b)


def test_metrics_roundtrip(adapter, tmp_path):
    tr = make_trainer(adapter, rollout_steps=12, epochs=1)
    recs = tr.train(2, metrics_path=tmp_path / "m.csv")
    m = read_metrics(tmp_path / "m.csv")
    assert m["iteration"].tolist() == [0, 0, 1, 1]
    assert np.array_equal(m["kl"], [r["kl"] for r in recs])
    write_metrics(recs, tmp_path / "n.csv")
    assert (tmp_path / "m.csv").read_text() == (tmp_path / "n.csv").read_text()
