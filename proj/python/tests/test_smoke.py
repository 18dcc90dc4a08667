import json

import numpy as np
import pytest

import metroplan as mp


def reference_config(**overrides):
    cfg = mp.Config(**{
        "city.k": 20,
        "env.budget": 12000,
        "env.initial_lines": 1,
        "env.initial_line_length": 3,
        "env.t4": 4.0,
        "env.max_new_lines": 3,
    })
    for key, value in overrides.items():
        cfg[key] = value
    return cfg


def test_config_round_trip():
    cfg = reference_config()
    assert float(cfg["env.budget"]) == 12000.0
    again = mp.Config.from_json(cfg.to_json())
    assert again.to_json() == cfg.to_json()
    assert "ppo.gamma" in mp.Config.keys()
    cfg["env.strict_appendix"] = True
    assert cfg["env.strict_appendix"] == "true"
    with pytest.raises(mp.ConfigError):
        cfg["env.nonsense"] = 1
    with pytest.raises(mp.ConfigError):
        mp.Config.from_json('{"env": {"budget": "lots"}}')


def test_city_and_graph():
    city = mp.City.generate(20, 0)
    assert len(city) == 20
    flows = city.flows
    assert flows.shape == (20, 20)
    assert np.all(np.diag(flows) == 0)
    assert city.flow(0, 1) == flows[0, 1]
    assert mp.City.from_json(city.to_json()).to_json() == city.to_json()
    assert city.regions[3]["id"] == 3
    graph = mp.Graph.from_config(city, reference_config())
    assert graph.num_nodes == 20
    assert all(i < j for i, j in graph.spatial_edges)
    with pytest.raises(mp.InvalidArgument):
        mp.City.generate(3, 0)


def test_objective_of_a_straight_line():
    city = mp.City.generate(20, 0)
    assert mp.satisfied_od(city, [[0]]) == 0.0
    assert mp.satisfied_od(city, [[0, 1, 2]]) >= 0.0
    assert mp.inequity(city, [[0, 1]]) >= 0.0


def test_environment_episode_telescopes():
    env = mp.Environment(reference_config())
    env.reset()
    c0 = env.cod
    total = 0.0
    while not env.done:
        reward, done, info = env.step(env.feasible[0])
        total += reward
        assert info["delta_cod"] >= 0.0
        assert info["mode"] in ("extend", "new_line")
    assert done
    assert total * env.reward_scale == env.cod - c0
    assert env.spend <= 12000


def test_masked_out_action_is_refused():
    env = mp.Environment(reference_config())
    env.reset()
    blocked = next(n for n in range(20) if n not in env.feasible)
    with pytest.raises(mp.InvalidAction):
        env.step(blocked)


def test_baselines_are_audited_and_exported():
    cfg = reference_config(**{"baseline.sa_t0": 10, "baseline.sa_iters_per_temp": 5})
    gs = mp.baseline(cfg, "gs")
    sa = mp.baseline(cfg, "sa", seed=1)
    assert mp.audit(gs, cfg) == []
    assert mp.audit(sa, cfg) == []
    assert sa.objective >= gs.objective
    assert json.loads(gs.to_geojson())["type"] == "FeatureCollection"
    assert gs.to_svg().rstrip().endswith("</svg>")
    back = mp.Plan.from_json(gs.to_json())
    assert back.actions == gs.actions
    with pytest.raises(mp.ConfigError):
        mp.baseline(cfg, "tabu")


def test_oracle_and_guard():
    cfg = mp.Config(**{
        "city.k": 12, "city.seed": 5, "env.budget": 2000, "env.initial_lines": 1,
        "env.initial_line_length": 3, "env.t4": 4.0, "env.max_new_lines": 2,
    })
    best = mp.oracle(cfg)
    assert best.cod >= mp.baseline(cfg, "gs").cod
    with pytest.raises(mp.GuardRefusal):
        mp.oracle(cfg, guard=10)


def test_train_and_rollout(tmp_path):
    cfg = reference_config(**{
        "ppo.iterations": 2, "ppo.episodes_per_iteration": 2, "agent.hidden_dim": 8,
        "agent.policy_hidden": 8, "agent.value_hidden": 8,
    })
    rows = mp.train(cfg, tmp_path)
    assert [r["iteration"] for r in rows] == [0, 1]
    assert (tmp_path / "metrics.jsonl").read_text().count("\n") == 2
    a = mp.rollout(cfg, tmp_path / "checkpoint.json")
    b = mp.rollout(cfg, tmp_path / "checkpoint.json")
    assert a.to_json() == b.to_json()
    assert mp.audit(a, cfg) == []
