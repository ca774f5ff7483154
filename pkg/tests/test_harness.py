import numpy as np
import pytest

from flowbandits.agents import AgentKind
from flowbandits.harness import (
    ConfigError,
    ExperimentConfig,
    context_stream,
    cumulative_regret,
    mean_over_runs,
    run_experiment,
    simulate_run,
    sweep,
    sweep_configs,
)

SMALL = dict(steps=2000, batch_size=200, runs=3, seed=5)


def test_paper_defaults():
    cfg = ExperimentConfig()
    assert (cfg.pages, cfg.candidates, cfg.context) == (3, (3, 3, 3), "none")
    assert (cfg.alpha1, cfg.alpha_c, cfg.alpha2) == (1.0, 1.0, 2.0)
    assert (cfg.steps, cfg.batch_size, cfg.runs) == (14000, 1000, 100)
    assert cfg.batches == 14
    assert cfg.regret_mode == "realized"


@pytest.mark.parametrize(
    "changes, key",
    [
        ({"steps": 1000, "batch_size": 300}, "batch_size"),
        ({"runs": 0}, "runs"),
        ({"context": "numeric:2"}, "context"),
        ({"base_rate": 1.5}, "base_rate"),
        ({"regret_mode": "both"}, "regret_mode"),
        ({"candidates": (3, 3)}, "candidates"),
        ({"agents": ()}, "agents"),
        ({"incompatible": ((1, 0, 0), (1, 0, 1), (1, 0, 2))}, "incompatible"),
        ({"incompatible": ((0, 0, 0),)}, "incompatible"),
        ({"learner_beta": 0.0}, "learner_beta"),
    ],
)
def test_validation_names_the_key(changes, key):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig(**changes)
    assert err.value.key == key


def test_fourteen_batches_per_agent():
    cfg = ExperimentConfig(runs=1, steps=14000, batch_size=1000, agents=("mdp_with_bandits",))
    series = run_experiment(cfg)
    assert series.agents == ("mdp_with_bandits",)
    assert series.series("mdp_with_bandits").shape == (1, 14)


def test_rerun_is_bit_identical_and_runs_differ():
    cfg = ExperimentConfig(**SMALL)
    a, b = run_experiment(cfg), run_experiment(cfg)
    for k in a.agents:
        assert a.realized[k].tobytes() == b.realized[k].tobytes()
        assert a.expected[k].tobytes() == b.expected[k].tobytes()
        assert not np.array_equal(a.realized[k][0], a.realized[k][1])


def test_parallel_matches_serial():
    cfg = ExperimentConfig(**SMALL)
    a, b = run_experiment(cfg, workers=1), run_experiment(cfg, workers=2)
    for k in a.agents:
        assert a.realized[k].tobytes() == b.realized[k].tobytes()


def test_agent_streams_are_isolated():
    cfg = ExperimentConfig(**SMALL, context="categorical:3")
    full = run_experiment(cfg)
    alone = run_experiment(cfg.with_overrides(agents=("interaction_bandits",)))
    k = "interaction_bandits"
    assert full.realized[k].tobytes() == alone.realized[k].tobytes()


def test_context_stream_replays():
    cfg = ExperimentConfig(**SMALL, context="categorical:3")
    rec = simulate_run(cfg, 1, record_contexts=True)
    assert np.array_equal(rec.contexts, context_stream(cfg, 1))
    counts = np.bincount(rec.contexts.ravel(), minlength=3) / rec.contexts.size
    assert np.allclose(counts, 1 / 3, atol=0.04)


def test_expected_mode_is_nondecreasing():
    cfg = ExperimentConfig(**SMALL, context="categorical:3", regret_mode="expected")
    series = run_experiment(cfg)
    for k in series.agents:
        s = series.series(k)
        assert np.all(np.diff(s, axis=1) >= 0) and np.all(s[:, 0] >= 0)


def test_regret_arithmetic():
    g = np.zeros(1000)
    g[:900] = 1.0
    assert cumulative_regret(0.9, g, 1000)[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert cumulative_regret(0.8, np.zeros(1000), 1000)[0, 0] == pytest.approx(0.8)
    two = np.vstack([cumulative_regret(0.8, np.zeros(1000), 1000), cumulative_regret(0.4, np.zeros(1000), 1000)])
    assert mean_over_runs(two)[0] == pytest.approx(0.6)
    steps = cumulative_regret(np.full(3000, 0.5), np.zeros(3000), 1000)
    assert steps[0].tolist() == pytest.approx([0.5, 1.0, 1.5])
    with pytest.raises(ValueError):
        cumulative_regret(0.5, np.zeros(1001), 1000)


def test_stderr_definition():
    cfg = ExperimentConfig(**SMALL)
    series = run_experiment(cfg)
    s = series.series("q_learning")
    assert series.stderr("q_learning")[-1] == pytest.approx(s[:, -1].std(ddof=1) / np.sqrt(3))
    assert series.final("q_learning")[0] == pytest.approx(s[:, -1].mean())


@pytest.mark.slow
def test_realized_tracks_expected():
    cfg = ExperimentConfig(runs=30, seed=99)
    series = run_experiment(cfg)
    for k in series.agents:
        gap = np.abs(series.mean(k, "realized") - series.mean(k, "expected"))
        se = np.sqrt(series.binomial_var[k].sum(axis=0)) / series.runs
        assert np.all(gap <= 3 * se), k


def test_learning_reduces_regret():
    cfg = ExperimentConfig(runs=4, steps=6000, batch_size=1000, seed=1, agents=("mdp_with_bandits",),
                           regret_mode="expected")
    inc = np.diff(np.concatenate([[0.0], run_experiment(cfg).mean("mdp_with_bandits")]))
    assert inc[-1] < inc[0]


def test_incompatible_layouts_never_shown():
    cfg = ExperimentConfig(**SMALL, incompatible=((1, 0, 0), (2, 1, 2)), save_state=True)
    # drive every agent and check the oracle respects the mask through its dump
    rec = simulate_run(cfg.with_overrides(dump_ground_truth=True), 0)
    for row in rec.ground_truth:
        if row[0] == "oracle":
            layout = tuple(int(a) for a in row[2].split("layout=")[1].split("-"))
            assert layout[:2] != (0, 0) and layout[1:] != (1, 2)

    from flowbandits.harness import make_agent

    for kind in AgentKind:
        agent = make_agent(kind, cfg)
        traj = agent.select(np.zeros(2000, dtype=np.int64), 1, 10, np.random.default_rng(0))
        assert not np.any((traj[:, 0] == 0) & (traj[:, 1] == 0))
        assert not np.any((traj[:, 1] == 1) & (traj[:, 2] == 2))


def test_sweep_grid():
    base = ExperimentConfig()
    pages = sweep_configs(base, "pages")
    assert [c.shape.combinations() for c in pages] == [9, 27, 81, 243, 729]
    assert len(sweep_configs(base, "alpha2")) == 4
    assert [c.alpha2 for c in sweep_configs(base, "alpha2")] == [0.0, 1.0, 2.0, 3.0]
    with pytest.raises(ConfigError):
        sweep_configs(base, "pages", [])
    with pytest.raises(ConfigError):
        sweep_configs(base, "beta")


def test_sweep_runs_each_point():
    base = ExperimentConfig(steps=400, batch_size=200, runs=2, agents=("independent_bandits",))
    res = sweep(base, "pages", [2, 3])
    assert res.values == (2, 3) and res.combinations == [9, 27]
    assert len(res.final_mean["independent_bandits"]) == 2
