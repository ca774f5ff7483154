"""Seeded regret benchmark.

Each run samples one ground truth, then every agent serves ``steps``
impressions in batches of ``batch_size``; learning happens only at batch
boundaries. Regret per impression is the oracle's best expected long-term
reward for that impression's context minus the agent's long-term reward
(realised, or expected under the true model), normalised by batch size and
accumulated per batch.

Randomness: one master seed; every run gets labelled substreams for the
ground truth, the shared context stream, and each agent's selection and
reward draws. Agent streams are keyed by a fixed id per agent kind, so
adding or removing an agent never changes another agent's numbers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .agents import KIND_IDS, AgentKind, BanditAgent, QAgent, QLearnerConfig, form_structure
from .features import (
    ContextSchema,
    FlowShape,
    build_forms,
    parse_formula,
    standard_forms,
)
from .sim import (
    expected_g_batch,
    oracle_from_tables,
    realize_batch,
    sample_ground_truth,
    success_tables,
    trajectory_probs,
)

log = logging.getLogger(__name__)

REALIZED = "realized"
EXPECTED = "expected"

_GROUND_TRUTH, _CONTEXTS, _SELECT, _REWARD = 0, 1, 100, 200

ALL_AGENTS = (AgentKind.MDP, AgentKind.INTERACTION, AgentKind.INDEPENDENT, AgentKind.Q_LEARNING)


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class QLearningParams:
    learning_rate: float = 0.05
    discount: float = 1.0
    epsilon_start: float = 0.05
    epsilon_end: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    pages: int = 3
    candidates: tuple[int, ...] | int = 3
    context: str = "none"
    alpha1: float = 1.0
    alpha_c: float = 1.0
    alpha2: float = 2.0
    base_rate: float = 0.1
    steps: int = 14000
    batch_size: int = 1000
    runs: int = 100
    agents: tuple[AgentKind, ...] = ALL_AGENTS
    learner_beta: float = 1.0
    prior_mean: float = 0.0
    prior_var: float = 1.0
    seed: int = 0
    regret_mode: str = REALIZED
    incompatible: tuple[tuple[int, int, int], ...] = ()
    context_main_all_pages: bool = True
    formulas: tuple[tuple[str, tuple[str, ...]], ...] = ()
    q_learning: QLearningParams = field(default_factory=QLearningParams)
    workers: int = 1
    dump_ground_truth: bool = False
    save_state: bool = False

    def __post_init__(self):
        cand = self.candidates
        if isinstance(cand, (int, np.integer)):
            cand = (int(cand),) * int(self.pages)
        object.__setattr__(self, "candidates", tuple(int(c) for c in cand))
        object.__setattr__(self, "agents", tuple(AgentKind(a) for a in self.agents))
        object.__setattr__(self, "incompatible", tuple(tuple(int(v) for v in t) for t in self.incompatible))
        object.__setattr__(self, "formulas", tuple((str(AgentKind(k)), tuple(v)) for k, v in self.formulas))
        self.validate()

    def validate(self) -> None:
        if self.pages < 1:
            raise ConfigError("pages", "need at least one page")
        if len(self.candidates) != self.pages:
            raise ConfigError("candidates", f"{len(self.candidates)} entries for {self.pages} pages")
        try:
            shape = FlowShape(self.candidates)
        except ValueError as exc:
            raise ConfigError("candidates", str(exc)) from None
        try:
            ctx = ContextSchema.parse(self.context)
        except ValueError as exc:
            raise ConfigError("context", str(exc)) from None
        if ctx.kind == "numeric":
            raise ConfigError("context", "simulated contexts must be 'none' or 'categorical:k'")
        if self.steps < 1:
            raise ConfigError("steps", "must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size", "must be positive")
        if self.steps % self.batch_size:
            raise ConfigError("batch_size", f"steps={self.steps} is not divisible by batch_size={self.batch_size}")
        if self.runs < 1:
            raise ConfigError("runs", "need at least one run")
        if not self.agents:
            raise ConfigError("agents", "need at least one agent")
        if len(set(self.agents)) != len(self.agents):
            raise ConfigError("agents", "duplicate agent")
        if not 0.0 < self.base_rate < 1.0:
            raise ConfigError("base_rate", "must lie in (0, 1)")
        for key in ("alpha1", "alpha_c", "alpha2"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "must be nonnegative")
        if not self.learner_beta > 0:
            raise ConfigError("learner_beta", "must be positive")
        if not self.prior_var > 0:
            raise ConfigError("prior_var", "must be positive")
        if self.regret_mode not in (REALIZED, EXPECTED):
            raise ConfigError("regret_mode", f"must be {REALIZED!r} or {EXPECTED!r}")
        if self.workers < 1:
            raise ConfigError("workers", "must be positive")
        if shape.combinations() > 10**6:
            raise ConfigError("candidates", "too many layouts for the exhaustive oracle")
        q = self.q_learning
        if not 0 < q.learning_rate <= 1:
            raise ConfigError("q_learning.learning_rate", "must lie in (0, 1]")
        if not 0 <= q.discount <= 1:
            raise ConfigError("q_learning.discount", "must lie in [0, 1]")
        if not q.epsilon_start >= q.epsilon_end >= 0:
            raise ConfigError("q_learning.epsilon_start", "need epsilon_start >= epsilon_end >= 0")
        for t in self.incompatible:
            if len(t) != 3:
                raise ConfigError("incompatible", f"entries are [page, prev, cur], got {list(t)}")
            page, prev, cur = t
            if not 1 <= page < self.pages:
                raise ConfigError("incompatible", f"page {page} must be between 1 and {self.pages - 1}")
            if not (0 <= prev < self.candidates[page - 1] and 0 <= cur < self.candidates[page]):
                raise ConfigError("incompatible", f"pair {(prev, cur)} out of range on page {page}")
        try:
            for kind in self.agents:
                if kind is not AgentKind.Q_LEARNING:
                    self.learner_forms(kind)
        except ConfigError:
            raise
        except (ValueError, IndexError) as exc:
            raise ConfigError("incompatible" if "incompatible" in str(exc) else "formulas", str(exc)) from None

    # -- derived objects -----------------------------------------------------

    @property
    def shape(self) -> FlowShape:
        return FlowShape(self.candidates)

    @property
    def ctx(self) -> ContextSchema:
        return ContextSchema.parse(self.context)

    @property
    def batches(self) -> int:
        return self.steps // self.batch_size

    @property
    def incompatible_by_page(self) -> dict[int, frozenset]:
        out: dict[int, set] = {}
        for page, prev, cur in self.incompatible:
            out.setdefault(page, set()).add((prev, cur))
        return {k: frozenset(v) for k, v in out.items()}

    def learner_forms(self, kind: AgentKind):
        kind = AgentKind(kind)
        custom = dict(self.formulas).get(str(kind))
        if custom is None:
            return standard_forms(form_structure(kind), self.shape, self.ctx, self.incompatible_by_page,
                                  self.context_main_all_pages)
        if len(custom) != self.pages:
            raise ConfigError("formulas", f"{kind}: {len(custom)} formulas for {self.pages} pages")
        terms = []
        for text in custom:
            response, t = parse_formula(text)
            expected = "R" if kind is AgentKind.MDP else "G"
            if response != expected:
                raise ConfigError("formulas", f"{kind} learns {expected}, formula says {response}")
            terms.append(t)
        return build_forms(self.shape, self.ctx, terms, self.incompatible_by_page)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass
class RunRecord:
    run: int
    realized: dict[str, np.ndarray]
    expected: dict[str, np.ndarray]
    binomial_var: dict[str, np.ndarray]
    oracle: np.ndarray
    contexts: np.ndarray | None = None
    ground_truth: list | None = None
    state: dict | None = None


@dataclass
class RegretSeries:
    """Cumulative batch-normalised regret per agent, shape ``(runs, batches)``."""

    agents: tuple[str, ...]
    mode: str
    realized: dict[str, np.ndarray]
    expected: dict[str, np.ndarray]
    binomial_var: dict[str, np.ndarray]
    records: list[RunRecord] = field(default_factory=list, repr=False)

    @property
    def runs(self) -> int:
        return next(iter(self.realized.values())).shape[0]

    @property
    def batches(self) -> int:
        return next(iter(self.realized.values())).shape[1]

    def series(self, agent, mode: str | None = None) -> np.ndarray:
        mode = mode or self.mode
        return (self.realized if mode == REALIZED else self.expected)[str(AgentKind(agent))]

    def mean(self, agent, mode: str | None = None) -> np.ndarray:
        return self.series(agent, mode).mean(axis=0)

    def stderr(self, agent, mode: str | None = None) -> np.ndarray:
        s = self.series(agent, mode)
        if s.shape[0] < 2:
            return np.zeros(s.shape[1])
        return s.std(axis=0, ddof=1) / np.sqrt(s.shape[0])

    def final(self, agent, mode: str | None = None) -> tuple[float, float]:
        return float(self.mean(agent, mode)[-1]), float(self.stderr(agent, mode)[-1])


def run_seed_sequence(seed: int, run: int, label: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run), int(label)))


def stream(seed: int, run: int, label: int) -> np.random.Generator:
    return np.random.default_rng(run_seed_sequence(seed, run, label))


def cumulative_regret(oracle: np.ndarray, g: np.ndarray, batch_size: int) -> np.ndarray:
    """Batch-normalised cumulative regret from per-step records.

    ``oracle`` and ``g`` are ``(runs, steps)`` (or broadcastable): the best
    expected long-term reward and the agent's long-term reward per step.
    Returns ``(runs, steps // batch_size)``.
    """
    oracle = np.asarray(oracle, dtype=float)
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = g[None]
    oracle = np.broadcast_to(oracle, g.shape)
    runs, steps = g.shape
    if steps % batch_size:
        raise ValueError(f"{steps} steps do not split into batches of {batch_size}")
    per_batch = (oracle - g).reshape(runs, steps // batch_size, batch_size).sum(axis=2) / batch_size
    return np.cumsum(per_batch, axis=1)


def mean_over_runs(cumulative: np.ndarray) -> np.ndarray:
    return np.asarray(cumulative, dtype=float).mean(axis=0)


def flow_masks(shape: FlowShape, incompatible: dict) -> list[np.ndarray]:
    masks = [np.ones((1, shape.candidates[0]), dtype=bool)]
    for i in range(1, shape.pages):
        m = np.ones((shape.candidates[i - 1], shape.candidates[i]), dtype=bool)
        for prev, cur in incompatible.get(i, ()):
            m[prev, cur] = False
        masks.append(m)
    return masks


def make_agent(kind: AgentKind, cfg: ExperimentConfig):
    kind = AgentKind(kind)
    if kind is AgentKind.Q_LEARNING:
        q = cfg.q_learning
        return QAgent(QLearnerConfig.for_flow(cfg.shape, cfg.ctx, cfg.incompatible_by_page,
                                              learning_rate=q.learning_rate, discount=q.discount,
                                              epsilon_start=q.epsilon_start, epsilon_end=q.epsilon_end))
    return BanditAgent(kind, cfg.learner_forms(kind), cfg.prior_mean, cfg.prior_var, cfg.learner_beta)


def context_stream(cfg: ExperimentConfig, run: int) -> np.ndarray:
    """Per-impression context categories of one run, shape ``(batches, batch_size)``."""
    rng = stream(cfg.seed, run, _CONTEXTS)
    cats = cfg.ctx.categories
    return np.stack([rng.integers(cats, size=cfg.batch_size) for _ in range(cfg.batches)])


def _ground_truth_rows(gt, oracle_trajs, oracle_vals) -> list:
    rows = []
    for i, form in enumerate(gt.forms):
        for label, m, d in zip(form.layout, gt.multipliers[i], gt.draws[i]):
            rows.append(("weight", i, label, m * d))
    for c, (traj, val) in enumerate(zip(oracle_trajs, oracle_vals)):
        rows.append(("oracle", "", f"context={c};layout={'-'.join(map(str, traj))}", val))
    return rows


def simulate_run(cfg: ExperimentConfig, run: int, record_contexts: bool = False) -> RunRecord:
    shape, ctx = cfg.shape, cfg.ctx
    incompatible = cfg.incompatible_by_page
    gt = sample_ground_truth(shape, ctx, cfg.alpha1, cfg.alpha_c, cfg.alpha2, cfg.base_rate,
                             stream(cfg.seed, run, _GROUND_TRUTH), incompatible)
    tables = success_tables(gt)
    masks = flow_masks(shape, incompatible)
    best = [oracle_from_tables(tables, c, masks) for c in range(ctx.categories)]
    oracle = np.array([v for _, v in best])

    agents = {str(k): make_agent(k, cfg) for k in cfg.agents}
    sel_rng = {str(k): stream(cfg.seed, run, _SELECT + KIND_IDS[k]) for k in cfg.agents}
    rew_rng = {str(k): stream(cfg.seed, run, _REWARD + KIND_IDS[k]) for k in cfg.agents}
    ctx_rng = stream(cfg.seed, run, _CONTEXTS)

    M, n = cfg.batches, cfg.batch_size
    realized = {k: np.zeros(M) for k in agents}
    expected = {k: np.zeros(M) for k in agents}
    bvar = {k: np.zeros(M) for k in agents}
    seen = [] if record_contexts else None
    for b in range(M):
        contexts = ctx_rng.integers(ctx.categories, size=n)
        if seen is not None:
            seen.append(contexts)
        opt = oracle[contexts]
        for name, agent in agents.items():
            traj = agent.select(contexts, b + 1, M, sel_rng[name])
            probs = trajectory_probs(tables, contexts, traj)
            rewards, presented, g = realize_batch(probs, rew_rng[name])
            eg = expected_g_batch(probs)
            realized[name][b] = np.sum(opt - g) / n
            expected[name][b] = np.sum(opt - eg) / n
            bvar[name][b] = np.sum(eg * (1.0 - eg)) / n**2
            agent.learn(contexts, traj, rewards, presented, g)

    return RunRecord(
        run=run,
        realized={k: np.cumsum(v) for k, v in realized.items()},
        expected={k: np.cumsum(v) for k, v in expected.items()},
        binomial_var={k: np.cumsum(v) for k, v in bvar.items()},
        oracle=oracle,
        contexts=np.stack(seen) if seen is not None else None,
        ground_truth=_ground_truth_rows(gt, [t for t, _ in best], oracle) if cfg.dump_ground_truth else None,
        state={k: a.state() for k, a in agents.items()} if cfg.save_state else None,
    )


def _simulate(args):
    cfg, run = args
    return simulate_run(cfg, run)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> RegretSeries:
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, r) for r in range(cfg.runs)]
    if workers > 1 and cfg.runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_simulate, jobs))
    else:
        records = [_simulate(j) for j in jobs]
    records.sort(key=lambda r: r.run)
    names = tuple(str(k) for k in cfg.agents)
    log.info("finished %d runs x %d batches for %s", cfg.runs, cfg.batches, ", ".join(names))
    return RegretSeries(
        agents=names,
        mode=cfg.regret_mode,
        realized={k: np.stack([r.realized[k] for r in records]) for k in names},
        expected={k: np.stack([r.expected[k] for r in records]) for k in names},
        binomial_var={k: np.stack([r.binomial_var[k] for r in records]) for k in names},
        records=records,
    )


SWEEP_AXES = {"pages": (2, 3, 4, 5, 6), "alpha2": (0.0, 1.0, 2.0, 3.0)}


@dataclass
class SweepResult:
    axis: str
    values: tuple
    agents: tuple[str, ...]
    final_mean: dict[str, list[float]]
    final_stderr: dict[str, list[float]]
    combinations: list[int]


def sweep_configs(base: ExperimentConfig, axis: str, values: Sequence | None = None) -> list[ExperimentConfig]:
    if axis not in SWEEP_AXES:
        raise ConfigError("sweep.axis", f"unknown axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    values = SWEEP_AXES[axis] if values is None else tuple(values)
    if not values:
        raise ConfigError("sweep.values", "empty sweep axis")
    if axis == "pages":
        n = base.candidates[0]
        if any(c != n for c in base.candidates):
            raise ConfigError("sweep.axis", "the pages sweep needs the same candidate count on every page")
        return [replace(base, pages=int(v), candidates=n, incompatible=()) for v in values]
    return [replace(base, alpha2=float(v)) for v in values]


def sweep(base: ExperimentConfig, axis: str, values: Sequence | None = None, workers: int | None = None) -> SweepResult:
    configs = sweep_configs(base, axis, values)
    values = tuple(getattr(c, axis) for c in configs)
    names = tuple(str(k) for k in base.agents)
    means = {k: [] for k in names}
    errs = {k: [] for k in names}
    for c in configs:
        series = run_experiment(c, workers)
        for k in names:
            m, e = series.final(k)
            means[k].append(m)
            errs[k].append(e)
    return SweepResult(axis, values, names, means, errs, [c.shape.combinations() for c in configs])
