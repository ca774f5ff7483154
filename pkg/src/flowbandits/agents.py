"""Layout-selection agents.

Four agents are compared:

* ``mdp_with_bandits``: per-page probit bandits on the short-term reward,
  composed by exact backward induction over one Thompson draw.
* ``interaction_bandits``: per-page probit bandits on the long-term reward
  with previous-page features, chosen greedily page by page.
* ``independent_bandits``: per-page probit bandits on the long-term reward
  with no cross-page features.
* ``q_learning``: tabular Q-learning over (page, previous content, context)
  with an epsilon-greedy policy.

The module has two layers. The functions (``independent_select``,
``bandit_feedback``, ``q_update``, ...) handle one impression at a time. The
``*Agent`` classes process a whole batch at once for the harness; since
learning only happens at batch boundaries the two are equivalent.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .blip import GaussianPosterior, Observation, new_posterior, plugin_success, sample_weights
from .features import (
    ContextSchema,
    FlowShape,
    ModelForm,
    encode,
    encode_values,
    encoding_table,
    feasibility_mask,
)
from .planner import plan, plan_batch
from .probit import phi_cdf_array


class AgentKind(str, Enum):
    MDP = "mdp_with_bandits"
    INTERACTION = "interaction_bandits"
    INDEPENDENT = "independent_bandits"
    Q_LEARNING = "q_learning"

    def __str__(self) -> str:
        return self.value


# Fixed per-kind ids for RNG stream labels. Never renumber.
KIND_IDS = {
    AgentKind.MDP: 0,
    AgentKind.INTERACTION: 1,
    AgentKind.INDEPENDENT: 2,
    AgentKind.Q_LEARNING: 3,
}

SHORT_TERM_KINDS = frozenset({AgentKind.MDP})
BANDIT_KINDS = frozenset({AgentKind.MDP, AgentKind.INTERACTION, AgentKind.INDEPENDENT})


def form_structure(kind: AgentKind) -> str:
    return "independent" if kind is AgentKind.INDEPENDENT else "mdp"


# -- single-impression bandit operations ------------------------------------


def _forward_greedy(posteriors, forms, context, rng) -> tuple[int, ...]:
    x = forms[0].ctx.value(context)
    traj: list[int] = []
    prev = None
    for post, form in zip(posteriors, forms):
        w = sample_weights(post, rng)
        best, best_p = -1, -1.0
        for a in form.feasible(prev):
            p = plugin_success(w, encode_values(form, x, prev, a), post.beta)
            if p > best_p:
                best, best_p = a, p
        traj.append(best)
        prev = best
    return tuple(traj)


def independent_select(posteriors: Sequence[GaussianPosterior], forms: Sequence[ModelForm], context, rng: np.random.Generator) -> tuple[int, ...]:
    """Each page picks its own Thompson-best action; forms carry no previous-page terms.

    The previous page's choice only restricts the candidates through the
    incompatibility mask.
    """
    return _forward_greedy(posteriors, forms, context, rng)


def interaction_select(posteriors: Sequence[GaussianPosterior], forms: Sequence[ModelForm], context, rng: np.random.Generator) -> tuple[int, ...]:
    """Page-by-page Thompson choice conditioned on the action already chosen upstream."""
    return _forward_greedy(posteriors, forms, context, rng)


def mdp_select(posteriors: Sequence[GaussianPosterior], forms: Sequence[ModelForm], context, rng: np.random.Generator) -> tuple[int, ...]:
    weights = [sample_weights(p, rng) for p in posteriors]
    return plan(forms, weights, context, posteriors[0].beta).trajectory


def long_term_labels(rewards: Sequence[int]) -> list[int]:
    """Realised ``G_i = R_i + (1 - R_i) G_{i+1}`` over a presented prefix."""
    out, g = [], 0
    for r in reversed(rewards):
        g = int(r or g)
        out.append(g)
    return out[::-1]


def _check_prefix(trajectory: Sequence[int], outcomes: Sequence[int]) -> None:
    if not 1 <= len(outcomes) <= len(trajectory):
        raise ValueError(f"{len(outcomes)} outcomes for a {len(trajectory)}-page layout")
    if any(r not in (0, 1) for r in outcomes):
        raise ValueError("outcomes must be 0/1")
    if any(outcomes[:-1]):
        raise ValueError("the flow stops at the first success; outcomes after it are impossible")
    if len(outcomes) < len(trajectory) and outcomes[-1] != 1:
        raise ValueError("a prefix shorter than the layout must end in a success")


def bandit_feedback(
    kind: AgentKind,
    forms: Sequence[ModelForm],
    context,
    trajectory: Sequence[int],
    outcomes: Sequence[int],
) -> list[list[Observation]]:
    """Per-page observations from one realised impression.

    The MDP agent learns the short-term reward of each presented page; the
    long-term bandits learn ``G_i``. Pages after the flow stopped get nothing.
    """
    kind = AgentKind(kind)
    _check_prefix(trajectory, outcomes)
    labels = list(outcomes) if kind in SHORT_TERM_KINDS else long_term_labels(outcomes)
    out: list[list[Observation]] = [[] for _ in trajectory]
    for i, label in enumerate(labels):
        prev = trajectory[i - 1] if i > 0 else None
        out[i].append(Observation(encode(forms[i], context, prev, trajectory[i]).values, bool(label)))
    return out


# -- Q-learning -------------------------------------------------------------


def epsilon_at(batch_index: int, total_batches: int, start: float = 0.05, end: float = 0.01) -> float:
    """Linear schedule from ``start`` at batch 2 to ``end`` at the last batch.

    Batch 1 reports ``start``; with a zero table it explores uniformly anyway.
    """
    if batch_index < 1:
        raise ValueError("batch_index is 1-based")
    if batch_index >= total_batches and total_batches >= 2:
        return end
    if batch_index <= 2:
        return start
    return start - (start - end) * (batch_index - 2) / (total_batches - 2)


def q_feasibility(shape: FlowShape, incompatible: dict | None = None) -> np.ndarray:
    """``feasible[page, state, action]``; state 0 is the start, ``a + 1`` follows action ``a``."""
    incompatible = incompatible or {}
    n_max = max(shape.candidates)
    feas = np.zeros((shape.pages, n_max + 1, n_max), dtype=bool)
    feas[0, 0, : shape.candidates[0]] = True
    for i in range(1, shape.pages):
        bad = set(map(tuple, incompatible.get(i, ())))
        for prev in range(shape.candidates[i - 1]):
            for a in range(shape.candidates[i]):
                feas[i, prev + 1, a] = (prev, a) not in bad
    return feas


@dataclass
class QLearnerConfig:
    feasible: np.ndarray
    categories: int = 1
    learning_rate: float = 0.05
    discount: float = 1.0
    epsilon_start: float = 0.05
    epsilon_end: float = 0.01
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0 <= self.discount <= 1:
            raise ValueError("discount must lie in [0, 1]")
        if not self.epsilon_start >= self.epsilon_end >= 0:
            raise ValueError("need epsilon_start >= epsilon_end >= 0")
        if self.table is None:
            pages, states, actions = self.feasible.shape
            self.table = np.zeros((pages, states, self.categories, actions))

    @classmethod
    def for_flow(cls, shape: FlowShape, ctx: ContextSchema, incompatible: dict | None = None, **kw) -> "QLearnerConfig":
        return cls(q_feasibility(shape, incompatible), ctx.categories, **kw)

    @property
    def pages(self) -> int:
        return self.feasible.shape[0]


def _state(page: int, prev: int | None) -> int:
    return 0 if page == 0 else prev + 1


def q_select(cfg: QLearnerConfig, batch_index: int, total_batches: int, context: int | None, rng: np.random.Generator) -> tuple[int, ...]:
    """Epsilon-greedy layout. Greedy ties go to the lowest index, except in batch 1 where they are broken uniformly."""
    eps = epsilon_at(batch_index, total_batches, cfg.epsilon_start, cfg.epsilon_end)
    c = 0 if context is None else int(context)
    traj: list[int] = []
    prev = None
    for i in range(cfg.pages):
        s = _state(i, prev)
        allowed = np.flatnonzero(cfg.feasible[i, s])
        if rng.random() < eps:
            a = int(rng.choice(allowed))
        else:
            q = cfg.table[i, s, c, allowed]
            best = allowed[q == q.max()]
            a = int(rng.choice(best)) if batch_index == 1 else int(best[0])
        traj.append(a)
        prev = a
    return tuple(traj)


def q_update(cfg: QLearnerConfig, trajectory: Sequence[int], outcomes: Sequence[int], context: int | None = None) -> QLearnerConfig:
    """One-step Q-learning backups along a realised prefix; returns an updated copy."""
    _check_prefix(trajectory, outcomes)
    new = copy.copy(cfg)
    new.table = cfg.table.copy()
    c = 0 if context is None else int(context)
    n = len(outcomes)
    pages = np.arange(n)
    states = np.array([_state(i, trajectory[i - 1] if i else None) for i in range(n)])
    rewards = np.asarray(outcomes, dtype=float)
    terminal = (rewards == 1) | (pages == cfg.pages - 1)
    kernels.q_fold(new.table, cfg.feasible, pages, states, np.full(n, c), np.asarray(trajectory[:n]),
                   rewards, terminal, cfg.learning_rate, cfg.discount)
    return new


# -- batch agents used by the harness ---------------------------------------


class BanditAgent:
    """Probit-bandit agent operating on whole batches of impressions."""

    def __init__(self, kind: AgentKind, forms: Sequence[ModelForm], prior_mean: float = 0.0,
                 prior_var: float = 1.0, beta: float = 1.0):
        self.kind = AgentKind(kind)
        if self.kind not in BANDIT_KINDS:
            raise ValueError(f"{self.kind} is not a bandit agent")
        self.forms = list(forms)
        self.beta = float(beta)
        self.means = [np.full(len(f.layout), float(prior_mean)) for f in self.forms]
        self.variances = [np.full(len(f.layout), float(prior_var)) for f in self.forms]
        if not prior_var > 0 or not beta > 0:
            raise ValueError("prior variance and beta must be positive")
        self._tables = [encoding_table(f) for f in self.forms]
        self._masks = [feasibility_mask(f) for f in self.forms]

    def posteriors(self) -> list[GaussianPosterior]:
        return [GaussianPosterior(m, v, self.beta) for m, v in zip(self.means, self.variances)]

    def _sampled_probs(self, contexts: np.ndarray, rng: np.random.Generator) -> list[np.ndarray]:
        n = len(contexts)
        probs = []
        for mean, var, table in zip(self.means, self.variances, self._tables):
            w = mean + np.sqrt(var) * rng.standard_normal((n, mean.size))
            u = np.einsum("nd,npqd->npq", w, table[contexts])
            probs.append(phi_cdf_array(u / self.beta))
        return probs

    def select(self, contexts: np.ndarray, batch_index: int, total_batches: int, rng: np.random.Generator) -> np.ndarray:
        probs = self._sampled_probs(contexts, rng)
        if self.kind is AgentKind.MDP:
            traj, _ = plan_batch(probs, self._masks)
            return traj
        n = len(contexts)
        rows = np.arange(n)
        traj = np.empty((n, len(probs)), dtype=np.int64)
        traj[:, 0] = probs[0][:, 0, :].argmax(axis=1)
        for i in range(1, len(probs)):
            prev = traj[:, i - 1]
            p = np.where(self._masks[i][prev], probs[i][rows, prev], -np.inf)
            traj[:, i] = p.argmax(axis=1)
        return traj

    def learn(self, contexts: np.ndarray, traj: np.ndarray, rewards: np.ndarray, presented: np.ndarray, g: np.ndarray) -> None:
        for i, (mean, var, table) in enumerate(zip(self.means, self.variances, self._tables)):
            rows = np.flatnonzero(presented[:, i])
            if rows.size == 0:
                continue
            prev = traj[rows, i - 1] if i > 0 else np.zeros(rows.size, dtype=np.int64)
            X = table[contexts[rows], prev, traj[rows, i]]
            labels = rewards[rows, i] if self.kind in SHORT_TERM_KINDS else g[rows]
            kernels.blip_fold(mean, var, X, 2.0 * labels - 1.0, self.beta)

    def state(self) -> dict:
        return {"kind": str(self.kind), "posteriors": [p.to_record() for p in self.posteriors()]}


class QAgent:
    def __init__(self, cfg: QLearnerConfig):
        self.cfg = cfg
        self.kind = AgentKind.Q_LEARNING

    def select(self, contexts: np.ndarray, batch_index: int, total_batches: int, rng: np.random.Generator) -> np.ndarray:
        cfg = self.cfg
        eps = epsilon_at(batch_index, total_batches, cfg.epsilon_start, cfg.epsilon_end)
        n = len(contexts)
        pages = cfg.pages
        explore = rng.random((n, pages)) < eps
        pick = rng.random((n, pages))
        keys = rng.random((n, pages, cfg.table.shape[3]))
        traj = np.empty((n, pages), dtype=np.int64)
        state = np.zeros(n, dtype=np.int64)
        for i in range(pages):
            feas = cfg.feasible[i, state]
            q = np.where(feas, cfg.table[i, state, contexts], -np.inf)
            top = q == q.max(axis=1, keepdims=True)
            if batch_index == 1:
                greedy = np.where(top, keys[:, i], -1.0).argmax(axis=1)
            else:
                greedy = top.argmax(axis=1)
            counts = feas.sum(axis=1)
            kth = np.minimum((pick[:, i] * counts).astype(np.int64), counts - 1)
            uniform = (np.cumsum(feas, axis=1) > kth[:, None]).argmax(axis=1)
            traj[:, i] = np.where(explore[:, i], uniform, greedy)
            state = traj[:, i] + 1
        return traj

    def learn(self, contexts: np.ndarray, traj: np.ndarray, rewards: np.ndarray, presented: np.ndarray, g: np.ndarray) -> None:
        n, pages = traj.shape
        page_idx = np.broadcast_to(np.arange(pages), (n, pages))
        states = np.concatenate([np.zeros((n, 1), dtype=np.int64), traj[:, :-1] + 1], axis=1)
        ctx = np.broadcast_to(contexts[:, None], (n, pages))
        terminal = (rewards == 1) | (page_idx == pages - 1)
        sel = presented.astype(bool)
        kernels.q_fold(self.cfg.table, self.cfg.feasible, page_idx[sel], states[sel], ctx[sel], traj[sel],
                       rewards[sel].astype(float), terminal[sel], self.cfg.learning_rate, self.cfg.discount)

    def state(self) -> dict:
        return {"kind": str(self.kind), "q_table": self.cfg.table.tolist()}
