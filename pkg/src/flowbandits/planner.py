"""Exact backward induction over a layout of pages.

Given per-page success probabilities (from one Thompson draw of the
weights), the value of reaching page ``i`` after showing ``prev`` on page
``i - 1`` is::

    G(prev) = max_a  p(prev, a) + (1 - p(prev, a)) * G_next(a)

with ``G_next = 0`` after the last page. Ties go to the lowest action index;
incompatible pairs are left out of the max.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blip import plugin_success
from .features import ModelForm, encode_values, feasibility_mask


class InfeasibleConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class PlanResult:
    best_first: int
    policy: tuple[dict[int, int], ...]
    value: tuple[dict[int, float], ...]
    first_value: float
    trajectory: tuple[int, ...]
    evaluations: int = 0

    @property
    def pages(self) -> int:
        return len(self.trajectory)


def plan_from_tables(first: Sequence[float], pages: Sequence[np.ndarray], masks: Sequence[np.ndarray] | None = None) -> PlanResult:
    """Plan from explicit probabilities.

    ``first[a]`` is page 1's success probability; ``pages[k][prev, cur]`` is
    page ``k + 2``'s. ``masks[k]`` (same shape) marks allowed pairs.

    ``policy[k]`` and ``value[k]`` describe page ``k + 2``: the best action
    and the continuation value for each previous action.
    """
    first = [float(p) for p in first]
    pages = [np.asarray(t, dtype=float) for t in pages]
    if masks is None:
        masks = [np.ones(t.shape, dtype=bool) for t in pages]
    policy: list[dict[int, int]] = []
    value: list[dict[int, float]] = []
    g_next = [0.0] * (pages[-1].shape[1] if pages else len(first))
    for table, mask in zip(reversed(pages), reversed(masks)):
        n_prev, n_cur = table.shape
        if len(g_next) != n_cur:
            raise ValueError("consecutive probability tables disagree on the page size")
        pol, val = {}, {}
        for prev in range(n_prev):
            best_a, best = -1, -np.inf
            for a in range(n_cur):
                if not mask[prev, a]:
                    continue
                p = table[prev, a]
                score = p + (1.0 - p) * g_next[a]
                if score > best:
                    best_a, best = a, score
            if best_a < 0:
                raise InfeasibleConfigurationError(f"no feasible action after previous action {prev}")
            pol[prev], val[prev] = best_a, best
        policy.append(pol)
        value.append(val)
        g_next = [val[p] for p in range(n_prev)]
    policy.reverse()
    value.reverse()
    if len(g_next) != len(first):
        raise ValueError("first page size disagrees with the next table")
    best_first, first_value = -1, -np.inf
    for a, p in enumerate(first):
        score = p + (1.0 - p) * g_next[a]
        if score > first_value:
            best_first, first_value = a, score
    traj = [best_first]
    for pol in policy:
        traj.append(pol[traj[-1]])
    return PlanResult(best_first, tuple(policy), tuple(value), first_value, tuple(traj))


def plan(forms: Sequence[ModelForm], sampled_weights: Sequence[np.ndarray], context=None, beta: float = 1.0) -> PlanResult:
    """Plan a layout under sampled weights ``sampled_weights[i]`` for page ``i``."""
    if len(forms) != len(sampled_weights):
        raise ValueError("one weight vector per page is required")
    ctx = forms[0].ctx
    x = ctx.value(context)
    evals = 0

    def prob(form, w, prev, a):
        nonlocal evals
        evals += 1
        b = encode_values(form, x, prev, a)
        return plugin_success(w, b, beta)

    for form, w in zip(forms, sampled_weights):
        if len(w) != len(form.layout):
            raise ValueError(f"page {form.page}: weight dim {len(w)} != form dim {len(form.layout)}")
    first = [prob(forms[0], sampled_weights[0], None, a) for a in range(forms[0].n_cur)]
    tables, masks = [], []
    for form, w in zip(forms[1:], sampled_weights[1:]):
        mask = feasibility_mask(form)
        table = np.zeros(mask.shape)
        for prev in range(form.n_prev):
            for a in form.feasible(prev):
                table[prev, a] = prob(form, w, prev, a)
        tables.append(table)
        masks.append(mask)
    result = plan_from_tables(first, tables, masks)
    return PlanResult(result.best_first, result.policy, result.value, result.first_value,
                      result.trajectory, evals)


def plan_value(result: PlanResult) -> float:
    return result.first_value


def plan_batch(probs: Sequence[np.ndarray], masks: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised planning for ``n`` independent draws.

    ``probs[i]`` has shape ``(n, n_prev, n_cur)`` (``n_prev = 1`` on the
    first page) and ``masks[i]`` shape ``(n_prev, n_cur)``. Returns the
    ``(n, D)`` layouts and their planned values.
    """
    pages = len(probs)
    n = probs[0].shape[0]
    g_next = np.zeros((n, probs[-1].shape[2]))
    policies = [None] * pages
    for i in range(pages - 1, 0, -1):
        p = probs[i]
        score = p + (1.0 - p) * g_next[:, None, :]
        score = np.where(masks[i][None], score, -np.inf)
        best = score.argmax(axis=2)
        policies[i] = best
        g_next = np.take_along_axis(score, best[:, :, None], axis=2)[:, :, 0]
    p = probs[0][:, 0, :]
    score = p + (1.0 - p) * g_next
    first = score.argmax(axis=1)
    rows = np.arange(n)
    traj = np.empty((n, pages), dtype=np.int64)
    traj[:, 0] = first
    for i in range(1, pages):
        traj[:, i] = policies[i][rows, traj[:, i - 1]]
    return traj, score[rows, first]
