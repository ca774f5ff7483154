"""Synthetic linear-flow environment with a probit ground truth.

Per page the generator utility is the page's full design vector dotted with
``multiplier * draw``: the intercept draw has mean ``phi_inv(base_rate) *
beta_gen``, every other draw is standard normal, and the multipliers are
``alpha1`` for current-content and context main effects, ``alpha_c`` for
previous-content main effects and ``alpha2`` for current-by-previous and
current-by-context interactions. A page succeeds with probability
``Phi(utility / beta_gen)``; the first success ends the flow.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import (
    CONTEXT_BY_CURRENT,
    CONTEXT_MAIN,
    CURRENT,
    INTERCEPT,
    PREVIOUS,
    PREVIOUS_BY_CURRENT,
    ContextSchema,
    FlowShape,
    ModelForm,
    encode_values,
)
from .probit import phi_cdf, phi_cdf_array, phi_inv

ORACLE_LIMIT = 10**6

EXIT = "exit"
END = "end"


class CombinatorialLimitError(ValueError):
    pass


@dataclass(frozen=True)
class FlowState:
    """Position in the flow: ``start``, ``page`` (index >= 1), ``exit`` or ``end``."""

    kind: str
    context: object = None
    page: int = 0
    prev_action: int | None = None

    @property
    def terminal(self) -> bool:
        return self.kind in (EXIT, END)


@dataclass(frozen=True)
class StepOutcome:
    presented: tuple[tuple[int, int], ...]
    rewards: tuple[int, ...]
    g: int
    terminal: str


@dataclass(frozen=True)
class GroundTruth:
    shape: FlowShape
    ctx: ContextSchema
    alpha1: float
    alpha_c: float
    alpha2: float
    base_rate: float
    forms: tuple[ModelForm, ...]
    draws: tuple[np.ndarray, ...]
    multipliers: tuple[np.ndarray, ...]
    incompatible: dict

    @property
    def beta_gen(self) -> float:
        return 1.0 + self.alpha1 + self.alpha_c + self.alpha2

    @property
    def weights(self) -> tuple[np.ndarray, ...]:
        """Effective generator weights, ``multiplier * draw`` per page."""
        return tuple(m * d for m, d in zip(self.multipliers, self.draws))

    def feasible(self, page: int, prev: int | None) -> list[int]:
        n = self.shape.candidates[page]
        if page == 0 or prev is None:
            return list(range(n))
        bad = self.incompatible.get(page, frozenset())
        return [a for a in range(n) if (prev, a) not in bad]

    def check_trajectory(self, trajectory: Sequence[int]) -> None:
        if len(trajectory) != self.shape.pages:
            raise ValueError(f"trajectory has {len(trajectory)} entries for {self.shape.pages} pages")
        prev = None
        for i, a in enumerate(trajectory):
            if a not in self.feasible(i, prev):
                raise ValueError(f"action {a} is not feasible on page {i} after {prev}")
            prev = a


def generator_forms(shape: FlowShape, ctx: ContextSchema) -> tuple[ModelForm, ...]:
    forms = []
    for i in range(shape.pages):
        terms = [INTERCEPT, CURRENT]
        if ctx.kind != "none":
            terms.append(CONTEXT_MAIN)
        if i > 0:
            terms += [PREVIOUS, PREVIOUS_BY_CURRENT]
            if ctx.kind != "none":
                terms.append(CONTEXT_BY_CURRENT)
        forms.append(ModelForm(i, tuple(terms), shape, ctx))
    return tuple(forms)


def _multipliers(form: ModelForm, alpha1: float, alpha_c: float, alpha2: float) -> np.ndarray:
    out = np.empty(len(form.layout))
    for j, label in enumerate(form.layout):
        if label == "1":
            out[j] = 1.0
        elif ":" in label:
            out[j] = alpha2
        elif label.startswith("a_prev"):
            out[j] = alpha_c
        else:
            out[j] = alpha1
    return out


def sample_ground_truth(
    shape: FlowShape,
    ctx: ContextSchema,
    alpha1: float,
    alpha_c: float,
    alpha2: float,
    base_rate: float,
    rng: np.random.Generator,
    incompatible: dict | None = None,
) -> GroundTruth:
    if not 0.0 < base_rate < 1.0:
        raise ValueError(f"base_rate must lie in (0, 1), got {base_rate}")
    forms = generator_forms(shape, ctx)
    beta_gen = 1.0 + alpha1 + alpha_c + alpha2
    intercept_mean = phi_inv(base_rate) * beta_gen
    draws, mults = [], []
    for form in forms:
        d = rng.standard_normal(len(form.layout))
        d[form.column("1")] += intercept_mean
        draws.append(d)
        mults.append(_multipliers(form, alpha1, alpha_c, alpha2))
    incompatible = {int(k): frozenset(map(tuple, v)) for k, v in (incompatible or {}).items()}
    return GroundTruth(shape, ctx, float(alpha1), float(alpha_c), float(alpha2), float(base_rate),
                       forms, tuple(draws), tuple(mults), incompatible)


def utility(gt: GroundTruth, page: int, context, prev_action: int | None, action: int) -> float:
    form = gt.forms[page]
    b = encode_values(form, gt.ctx.value(context), prev_action if page > 0 else None, action)
    return float(b @ (gt.multipliers[page] * gt.draws[page]))


def success_prob(gt: GroundTruth, page: int, context, prev_action: int | None, action: int) -> float:
    return phi_cdf(utility(gt, page, context, prev_action, action) / gt.beta_gen)


def success_tables(gt: GroundTruth) -> list[np.ndarray]:
    """Per page, success probabilities indexed ``[category, prev, cur]``.

    The first page uses a singleton ``prev`` axis. Infeasible pairs are
    still filled in; callers mask them.
    """
    tables = []
    cats = gt.ctx.categories
    for i, form in enumerate(gt.forms):
        w = gt.multipliers[i] * gt.draws[i]
        n_prev = max(form.n_prev, 1)
        u = np.empty((cats, n_prev, form.n_cur))
        for c in range(cats):
            x = gt.ctx.one_hot(c)
            for p in range(n_prev):
                for a in range(form.n_cur):
                    u[c, p, a] = encode_values(form, x, p if i > 0 else None, a) @ w
        tables.append(phi_cdf_array(u / gt.beta_gen))
    return tables


def expected_g(gt: GroundTruth, context, trajectory: Sequence[int]) -> float:
    """Expected long-term reward ``R1 + (1-R1) R2 + ...`` of a full layout."""
    gt.check_trajectory(trajectory)
    total, reach = 0.0, 1.0
    prev = None
    for i, a in enumerate(trajectory):
        r = success_prob(gt, i, context, prev, a)
        total += reach * r
        reach *= 1.0 - r
        prev = a
    return total


def oracle_best(gt: GroundTruth, context) -> tuple[tuple[int, ...], float]:
    """Exhaustive search for the layout with the highest expected long-term reward.

    Ties keep the lexicographically smallest layout.
    """
    if gt.shape.combinations() > ORACLE_LIMIT:
        raise CombinatorialLimitError(
            f"{gt.shape.combinations()} layouts exceed the enumeration limit {ORACLE_LIMIT}"
        )
    x = gt.ctx.value(context)
    weights = gt.weights
    cache: dict = {}

    def prob(i, prev, a):
        key = (i, prev, a)
        if key not in cache:
            b = encode_values(gt.forms[i], x, prev, a)
            cache[key] = phi_cdf(float(b @ weights[i]) / gt.beta_gen)
        return cache[key]

    best, best_val = None, -1.0
    for traj in itertools.product(*(range(n) for n in gt.shape.candidates)):
        prev, total, reach, ok = None, 0.0, 1.0, True
        for i, a in enumerate(traj):
            if a not in gt.feasible(i, prev):
                ok = False
                break
            r = prob(i, prev, a)
            total += reach * r
            reach *= 1.0 - r
            prev = a
        if ok and total > best_val:
            best, best_val = traj, total
    return best, best_val


def realize(gt: GroundTruth, context, trajectory: Sequence[int], rng: np.random.Generator) -> StepOutcome:
    """Walk the flow, drawing each page's outcome until the first success."""
    gt.check_trajectory(trajectory)
    presented, rewards = [], []
    prev = None
    for i, a in enumerate(trajectory):
        r = int(rng.random() < success_prob(gt, i, context, prev, a))
        presented.append((i, a))
        rewards.append(r)
        if r:
            return StepOutcome(tuple(presented), tuple(rewards), 1, EXIT)
        prev = a
    return StepOutcome(tuple(presented), tuple(rewards), 0, END)


def trajectory_probs(tables: Sequence[np.ndarray], contexts: np.ndarray, traj: np.ndarray) -> np.ndarray:
    """Gather per-page success probabilities ``(n, D)`` for a batch of layouts."""
    n, pages = traj.shape
    out = np.empty((n, pages))
    out[:, 0] = tables[0][contexts, 0, traj[:, 0]]
    for i in range(1, pages):
        out[:, i] = tables[i][contexts, traj[:, i - 1], traj[:, i]]
    return out


def realize_batch(probs: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised :func:`realize` for a batch of per-page success probabilities.

    Returns ``(rewards, presented, g)``: ``rewards`` and ``presented`` are
    ``(n, D)`` arrays (rewards zero on unpresented pages), ``g`` is ``(n,)``.
    One uniform is drawn per page per impression whether or not the page is
    reached, so the stream position depends only on the batch shape.
    """
    u = rng.random(probs.shape)
    hit = u < probs
    g = hit.any(axis=1)
    first = np.where(g, hit.argmax(axis=1), probs.shape[1])
    pages = np.arange(probs.shape[1])
    presented = pages[None, :] <= first[:, None]
    rewards = (pages[None, :] == first[:, None]).astype(np.int8)
    return rewards, presented, g.astype(np.int8)


def expected_g_batch(probs: np.ndarray) -> np.ndarray:
    """Row-wise ``R1 + (1-R1) R2 + ...``, summed in the same order as :func:`expected_g`."""
    total = np.zeros(probs.shape[0])
    reach = np.ones(probs.shape[0])
    for i in range(probs.shape[1]):
        total += reach * probs[:, i]
        reach *= 1.0 - probs[:, i]
    return total


def oracle_from_tables(tables: Sequence[np.ndarray], category: int, masks: Sequence[np.ndarray]) -> tuple[tuple[int, ...], float]:
    """Exhaustive best layout using precomputed success tables.

    ``masks[i]`` is page ``i``'s ``(prev, cur)`` feasibility table. The sum
    order matches :func:`expected_g_batch`, so the oracle's value and a
    chosen layout's expected reward are comparable bit for bit.
    """
    sizes = [t.shape[2] for t in tables]
    if int(np.prod(sizes, dtype=np.int64)) > ORACLE_LIMIT:
        raise CombinatorialLimitError(f"{int(np.prod(sizes))} layouts exceed the enumeration limit {ORACLE_LIMIT}")
    rows = [tables[i][category].tolist() for i in range(len(tables))]
    best, best_val = None, -1.0
    for traj in itertools.product(*(range(n) for n in sizes)):
        total, reach, prev, ok = 0.0, 1.0, 0, True
        for i, a in enumerate(traj):
            if i > 0 and not masks[i][prev, a]:
                ok = False
                break
            r = rows[i][prev][a]
            total += reach * r
            reach *= 1.0 - r
            prev = a
        if ok and total > best_val:
            best, best_val = traj, total
    return best, best_val
