"""Feature construction for per-page probit models.

A :class:`ModelForm` describes which columns a page's design vector carries:
an intercept, one-hot blocks for the current and previous page's content,
context main effects, and interactions between them. Incompatible
``(previous, current)`` pairs get no interaction column and are removed from
the feasible action set.

All action, page and context indices are 0-based. Column layout order is
fixed regardless of how the formula lists its terms::

    intercept | current | context_main | context_by_current | previous | previous_by_current

``context_by_current`` is ordered current-major (``x[j]:a_i[n]`` at
``n * ctx_dim + j``); ``previous_by_current`` is row-major over
``(prev, cur)`` with incompatible pairs skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

INTERCEPT = "intercept"
CURRENT = "current_action"
CONTEXT_MAIN = "context_main"
CONTEXT_BY_CURRENT = "context_by_current"
PREVIOUS = "previous_action"
PREVIOUS_BY_CURRENT = "previous_by_current"

TERM_ORDER = (INTERCEPT, CURRENT, CONTEXT_MAIN, CONTEXT_BY_CURRENT, PREVIOUS, PREVIOUS_BY_CURRENT)
_PREV_TERMS = frozenset({PREVIOUS, PREVIOUS_BY_CURRENT})
_CONTEXT_TERMS = frozenset({CONTEXT_MAIN, CONTEXT_BY_CURRENT})

# formula token -> term; interaction tokens are matched order-insensitively
_TOKENS = {
    "1": INTERCEPT,
    "a_i": CURRENT,
    "x": CONTEXT_MAIN,
    "a_prev": PREVIOUS,
    frozenset({"x", "a_i"}): CONTEXT_BY_CURRENT,
    frozenset({"a_prev", "a_i"}): PREVIOUS_BY_CURRENT,
}


class InfeasibleActionError(ValueError):
    """Raised when encoding a (previous, current) pair marked incompatible."""


@dataclass(frozen=True)
class FlowShape:
    candidates: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(int(n) for n in self.candidates))
        if len(self.candidates) < 1:
            raise ValueError("a flow needs at least one page")
        if any(n < 1 for n in self.candidates):
            raise ValueError(f"every page needs at least one candidate, got {self.candidates}")

    @classmethod
    def uniform(cls, pages: int, n: int) -> "FlowShape":
        return cls((n,) * pages)

    @property
    def pages(self) -> int:
        return len(self.candidates)

    def combinations(self) -> int:
        return int(np.prod(self.candidates, dtype=np.int64))


@dataclass(frozen=True)
class ContextSchema:
    """Context description.

    ``kind`` is ``"none"``, ``"categorical"`` (``size`` equally likely
    categories, one-hot encoded) or ``"numeric"`` (``size`` pass-through
    real features).
    """

    kind: str = "none"
    size: int = 0

    def __post_init__(self):
        if self.kind == "none":
            if self.size != 0:
                raise ValueError("context kind 'none' has size 0")
        elif self.kind == "categorical":
            if self.size < 2:
                raise ValueError("categorical context needs at least 2 categories")
        elif self.kind == "numeric":
            if self.size < 1:
                raise ValueError("numeric context needs at least 1 feature")
        else:
            raise ValueError(f"unknown context kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "ContextSchema":
        """Parse ``"none"``, ``"categorical:k"`` or ``"numeric:m"``."""
        text = text.strip()
        if text == "none":
            return cls()
        kind, sep, size = text.partition(":")
        if not sep or not size.strip().isdigit():
            raise ValueError(f"cannot parse context {text!r}; expected none, categorical:k or numeric:m")
        return cls(kind.strip(), int(size))

    def __str__(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}:{self.size}"

    @property
    def dim(self) -> int:
        return self.size

    @property
    def categories(self) -> int:
        """Number of distinct context values for tabulation (1 when context-free)."""
        if self.kind == "numeric":
            raise ValueError("numeric contexts cannot be enumerated")
        return self.size if self.kind == "categorical" else 1

    def one_hot(self, category: int) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(0)
        if self.kind != "categorical":
            raise ValueError("one_hot applies to categorical contexts only")
        if not 0 <= category < self.size:
            raise IndexError(f"category {category} out of range for {self}")
        out = np.zeros(self.size)
        out[category] = 1.0
        return out

    def value(self, context) -> np.ndarray:
        """Normalise a context argument to its numeric vector.

        Categorical contexts accept a category index; numeric contexts a
        sequence of reals; ``None`` is the empty context.
        """
        if self.kind == "none":
            if context is not None and np.size(context) != 0:
                raise ValueError("this flow has no context")
            return np.zeros(0)
        if self.kind == "categorical" and np.ndim(context) == 0:
            return self.one_hot(int(context))
        vec = np.asarray(context, dtype=float).reshape(-1)
        if vec.size != self.size:
            raise ValueError(f"context has {vec.size} entries, schema {self} expects {self.size}")
        return vec


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ModelForm:
    page: int
    terms: tuple[str, ...]
    shape: FlowShape
    ctx: ContextSchema = field(default_factory=ContextSchema)
    incompatible: frozenset = frozenset()

    def __post_init__(self):
        terms = set(self.terms)
        unknown = terms - set(TERM_ORDER)
        if unknown:
            raise ValueError(f"unknown terms {sorted(unknown)}")
        terms.add(INTERCEPT)
        if not 0 <= self.page < self.shape.pages:
            raise ValueError(f"page {self.page} outside flow of {self.shape.pages} pages")
        if self.page == 0 and terms & _PREV_TERMS:
            raise ValueError("the first page has no previous page")
        if self.ctx.kind == "none" and terms & _CONTEXT_TERMS:
            raise ValueError("context terms need a context schema")
        object.__setattr__(self, "terms", tuple(t for t in TERM_ORDER if t in terms))
        pairs = frozenset((int(p), int(c)) for p, c in self.incompatible)
        if pairs and self.page == 0:
            raise ValueError("incompatibilities apply to pages after the first")
        for p, c in pairs:
            if not (0 <= p < self.n_prev and 0 <= c < self.n_cur):
                raise IndexError(f"incompatible pair {(p, c)} out of range on page {self.page}")
        object.__setattr__(self, "incompatible", pairs)
        for p in range(self.n_prev if self.page > 0 else 0):
            if not self.feasible(p):
                raise ValueError(f"page {self.page}: every action is incompatible with previous action {p}")
        object.__setattr__(self, "_layout", self._build_layout())
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(self._layout)})

    @property
    def n_cur(self) -> int:
        return self.shape.candidates[self.page]

    @property
    def n_prev(self) -> int:
        return self.shape.candidates[self.page - 1] if self.page > 0 else 0

    def has(self, term: str) -> bool:
        return term in self.terms

    def feasible(self, prev: int | None) -> list[int]:
        if prev is None:
            return list(range(self.n_cur))
        return [a for a in range(self.n_cur) if (prev, a) not in self.incompatible]

    def _build_layout(self) -> tuple[str, ...]:
        labels: list[str] = []
        k = self.ctx.dim
        for term in self.terms:
            if term == INTERCEPT:
                labels.append("1")
            elif term == CURRENT:
                labels += [f"a_i[{n}]" for n in range(self.n_cur)]
            elif term == CONTEXT_MAIN:
                labels += [f"x[{j}]" for j in range(k)]
            elif term == CONTEXT_BY_CURRENT:
                labels += [f"x[{j}]:a_i[{n}]" for n in range(self.n_cur) for j in range(k)]
            elif term == PREVIOUS:
                labels += [f"a_prev[{m}]" for m in range(self.n_prev)]
            elif term == PREVIOUS_BY_CURRENT:
                labels += [
                    f"a_prev[{m}]:a_i[{n}]"
                    for m in range(self.n_prev)
                    for n in range(self.n_cur)
                    if (m, n) not in self.incompatible
                ]
        return tuple(labels)

    @property
    def layout(self) -> tuple[str, ...]:
        return self._layout

    def column(self, label: str) -> int:
        return self._index[label]


def parse_formula(text: str) -> tuple[str, tuple[str, ...]]:
    """Parse ``"R ~ a_i + a_prev + a_prev:a_i"`` into ``(response, terms)``.

    The intercept is always present. Interaction operands may appear in
    either order.
    """
    lhs, sep, rhs = text.partition("~")
    response = lhs.strip()
    if not sep or response not in ("R", "G"):
        raise ValueError(f"formula {text!r} must look like 'R ~ terms' or 'G ~ terms'")
    terms = [INTERCEPT]
    for raw in rhs.split("+"):
        tok = re.sub(r"\s+", "", raw)
        if not tok:
            raise ValueError(f"empty term in formula {text!r}")
        if ":" in tok:
            parts = tok.split(":")
            if len(parts) != 2:
                raise ValueError(f"only two-way interactions are supported: {tok!r}")
            key = frozenset(parts)
        else:
            key = tok
        if key not in _TOKENS:
            raise ValueError(f"unknown term {tok!r} in formula {text!r}")
        terms.append(_TOKENS[key])
    return response, tuple(t for t in TERM_ORDER if t in terms)


def column_count(form: ModelForm) -> int:
    return len(form.layout)


def encode(form: ModelForm, context, prev_action: int | None, action: int) -> FeatureVector:
    """Design vector for showing ``action`` after ``prev_action`` under ``context``."""
    return FeatureVector(encode_values(form, form.ctx.value(context), prev_action, action), form.layout)


def encode_values(form: ModelForm, x: np.ndarray, prev_action: int | None, action: int) -> np.ndarray:
    if form.page == 0:
        if prev_action is not None:
            raise ValueError("the first page takes no previous action")
    else:
        if prev_action is None:
            raise ValueError(f"page {form.page} needs the previous page's action")
        if not 0 <= prev_action < form.n_prev:
            raise IndexError(f"previous action {prev_action} out of range")
        if (prev_action, action) in form.incompatible:
            raise InfeasibleActionError(
                f"action {action} on page {form.page} is incompatible with previous action {prev_action}"
            )
    if not 0 <= action < form.n_cur:
        raise IndexError(f"action {action} out of range on page {form.page}")

    out = np.zeros(len(form.layout))
    idx = form.column
    k = form.ctx.dim
    for term in form.terms:
        if term == INTERCEPT:
            out[idx("1")] = 1.0
        elif term == CURRENT:
            out[idx(f"a_i[{action}]")] = 1.0
        elif term == CONTEXT_MAIN:
            start = idx("x[0]")
            out[start : start + k] = x
        elif term == CONTEXT_BY_CURRENT:
            start = idx(f"x[0]:a_i[{action}]")
            out[start : start + k] = x
        elif term == PREVIOUS:
            out[idx(f"a_prev[{prev_action}]")] = 1.0
        elif term == PREVIOUS_BY_CURRENT:
            out[idx(f"a_prev[{prev_action}]:a_i[{action}]")] = 1.0
    return out


def feasible_actions(form: ModelForm, prev_action: int | None) -> list[int]:
    return form.feasible(prev_action)


def feasibility_mask(form: ModelForm) -> np.ndarray:
    """Boolean ``(max(n_prev, 1), n_cur)`` table of allowed (prev, cur) pairs."""
    mask = np.ones((max(form.n_prev, 1), form.n_cur), dtype=bool)
    for p, c in form.incompatible:
        mask[p, c] = False
    return mask


def encoding_table(form: ModelForm) -> np.ndarray:
    """All encodings for an enumerable context: shape ``(C, max(n_prev,1), n_cur, d)``.

    Infeasible ``(prev, cur)`` rows are left at zero.
    """
    cats = form.ctx.categories
    n_prev = max(form.n_prev, 1)
    table = np.zeros((cats, n_prev, form.n_cur, len(form.layout)))
    mask = feasibility_mask(form)
    for c in range(cats):
        x = form.ctx.one_hot(c) if form.ctx.kind == "categorical" else np.zeros(0)
        for p in range(n_prev):
            for a in range(form.n_cur):
                if mask[p, a]:
                    table[c, p, a] = encode_values(form, x, p if form.page > 0 else None, a)
    return table


# -- standard forms ---------------------------------------------------------

MDP = "mdp"
INDEPENDENT = "independent"


def default_terms(structure: str, page: int, ctx: ContextSchema, context_main_all_pages: bool = True) -> tuple[str, ...]:
    """Terms of the standard learner forms.

    ``structure`` is ``"mdp"`` (current + previous + their interaction on
    pages after the first) or ``"independent"`` (current content only). With
    a context, the first page adds its main effect and later pages add the
    context-by-current interaction (plus the main effect unless
    ``context_main_all_pages`` is off).
    """
    terms = [INTERCEPT, CURRENT]
    if structure == MDP and page > 0:
        terms += [PREVIOUS, PREVIOUS_BY_CURRENT]
    elif structure not in (MDP, INDEPENDENT):
        raise ValueError(f"unknown form structure {structure!r}")
    if ctx.kind != "none":
        if page == 0:
            terms.append(CONTEXT_MAIN)
        else:
            terms.append(CONTEXT_BY_CURRENT)
            if context_main_all_pages:
                terms.append(CONTEXT_MAIN)
    return tuple(terms)


def build_forms(
    shape: FlowShape,
    ctx: ContextSchema,
    terms_per_page: Sequence[Iterable[str]],
    incompatible: dict[int, Iterable[tuple[int, int]]] | None = None,
) -> list[ModelForm]:
    incompatible = incompatible or {}
    return [
        ModelForm(i, tuple(terms), shape, ctx, frozenset(incompatible.get(i, ())))
        for i, terms in enumerate(terms_per_page)
    ]


def standard_forms(
    structure: str,
    shape: FlowShape,
    ctx: ContextSchema,
    incompatible: dict[int, Iterable[tuple[int, int]]] | None = None,
    context_main_all_pages: bool = True,
) -> list[ModelForm]:
    terms = [default_terms(structure, i, ctx, context_main_all_pages) for i in range(shape.pages)]
    return build_forms(shape, ctx, terms, incompatible)
