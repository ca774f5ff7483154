import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowbandits.features import ContextSchema, FlowShape, ModelForm, column_count, standard_forms
from flowbandits.planner import (
    InfeasibleConfigurationError,
    plan,
    plan_batch,
    plan_from_tables,
    plan_value,
)

from oracles import brute_force_best, layout_value

D2_FIRST = [0.2, 0.4]
D2_PAGE2 = np.array([[0.9, 0.1], [0.1, 0.2]])


def test_two_page_example():
    res = plan_from_tables(D2_FIRST, [D2_PAGE2])
    assert res.trajectory == (0, 0)
    assert plan_value(res) == pytest.approx(0.92, abs=1e-15)
    best, arg = brute_force_best(D2_FIRST, [D2_PAGE2])
    assert best == pytest.approx(0.92, abs=1e-15) and arg == {(0, 0)}
    assert res.policy == ({0: 0, 1: 1},)
    assert res.value[0][0] == pytest.approx(0.9)


def test_single_page():
    res = plan_from_tables([0.3, 0.7, 0.1], [])
    assert res.trajectory == (1,) and res.first_value == 0.7
    assert plan_value(plan_from_tables([0.42], [])) == 0.42


def test_ties_go_to_lowest_index():
    res = plan_from_tables([0.5] * 3, [np.full((3, 3), 0.5)] * 2)
    assert res.trajectory == (0, 0, 0)
    assert plan_value(res) == pytest.approx(0.875, abs=1e-15)


def test_zero_weights_plan():
    forms = standard_forms("mdp", FlowShape.uniform(3, 3), ContextSchema())
    res = plan(forms, [np.zeros(column_count(f)) for f in forms], beta=1.0)
    assert res.trajectory == (0, 0, 0)
    assert plan_value(res) == pytest.approx(0.875, abs=1e-15)


def test_infeasible_pair_is_skipped():
    page2 = np.array([[0.1, 0.2, 0.99], [0.1, 0.2, 0.3]])
    mask = np.ones((2, 3), dtype=bool)
    mask[0, 2] = False
    res = plan_from_tables([0.9, 0.1], [page2], [mask])
    assert res.trajectory == (0, 1)


def test_empty_feasible_set():
    mask = np.array([[False, False], [True, True]])
    with pytest.raises(InfeasibleConfigurationError):
        plan_from_tables([0.5, 0.5], [np.full((2, 2), 0.5)], [mask])


def test_weight_dimension_checked():
    forms = standard_forms("mdp", FlowShape.uniform(2, 2), ContextSchema())
    with pytest.raises(ValueError):
        plan(forms, [np.zeros(3), np.zeros(8)])
    with pytest.raises(ValueError):
        plan(forms, [np.zeros(3)])


def _random_instance(rng, pages, sizes):
    first = rng.random(sizes[0])
    tables, masks = [], []
    for i in range(1, pages):
        t = rng.random((sizes[i - 1], sizes[i]))
        m = rng.random(t.shape) < 0.7
        for r in range(m.shape[0]):
            if not m[r].any():
                m[r, rng.integers(m.shape[1])] = True
        tables.append(t)
        masks.append(m)
    return first, tables, masks


def test_matches_enumeration_on_random_instances():
    rng = np.random.default_rng(20240)
    for _ in range(1000):
        pages = int(rng.integers(1, 5))
        sizes = rng.integers(1, 5, pages)
        first, tables, masks = _random_instance(rng, pages, sizes)
        res = plan_from_tables(first, tables, masks)
        best, arg = brute_force_best(first, tables, masks)
        assert abs(res.first_value - best) <= 1e-12
        assert res.trajectory in arg
        for i in range(1, pages):
            assert masks[i - 1][res.trajectory[i - 1], res.trajectory[i]]


def test_values_in_unit_interval():
    rng = np.random.default_rng(5)
    first, tables, masks = _random_instance(rng, 4, [4, 4, 4, 4])
    res = plan_from_tables(first, tables, masks)
    for page in res.value:
        assert all(0.0 <= v <= 1.0 for v in page.values())


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_raising_a_probability_never_lowers_value(seed, bump):
    rng = np.random.default_rng(seed)
    first, tables, masks = _random_instance(rng, 3, [3, 3, 3])
    before = plan_from_tables(first, tables, masks).first_value
    where = int(rng.integers(3))
    if where == 0:
        a = int(rng.integers(3))
        first = first.copy()
        first[a] = first[a] + (1 - first[a]) * bump
    else:
        t = tables[where - 1].copy()
        r, c = rng.integers(3, size=2)
        t[r, c] += (1 - t[r, c]) * bump
        tables = list(tables)
        tables[where - 1] = t
    after = plan_from_tables(first, tables, masks).first_value
    assert after >= before - 1e-15


@pytest.mark.parametrize("pages, n", [(2, 3), (3, 3), (4, 5), (6, 3), (3, 8)])
def test_evaluation_count(pages, n):
    forms = standard_forms("mdp", FlowShape.uniform(pages, n), ContextSchema())
    rng = np.random.default_rng(0)
    res = plan(forms, [rng.standard_normal(column_count(f)) for f in forms])
    assert res.evaluations == n + (pages - 1) * n * n


def test_evaluation_count_skips_incompatible():
    shape = FlowShape.uniform(2, 3)
    from flowbandits.features import INTERCEPT, CURRENT, PREVIOUS, PREVIOUS_BY_CURRENT

    forms = [standard_forms("mdp", shape, ContextSchema())[0],
             ModelForm(1, (INTERCEPT, CURRENT, PREVIOUS, PREVIOUS_BY_CURRENT), shape,
                       incompatible=frozenset({(0, 2)}))]
    res = plan(forms, [np.zeros(column_count(f)) for f in forms])
    assert res.evaluations == 3 + 8


def test_plan_uses_plugin_probabilities():
    shape = FlowShape.uniform(2, 2)
    forms = standard_forms("mdp", shape, ContextSchema())
    rng = np.random.default_rng(9)
    ws = [rng.standard_normal(column_count(f)) for f in forms]
    beta = 2.5
    res = plan(forms, ws, beta=beta)
    from flowbandits.features import encode_values
    from flowbandits.probit import phi_cdf

    def p(form, w, prev, a):
        return phi_cdf(float(encode_values(form, np.zeros(0), prev, a) @ w) / beta)

    vals = {}
    for a1 in range(2):
        for a2 in range(2):
            vals[(a1, a2)] = layout_value([p(forms[0], ws[0], None, a1), p(forms[1], ws[1], a1, a2)])
    best = max(vals, key=vals.get)
    assert res.trajectory == best
    assert res.first_value == pytest.approx(vals[best], abs=1e-14)


def test_batch_planner_matches_scalar():
    rng = np.random.default_rng(77)
    for _ in range(50):
        pages = int(rng.integers(1, 5))
        sizes = rng.integers(1, 5, pages)
        n = 6
        draws = [_random_instance(rng, pages, sizes) for _ in range(n)]
        masks = [np.ones((1, sizes[0]), dtype=bool)] + draws[0][2]
        probs = [np.stack([d[0] for d in draws])[:, None, :]]
        for i in range(1, pages):
            probs.append(np.stack([d[1][i - 1] for d in draws]))
        traj, vals = plan_batch(probs, masks)
        for j, (first, tables, _) in enumerate(draws):
            res = plan_from_tables(first, tables, masks[1:])
            assert tuple(traj[j]) == res.trajectory
            assert vals[j] == pytest.approx(res.first_value, abs=1e-15)
