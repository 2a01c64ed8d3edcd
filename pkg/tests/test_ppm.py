import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vomc.ppm import PpmModel, PpmPredictor, ppm_predict, ppm_predict_vector, ppm_update

GOLDEN = Path(__file__).resolve().parents[1] / "src" / "vomc" / "golden" / "ppm_counts.json"
a, b, c = 0, 1, 2


def replay(seq, order=2, A=3):
    m = PpmModel(A, order)
    for i, x in enumerate(seq):
        ppm_update(m, seq[max(0, i - order):i], x)
    return m


def test_worked_string_counts_exact(abcabbc):
    m = replay(list(abcabbc))
    golden = json.loads(GOLDEN.read_text())
    for k, rows in m.table_rows().items():
        got = {"".join("abc"[x] for x in ctx) or "-": row for ctx, row in rows.items()}
        assert got == golden["counts"][str(k)]
    # spot cells quoted in the worked example
    assert m.tables[2][(b, c)] == [1, 0, 0]
    assert m.tables[1][(c,)] == [1, 0, 0]
    assert m.tables[0][()] == [2, 3, 2]


def test_worked_example_exact(abcabbc):
    m = replay(list(abcabbc))
    assert m.predict([b, c], a, exact=True) == Fraction(1, 2)
    assert m.predict([b, c], b, exact=True) == Fraction(3, 32)
    assert m.predict([b, c], c, exact=True) == Fraction(1, 16)
    v = ppm_predict_vector(m, [b, c])
    raw = np.array([1 / 2, 3 / 32, 1 / 16])
    assert np.allclose(v, raw / raw.sum()) and abs(v.sum() - 1) < 1e-12


def test_fresh_model_is_uniform():
    assert np.allclose(ppm_predict_vector(PpmModel(3, 2), [a, b]), 1 / 3)
    assert ppm_predict(PpmModel(4, 1), [a], c) == 0.25


def test_totals():
    m = PpmModel(3, 2)
    ppm_update(m, [], a)
    assert sum(m.tables[0][()]) == 1
    m = replay([a, b, c] * 5)
    assert sum(m.tables[0][()]) == 15


def test_unseen_long_context_charges_no_escape(abcabbc):
    m = replay(list(abcabbc))
    # (a, c) never seen at order 2: falls to order 1 context (c) directly
    assert m.predict([a, c], a) == pytest.approx(1 / 2)


@given(st.lists(st.integers(0, 2), min_size=0, max_size=60), st.integers(0, 3), st.lists(st.integers(0, 2), min_size=3, max_size=3))
def test_probabilities_in_unit_interval(seq, order, ctx):
    m = replay(seq, order)
    raw = m.raw_vector(ctx)
    assert np.all(raw > 0) and np.all(raw <= 1)
    assert abs(m.predict_vector(ctx).sum() - 1) < 1e-12


def test_converges_to_markov_conditionals():
    rng = np.random.default_rng(0)
    P = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8], [0.3, 0.4, 0.3]])
    x = [0]
    for _ in range(10000):
        x.append(int(rng.choice(3, p=P[x[-1]])))
    pred = PpmPredictor(3, 1, x[:1])
    for s in x[1:]:
        pred.update(s)
    gaps = [np.abs(pred.model.predict_vector([k]) - P[k]).sum() for k in range(3)]
    assert np.mean(gaps) < 0.05


def test_order_validation():
    with pytest.raises(ValueError):
        PpmModel(3, -1)
    with pytest.raises(ValueError):
        PpmModel(3, 1).update([], 5)
