import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import model_params
from prioinv import ModelError, ModelParams, State, total_rate, transitions
from prioinv.model import MissingKeyError, labelled_transitions


def as_pairs(ts):
    return [(tuple(t.target), t.rate) for t in ts]


def test_transitions_spec_examples(base):
    assert as_pairs(transitions(base, (0, 0, 0))) == [((0, 0, 1), 4)]
    assert as_pairs(transitions(base, (0, 0, 2))) == [((1, 0, 2), 1), ((0, 1, 2), 2)]
    assert as_pairs(transitions(base, (2, 1, 1))) == [
        ((3, 1, 1), 1), ((2, 2, 1), 1), ((1, 1, 0), 3), ((2, 1, 2), 4)]


@pytest.mark.parametrize("z, expected", [((0, 0, 0), 4), ((0, 0, 2), 3), ((2, 1, 1), 9)])
def test_total_rate_examples(base, z, expected):
    assert total_rate(base, z) == expected


@pytest.mark.parametrize("z", [(0, 0, 3), (-1, 0, 1), (0, -2, 1), (0, 0, -1)])
def test_invalid_state(base, z):
    with pytest.raises(ModelError):
        transitions(base, z)
    with pytest.raises(ModelError):
        total_rate(base, z)


@pytest.mark.parametrize("kwargs", [
    dict(lambda1=0), dict(lambda2=-1), dict(mu=0), dict(nu=float("inf")),
    dict(p=-0.1), dict(p=1.5), dict(b=1, s=0), dict(s=0), dict(s=2), dict(s=1.5), dict(b=2.0),
])
def test_param_validation(kwargs):
    d = dict(lambda1=1, lambda2=1, mu=3, nu=1, p=0.5, s=1, b=2)
    d.update(kwargs)
    with pytest.raises(ModelError):
        ModelParams(**d)


def test_p_endpoints_allowed():
    ModelParams(1, 1, 3, 1, 0.0, 1, 2)
    ModelParams(1, 1, 3, 1, 1.0, 1, 2)


def test_serialization_round_trip(base):
    assert ModelParams.from_json(base.to_json()) == base
    assert ModelParams.from_keyvalue(base.to_keyvalue()) == base
    assert set(json.loads(base.to_json())) == {"lambda1", "lambda2", "mu", "nu", "p", "s", "b"}


def test_keyvalue_parsing():
    text = "# comment\nlambda1 = 1\nlambda2=2.5\nmu=4\nnu=1e0\np=1\ns=1\nb=3  # trailing\n"
    p = ModelParams.from_keyvalue(text)
    assert (p.lambda2, p.nu, p.b) == (2.5, 1.0, 3)


def test_missing_key_named():
    with pytest.raises(MissingKeyError) as info:
        ModelParams.from_dict(dict(lambda1=1, lambda2=1, nu=1, p=1, s=1, b=2))
    assert info.value.key == "mu"


@given(model_params(), st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_move_shapes_and_conservation(P, n1, n2, k):
    k = min(k, P.b)
    z = State(n1, n2, k)
    moves = labelled_transitions(P, z)
    assert total_rate(P, z) == sum(r for _, _, r in moves)
    for label, t, r in moves:
        assert r > 0
        d = (t.n1 - n1, t.n2 - n2, t.k - k)
        assert d == {"A1": (1, 0, 0), "A2": (0, 1, 0), "S1": (-1, 0, -1),
                     "S2": (0, -1, -1), "R": (0, 0, 1)}[label]
    labels = [m[0] for m in moves]
    assert len(labels) == len(set(labels))
    assert ("S1" in labels) == (n1 > 0 and k > 0)
    assert ("S2" in labels) == (n1 == 0 and n2 > 0 and k > 0)
    assert ("R" in labels) == (k < P.b)
    assert ("A1" in labels) == (k > 0)


@given(model_params())
def test_ordinary_arrival_gating(P):
    rates = [dict((l, r) for l, _, r in labelled_transitions(P, (0, 0, k))).get("A2", 0.0)
             for k in range(P.b + 1)]
    expected = [0.0] + [P.p * P.lambda2] * P.s + [P.lambda2] * (P.b - P.s)
    assert rates == expected
    assert all(a <= b for a, b in zip(rates, rates[1:]))
    if P.p == 1.0:
        assert all(r == P.lambda2 for r in rates[1:])
