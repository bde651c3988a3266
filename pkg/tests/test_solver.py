import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import stable_params
from oracles import cut_flows
from prioinv import (ModelParams, TruncationSpec, build_generator, enumerate_states, marginal,
                     solve, solve_stationary)
from prioinv import export
from prioinv.solver import (CapacityError, ConvergenceError, StructuralError, X1, X1_GIVEN_Y_POS,
                            X2, X_TOTAL, JOINT, Y, recurrent_class)


def test_enumerate_examples():
    idx = enumerate_states(TruncationSpec(0, 0), 2)
    assert idx.states == [(0, 0, 0), (0, 0, 1), (0, 0, 2)]
    idx = enumerate_states(TruncationSpec(1, 0), 2)
    assert len(idx) == 6 and idx.index((1, 0, 2)) == 5
    assert len(enumerate_states(TruncationSpec(10, 10), 5)) == 726


@given(st.integers(0, 5), st.integers(0, 5), st.integers(2, 5))
def test_index_bijection(c1, c2, b):
    idx = enumerate_states(TruncationSpec(c1, c2), b)
    states = idx.states
    assert states == sorted(states)
    assert all(idx.index(z) == i for i, z in enumerate(states))
    assert np.array_equal(idx.coords(), np.array(states))


def test_capacity_error():
    with pytest.raises(CapacityError):
        enumerate_states(TruncationSpec(100, 100), 5, max_states=1000)


def test_truncation_validation():
    with pytest.raises(ValueError):
        TruncationSpec(-1, 0)


def test_generator_zero_caps(base):
    gen = build_generator(base, TruncationSpec(0, 0))
    Q = gen.Q.toarray()
    assert np.array_equal(Q, [[-4, 4, 0], [0, -4, 4], [0, 0, 0]])
    d = solve_stationary(gen)
    assert np.array_equal(d.probabilities, [0.0, 0.0, 1.0])
    assert np.array_equal(marginal(d, Y).values, [0.0, 0.0, 1.0])
    assert d.residual == 0.0


def test_generator_entry(regime):
    gen = build_generator(regime, TruncationSpec(20, 20))
    assert gen.rate((0, 0, 1), (1, 0, 1)) == 1.0


@given(stable_params(max_b=4), st.integers(0, 4), st.integers(0, 4))
@settings(max_examples=30)
def test_generator_conservative(P, c1, c2):
    gen = build_generator(P, TruncationSpec(c1, c2))
    Q = gen.Q
    for i in range(Q.shape[0]):
        row = Q.getrow(i).data
        assert abs(math.fsum(row)) <= np.spacing(abs(Q[i, i]))
    off = gen.offdiag()
    assert np.all(off.data >= 0)
    assert np.all(Q.diagonal() <= 0)
    # each row is the model's transitions minus arrivals that overshoot a cap
    from prioinv.model import labelled_transitions
    for i in range(gen.dimension):
        z = gen.index.state(i)
        row = off.getrow(i)
        got = {gen.index.state(j): v for j, v in zip(row.indices, row.data)}
        kept = {t: r for lab, t, r in labelled_transitions(P, z) if t in gen.index}
        dropped = [lab for lab, t, _ in labelled_transitions(P, z) if t not in gen.index]
        assert got == kept
        assert set(dropped) <= {"A1", "A2"}


def test_unreachable_states_excluded(regime):
    trunc = TruncationSpec(3, 2)
    gen = build_generator(regime, trunc)
    support = set(recurrent_class(gen).tolist())
    missing = {gen.index.state(i) for i in range(gen.dimension)} - {gen.index.state(i) for i in support}
    # (cap1, n2, 0) can only be entered by a priority service from above the cap
    assert missing == {(3, n2, 0) for n2 in range(3)}
    d = solve_stationary(gen)
    assert all(d.prob(z) == 0.0 for z in missing)


def test_structural_error():
    import scipy.sparse as sp
    from prioinv.solver import GeneratorMatrix, StateIndex

    P = ModelParams(1, 1, 3, 1, 1.0, 1, 2)
    idx = StateIndex(TruncationSpec(0, 0), 2)
    Q = sp.csr_matrix(np.zeros((3, 3)))  # three absorbing states
    with pytest.raises(StructuralError):
        solve_stationary(GeneratorMatrix(Q, idx, P, TruncationSpec(0, 0)))


def test_convergence_error(regime):
    gen = build_generator(regime, TruncationSpec(10, 10))
    with pytest.raises(ConvergenceError) as info:
        solve_stationary(gen, method="power", max_iter=3)
    assert info.value.residual > 1e-10


def test_geometric_ratio_regime(regime):
    d = solve(regime, TruncationSpec(20, 20))
    q = marginal(d, X1_GIVEN_Y_POS).values
    assert np.allclose(q[1:] / q[:-1], 0.25, rtol=0, atol=1e-10)
    # oracle: direct cut flows across {X1 <= n} summed off the generator
    gen = build_generator(regime, TruncationSpec(20, 20))
    coords = gen.index.coords()
    for n in range(20):
        out, inn = cut_flows(gen, d.probabilities, coords[:, 0] <= n)
        assert abs(out - inn) <= 1e-12
        assert math.isclose(out, q[n] * marginal(d, X1_GIVEN_Y_POS).mass * regime.lambda1, rel_tol=1e-9)


def test_residual_contract(regime):
    for method in ("gth", "power"):
        d = solve(regime, TruncationSpec(8, 8), method=method)
        assert d.residual <= (1e-12 if method == "gth" else 1e-10)
        assert d.method == method
        assert np.all(d.probabilities >= 0)
        assert abs(math.fsum(d.probabilities) - 1) <= 1e-12


def test_gth_and_power_agree(regime):
    a = solve(regime, TruncationSpec(10, 10), method="gth")
    b = solve(regime, TruncationSpec(10, 10), method="power", tol=1e-13)
    assert np.max(np.abs(a.probabilities - b.probabilities)) < 1e-10


def test_gth_matches_dense_nullspace(base):
    gen = build_generator(base, TruncationSpec(4, 3))
    d = solve_stationary(gen, method="gth")
    sup = d.support
    Q = gen.Q.toarray()[np.ix_(sup, sup)]
    A = np.vstack([Q.T, np.ones(len(sup))])
    rhs = np.zeros(len(sup) + 1)
    rhs[-1] = 1
    ref, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    assert np.allclose(d.probabilities[sup], ref, atol=1e-13)


def test_gth_deterministic(regime):
    a = solve(regime, TruncationSpec(15, 15))
    b = solve(regime, TruncationSpec(15, 15))
    assert a.probabilities.tobytes() == b.probabilities.tobytes()


def test_marginals(base):
    d = solve(base, TruncationSpec(12, 12))
    for q in (Y, X1, X2, X_TOTAL):
        m = marginal(d, q)
        assert abs(math.fsum(m.values) - 1) <= 1e-12 and m.mass == 1.0
    joint = marginal(d, JOINT).values
    assert joint.shape == (25, 3)
    assert np.allclose(joint.sum(axis=0), marginal(d, Y).values, atol=1e-15)
    assert np.allclose(joint.sum(axis=1), marginal(d, X_TOTAL).values, atol=1e-15)
    cond = marginal(d, X1_GIVEN_Y_POS)
    assert abs(cond.mass - (1 - marginal(d, Y).values[0])) < 1e-14
    with pytest.raises(ValueError):
        marginal(d, "nonsense")


def test_zero_mass_conditioning(base):
    from dataclasses import replace
    d = solve(base, TruncationSpec(2, 2))
    pi = np.zeros_like(d.probabilities)
    pi[d.index.index((1, 1, 0))] = 1.0
    fake = replace(d, probabilities=pi)
    with pytest.raises(ValueError):
        marginal(fake, X1_GIVEN_Y_POS)


def test_truncation_consistency():
    P = ModelParams(1, 1, 4, 2, 0.5, 1, 2)
    dists = [solve(P, TruncationSpec(c, c)) for c in (10, 20, 40)]
    bm = [d.boundary_mass() for d in dists]
    assert bm[0] > bm[1] > bm[2]
    ys = [marginal(d, Y).values for d in dists]
    tv = [0.5 * np.abs(a - b).sum() for a, b in zip(ys, ys[1:])]
    assert tv[1] < tv[0] and tv[1] < 1e-6


def test_exports(base):
    d = solve(base, TruncationSpec(2, 1))
    lines = export.stationary_csv(d).splitlines()
    assert lines[0] == "n1,n2,k,prob"
    assert len(lines) == 1 + len(d.index)
    row = lines[1 + d.index.index((0, 0, 2))].split(",")
    assert float(row[3]) == d.prob((0, 0, 2))  # 17 digits round-trip
    doc = json.loads(export.stationary_json(d))
    assert doc["params"] == base.to_dict()
    assert doc["trunc"] == {"cap1": 2, "cap2": 1}
    assert doc["residual"] == d.residual
    assert [r["prob"] for r in doc["records"]] == d.probabilities.tolist()
