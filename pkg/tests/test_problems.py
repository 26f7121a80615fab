"""Problem families: hand-derived oracles, invariants, generators, suites."""

import json

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opevo import problems as P


def toy_mokp(capacity=9.0):
    return P.ProblemInstance(
        id="toy-mokp", category=P.MOKP, encoding=P.BITSTRING, n_var=3, k=2,
        ideal=np.array([-6.0, -6.0]), nadir=np.zeros(2),
        weights=np.array([2.0, 3.0, 4.0]),
        profits=np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]]),
        capacity=capacity,
    )


def toy_motsp():
    d1 = np.array([[0.0, 1.0, 3.0], [1.0, 0.0, 2.0], [3.0, 2.0, 0.0]])
    d2 = np.array([[0.0, 2.0, 1.0], [2.0, 0.0, 3.0], [1.0, 3.0, 0.0]])
    return P.ProblemInstance(
        id="toy-motsp", category=P.MOTSP, encoding=P.PERMUTATION, n_var=3, k=2,
        ideal=np.zeros(2), nadir=np.full(2, 20.0),
        distances=np.stack([d1, d2]),
    )


# --- evaluate ---------------------------------------------------------------


def test_mokp_profit_sums_by_hand():
    inst = toy_mokp()
    npt.assert_array_equal(P.evaluate(inst, np.array([1, 1, 1])), [6.0, 6.0])
    npt.assert_array_equal(P.evaluate(inst, np.array([0, 0, 0])), [0.0, 0.0])


def test_mokp_profits_returned_even_when_infeasible():
    inst = toy_mokp(capacity=5.0)
    npt.assert_array_equal(P.evaluate(inst, np.array([1, 1, 1])), [6.0, 6.0])
    assert not P.feasible(inst, np.array([1, 1, 1]))


def test_mokp_feasibility_boundary():
    inst = toy_mokp(capacity=5.0)
    assert P.feasible(inst, np.array([1, 1, 0]))  # weight exactly 5
    assert not P.feasible(inst, np.array([1, 1, 1]))  # weight 9


def test_non_mokp_always_feasible():
    z1 = P.make_cmop("zdt1")
    assert P.feasible(z1, np.full(30, 0.5))


def test_zdt1_closed_form_corners():
    z1 = P.make_cmop("zdt1")
    npt.assert_allclose(P.evaluate(z1, np.zeros(30)), [0.0, 1.0], atol=1e-12)
    x = np.zeros(30)
    x[0] = 1.0
    npt.assert_allclose(P.evaluate(z1, x), [1.0, 0.0], atol=1e-12)


def test_motsp_open_path_hand_sum():
    inst = toy_motsp()
    # pi = [0,1,2]: f1 = d1(0,1) + d1(1,2) = 1 + 2; no closing edge
    npt.assert_array_equal(P.evaluate(inst, np.array([0, 1, 2])), [3.0, 5.0])


def test_motsp_closed_tour_adds_return_edge():
    base = toy_motsp()
    closed = P.instance_from_dict({**P.instance_to_dict(base), "closed_tour": True})
    open_f = P.evaluate(base, np.array([0, 1, 2]))
    closed_f = P.evaluate(closed, np.array([0, 1, 2]))
    npt.assert_array_equal(closed_f - open_f, [3.0, 1.0])  # d(2,0) per objective


def test_zdt5_bit_group_oracle():
    z5 = P.make_cmop("zdt5")
    assert z5.n_var == 80 and z5.encoding == P.BITSTRING
    # All ones: u1=30 -> f1=31; ten 5-bit groups all full -> v=1 each, g=10
    npt.assert_allclose(P.evaluate(z5, np.ones(80, dtype=int)), [31.0, 10.0 / 31.0])
    # All zeros: f1=1; every group empty -> v=2 each, g=20
    npt.assert_allclose(P.evaluate(z5, np.zeros(80, dtype=int)), [1.0, 20.0])


def test_zdt5_rejects_bad_bit_count():
    with pytest.raises(ValueError):
        P.make_cmop("zdt5", n_var=33)


def test_encoding_mismatch_rejected():
    z1 = P.make_cmop("zdt1")
    with pytest.raises(P.EncodingMismatchError):
        P.evaluate(z1, np.zeros(7))
    with pytest.raises(P.EncodingMismatchError):
        P.evaluate(z1, np.full(30, 2.0))  # above upper bound
    inst = toy_motsp()
    with pytest.raises(P.EncodingMismatchError):
        P.evaluate(inst, np.array([0, 0, 2]))  # repeated index


def test_evaluate_is_pure():
    z4 = P.make_cmop("zdt4")
    g = P.random_genome(z4, np.random.default_rng(11))
    a = P.evaluate(z4, g)
    b = P.evaluate(z4, g)
    npt.assert_array_equal(a, b)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_mokp_adding_item_never_decreases_profit(seed):
    rng = np.random.default_rng(seed)
    inst = P.generate_mokp(12, 2, rng)
    x = rng.integers(0, 2, 12)
    zeros = np.flatnonzero(x == 0)
    if len(zeros) == 0:
        return
    y = x.copy()
    y[rng.choice(zeros)] = 1
    assert np.all(P.evaluate(inst, y) >= P.evaluate(inst, x))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_motsp_reversal_preserves_objectives(seed):
    rng = np.random.default_rng(seed)
    inst = P.generate_motsp(10, 2, rng)
    pi = rng.permutation(10)
    npt.assert_allclose(P.evaluate(inst, pi), P.evaluate(inst, pi[::-1]))


def test_all_families_evaluate_finite_at_both_scales():
    rng = np.random.default_rng(0)
    for family in P.FAMILY_NAMES:
        for n_var in (None, 50):
            inst = P.make_cmop(family, n_var=n_var)
            X = np.stack([P.random_genome(inst, rng) for _ in range(1000)])
            F = P.evaluate_batch(inst, X)
            assert np.isfinite(F).all(), family
            assert F.shape == (1000, inst.k)


# --- random_genome ----------------------------------------------------------


def test_random_genome_deterministic_per_seed():
    for inst in (P.make_cmop("zdt1"), toy_mokp(), P.generate_motsp(30, 2, np.random.default_rng(3))):
        a = P.random_genome(inst, np.random.default_rng(42))
        b = P.random_genome(inst, np.random.default_rng(42))
        npt.assert_array_equal(a, b)


def test_random_genome_respects_encoding():
    rng = np.random.default_rng(5)
    tsp = P.generate_motsp(30, 2, rng)
    pi = P.random_genome(tsp, rng)
    npt.assert_array_equal(np.sort(pi), np.arange(30))
    z4 = P.make_cmop("zdt4")
    x = P.random_genome(z4, rng)
    assert np.all(x >= z4.lower) and np.all(x <= z4.upper)


def test_random_bits_are_fair():
    inst = toy_mokp()
    rng = np.random.default_rng(123)
    ones = sum(P.random_genome(inst, rng)[0] for _ in range(10000))
    assert 0.47 <= ones / 10000 <= 0.53


# --- generators -------------------------------------------------------------


def test_generate_mokp_capacity_near_half_total():
    inst = P.generate_mokp(50, 2, np.random.default_rng(9))
    ratio = inst.capacity / inst.weights.sum()
    assert abs(ratio - 0.5) < 0.01
    assert inst.capacity >= inst.weights.max()
    assert np.all(inst.weights >= 10) and np.all(inst.weights <= 100)
    assert np.all(inst.profits >= 10) and np.all(inst.profits <= 100)


def test_generate_mokp_deterministic():
    a = P.generate_mokp(30, 2, np.random.default_rng(77))
    b = P.generate_mokp(30, 2, np.random.default_rng(77))
    npt.assert_array_equal(a.weights, b.weights)
    npt.assert_array_equal(a.profits, b.profits)
    assert a.capacity == b.capacity


def test_generate_motsp_matrices():
    inst = P.generate_motsp(25, 2, np.random.default_rng(4))
    for d in inst.distances:
        npt.assert_allclose(d, d.T)
        npt.assert_array_equal(np.diag(d), np.zeros(25))
        assert d.max() <= np.sqrt(2.0) + 1e-12
    c = P.generate_motsp(25, 2, np.random.default_rng(4))
    npt.assert_array_equal(inst.distances, c.distances)


def test_instance_invariants_enforced():
    with pytest.raises(ValueError):
        toy_mokp(capacity=1.0)  # below heaviest item
    with pytest.raises(ValueError):
        P.ProblemInstance(
            id="bad", category=P.MOTSP, encoding=P.PERMUTATION, n_var=2, k=2,
            ideal=np.zeros(2), nadir=np.ones(2),
            distances=np.array([[[0.0, 1.0], [2.0, 0.0]]] * 2),  # asymmetric
        )
    with pytest.raises(ValueError):
        P.make_cmop("nope")


# --- reference fronts -------------------------------------------------------


def test_zdt1_front_formula():
    front = P.family_front("zdt1", 2, 30, 1000)
    assert len(front) == 1000
    t = front[:, 0]
    npt.assert_allclose(np.diff(t), np.full(999, 1.0 / 999))
    npt.assert_allclose(front[:, 1], 1.0 - np.sqrt(t), atol=1e-12)


def test_dtlz2_front_on_unit_sphere():
    front = P.family_front("dtlz2", 3, 12, 500)
    npt.assert_allclose(np.linalg.norm(front, axis=1), 1.0, atol=1e-12)


def test_reference_fronts_mutually_nondominated():
    from opevo.metrics import nondominated_filter

    for family in P.FAMILY_NAMES:
        inst = P.make_cmop(family)
        front = P.reference_front(inst, 200)
        assert len(nondominated_filter(front)) == len(front), family


def test_reference_front_reproducible():
    inst = P.make_cmop("zdt6")
    npt.assert_array_equal(P.reference_front(inst, 333), P.reference_front(inst, 333))


def test_reference_front_requires_cmop():
    with pytest.raises(ValueError):
        P.reference_front(toy_mokp())


# --- suites -----------------------------------------------------------------


def test_cmop_suites():
    val = P.make_suite(P.CMOP, "validation", np.random.default_rng(1))
    test = P.make_suite(P.CMOP, "testing", np.random.default_rng(1))
    assert len(val) == 13
    assert sorted(i.family for i in val) == sorted(P.FAMILY_NAMES)
    assert all(i.n_var == 50 for i in test)
    assert {i.id for i in val}.isdisjoint({i.id for i in test})


def test_mokp_suites_sizes():
    val = P.make_suite(P.MOKP, "validation", np.random.default_rng(2))
    test = P.make_suite(P.MOKP, "testing", np.random.default_rng(2))
    assert len(val) == 10 and len(test) == 10
    assert all(50 <= i.n_var <= 200 for i in val)
    assert all(100 <= i.n_var <= 200 for i in test)
    assert {i.id for i in val}.isdisjoint({i.id for i in test})


def test_motsp_suites_sizes():
    val = P.make_suite(P.MOTSP, "validation", np.random.default_rng(3))
    test = P.make_suite(P.MOTSP, "testing", np.random.default_rng(3))
    assert len(val) == 20 and all(i.n_var == 30 for i in val)
    assert len(test) == 10 and all(100 <= i.n_var <= 200 for i in test)


def test_suite_deterministic_given_seed():
    a = P.make_suite(P.MOKP, "validation", np.random.default_rng(17))
    b = P.make_suite(P.MOKP, "validation", np.random.default_rng(17))
    for x, y in zip(a, b):
        npt.assert_array_equal(x.profits, y.profits)
        assert x.capacity == y.capacity


def test_suite_rejects_duplicate_ids():
    inst = toy_mokp()
    with pytest.raises(ValueError):
        P.SuiteSpec(category=P.MOKP, role="validation", instances=[inst, inst])


# --- serialization ----------------------------------------------------------


@pytest.mark.parametrize("builder", [
    lambda: toy_mokp(),
    lambda: toy_motsp(),
    lambda: P.make_cmop("zdt3"),
    lambda: P.make_cmop("zdt5"),
    lambda: P.make_cmop("dtlz4"),
    lambda: P.generate_mokp(40, 2, np.random.default_rng(8)),
])
def test_instance_json_round_trip(builder):
    inst = builder()
    back = P.instance_from_dict(json.loads(json.dumps(P.instance_to_dict(inst))))
    assert back.id == inst.id and back.category == inst.category
    assert back.encoding == inst.encoding and back.n_var == inst.n_var
    npt.assert_array_equal(back.ideal, inst.ideal)
    npt.assert_array_equal(back.nadir, inst.nadir)
    g = P.random_genome(inst, np.random.default_rng(55))
    npt.assert_array_equal(P.evaluate(back, g), P.evaluate(inst, g))


def test_save_load_instance(tmp_path):
    inst = P.generate_motsp(12, 2, np.random.default_rng(21))
    path = tmp_path / "inst.json"
    P.save_instance(inst, path)
    back = P.load_instance(path)
    npt.assert_array_equal(back.distances, inst.distances)
