import math

import numpy as np
import pytest

from conftest import SYM, all_models, uniform
from floquet.cocycle import (BLOCK, ConfigError, Dist, IIDEnsemble, OmegaPath, ScalarScaled, check_A1_integrability,
                             dual_product, forward_product, model_from_dict, sample_matrix)


def rel_close(a, b, tol):
    scale = np.maximum(np.abs(a), np.abs(b))
    nz = scale > 0
    return np.all(np.abs(a - b)[nz] <= tol * scale[nz])


def test_deterministic_sample_is_constant(sym):
    path = OmegaPath(sym, 7)
    for k in (-5000, -1, 0, 3, 10 ** 6):
        assert np.array_equal(sample_matrix(path, k), np.array(SYM))


def test_iid_sample_is_deterministic_in_seed_and_index(iid3):
    a = OmegaPath(iid3, 99)
    b = OmegaPath(iid3, 99)
    # different query orders, different blocks
    first = [sample_matrix(a, k) for k in (5, -3, 2 * BLOCK + 1, -BLOCK - 7)]
    second = [sample_matrix(b, k) for k in (-BLOCK - 7, 2 * BLOCK + 1, -3, 5)][::-1]
    for x, y in zip(first, second):
        assert np.array_equal(x, y)
    assert not np.array_equal(sample_matrix(OmegaPath(iid3, 100), 5), first[0])


def test_leslie_structure(leslie3):
    mats = OmegaPath(leslie3, 3).window(-50, 50)
    assert np.all(mats[:, 0, :] > 0)
    sub = mats[:, [1, 2], [0, 1]]
    assert np.all((sub > 0) & (sub <= 1))
    mask = np.ones((3, 3), bool)
    mask[0, :] = False
    mask[1, 0] = mask[2, 1] = False
    assert np.all(mats[:, mask] == 0)


@pytest.mark.parametrize("bad", [
    {"variant": "iid", "dimension": 2, "entry": {"dist": "normal", "loc": 1, "scale": 1}},
    {"variant": "iid", "dimension": 1, "entry": 1.0},
    {"variant": "deterministic", "matrix": [[1, 0], [1, 0]]},
    {"variant": "deterministic", "matrix": [[1, -1], [1, 1]]},
    {"variant": "leslie", "fecundity": [1, 1], "survival": [{"dist": "uniform", "low": 0.5, "high": 1.5}]},
    {"variant": "markov", "states": [[[1, 1], [1, 1]]], "transition": [[0.5]]},
    {"variant": "nope"},
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ConfigError):
        model_from_dict(bad)


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.variant)
def test_spec_round_trip(model):
    again = model_from_dict(model.to_dict())
    assert again.to_dict() == model.to_dict()
    pa, pb = OmegaPath(model, 5), OmegaPath(again, 5)
    assert np.array_equal(pa.window(-10, 10), pb.window(-10, 10))


def test_forward_product_identity_and_power(sym):
    path = OmegaPath(sym, 0)
    p0 = forward_product(path, 3, 0)
    assert np.array_equal(p0.value, np.eye(2)) and p0.log_scale == 0
    p3 = forward_product(path, 0, 3)
    assert rel_close(p3.matrix(), np.linalg.matrix_power(np.array(SYM), 3), 1e-14)


def test_log_scaled_product_stays_bounded(iid3):
    p = forward_product(OmegaPath(iid3, 1), 0, 5000)
    top = np.abs(p.value).max()
    assert 1 <= top <= 2.0 ** 512
    assert p.log_scale > 1000           # exp would overflow


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.variant)
def test_cocycle_law(model, rng):
    path = OmegaPath(model, 11)
    for _ in range(20):
        k = int(rng.integers(-300, 300))
        s, t = (int(x) for x in rng.integers(0, 60, 2))
        whole = forward_product(path, k, s + t)
        split = forward_product(path, k + s, t).compose(forward_product(path, k, s))
        scale = math.exp(split.log_scale - whole.log_scale)
        assert rel_close(whole.value, split.value * scale, 1e-12)


def test_dual_product_examples(sym, iid3, rng):
    path = OmegaPath(sym, 0)
    assert np.array_equal(dual_product(path, 4, 0).value, np.eye(2))
    d2 = dual_product(path, 0, 2)
    assert rel_close(d2.matrix(), np.linalg.matrix_power(np.array(SYM), 2).T, 1e-14)
    path = OmegaPath(iid3, 4)
    for _ in range(10):
        k, t = int(rng.integers(-100, 100)), int(rng.integers(0, 30))
        u, us = rng.exponential(size=3), rng.exponential(size=3)
        d = dual_product(path, k, t)
        f = forward_product(path, k - t, t)
        lhs = np.dot(d.value @ us, u)
        rhs = np.dot(us, f.value @ u)
        assert d.log_scale == f.log_scale
        assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.variant)
def test_positivity_and_monotonicity(model, rng):
    path = OmegaPath(model, 2)
    n = model.dimension
    for _ in range(10):
        k, t = int(rng.integers(-50, 50)), int(rng.integers(1, 20))
        p = forward_product(path, k, t).value
        u1 = rng.exponential(size=n)
        u2 = u1 + rng.exponential(size=n)
        assert np.all(p @ u1 >= 0)
        assert np.all(p @ u1 <= p @ u2)
        assert np.all(p.T >= 0)


def test_theta_compatibility(iid3):
    a = OmegaPath(iid3, 8)
    b = OmegaPath(iid3, 8)
    b.window(-2 * BLOCK, 3 * BLOCK)            # extra materialization elsewhere
    assert np.array_equal(forward_product(a, 10, 7).value, forward_product(b, 10, 7).value)


def test_markov_two_sided_chain(markov2):
    pi = markov2.stationary
    assert pi @ markov2.transition == pytest.approx(pi)
    states = np.array([[np.array_equal(OmegaPath(markov2, s).sample(k), markov2.states[1])
                        for k in (0, -1)] for s in range(2000)])
    # the index-0 state follows the stationary law, and so does index -1
    assert states[:, 0].mean() == pytest.approx(pi[1], abs=0.04)
    assert states[:, 1].mean() == pytest.approx(pi[1], abs=0.04)
    # backward transitions follow the reversed kernel
    long = OmegaPath(markov2, 1).window(-20000, 0)
    s = np.array([int(np.array_equal(a, markov2.states[1])) for a in long])
    r = markov2.reversed_transition
    frm1 = s[1:] == 1                     # state at k+1 is 1, look at state at k
    assert s[:-1][frm1].mean() == pytest.approx(r[1, 1], abs=0.03)


def test_markov_query_order_independent(markov2):
    a, b = OmegaPath(markov2, 3), OmegaPath(markov2, 3)
    x = a.window(-3 * BLOCK, 2 * BLOCK)
    parts = [b.window(BLOCK, 2 * BLOCK), b.window(-3 * BLOCK, -BLOCK), b.window(-BLOCK, BLOCK)]
    assert np.array_equal(x, np.concatenate([parts[1], parts[2], parts[0]]))


def test_skeleton_is_product():
    m = IIDEnsemble(n=2, entry=uniform(0.5, 1.5))
    base, skel = OmegaPath(m, 4), OmegaPath(m, 4, step=3)
    for k in (-2, 0, 5):
        ref = base.sample(3 * k + 2) @ base.sample(3 * k + 1) @ base.sample(3 * k)
        assert np.allclose(skel.sample(k), ref, rtol=1e-15)


def test_transform_couples_draws(iid3):
    hi = iid3.with_transform(1.1, [[0.5, 0, 0], [0, 0, 0], [0, 0, 0]])
    lo_m = OmegaPath(iid3, 6).window(-20, 20)
    hi_m = OmegaPath(hi, 6).window(-20, 20)
    ref = 1.1 * lo_m
    ref[:, 0, 0] += 0.5
    assert np.allclose(hi_m, ref, rtol=1e-15)


def test_integrability_examples(sym):
    rep = check_A1_integrability(sym, replicates=10, doublings=2)
    assert rep.mean == pytest.approx(math.log(3.0))
    assert not rep.heavy_tail
    rep = check_A1_integrability(IIDEnsemble(n=3, entry=uniform(0.5, 2)), replicates=200)
    assert 0 <= rep.mean <= math.log(2 * 3) and not rep.heavy_tail
    cauchy = ScalarScaled(base=SYM, log_scalar=Dist("cauchy", (0.0, 1.0)))
    assert check_A1_integrability(cauchy, replicates=200).heavy_tail
