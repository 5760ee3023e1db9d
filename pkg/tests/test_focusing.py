import math

import numpy as np
import pytest

from conftest import SYM, uniform
from floquet.cocycle import Deterministic, IIDEnsemble, LeslieRandom, OmegaPath
from floquet.focusing import (AssumptionError, FocusingError, auto_step, birkhoff_diameter,
                              contraction_ratio, focusing_report, kappa, kappa_beta,
                              primitivity_index, verify_A5)
from floquet.hilbert_metric import proj_distance_rows, ratio_bounds


def cone_pairs(rng, n, count):
    u = rng.exponential(size=(count, n))
    v = rng.exponential(size=(count, n))
    return u, v


def test_diameter_examples():
    assert birkhoff_diameter(SYM) == pytest.approx(math.log(4), abs=1e-15)
    assert birkhoff_diameter(np.outer([1, 2, 3], [4, 1, 2])) == pytest.approx(0, abs=1e-15)
    assert birkhoff_diameter([[1, 0.1], [0.1, 1]]) == pytest.approx(math.log(100), rel=1e-14)
    with pytest.raises(ValueError):
        birkhoff_diameter([[1, 0], [1, 1]])


def test_contraction_examples():
    assert contraction_ratio(SYM) == pytest.approx(1 / 3, abs=1e-15)
    assert contraction_ratio(np.outer([1, 2], [3, 1])) == pytest.approx(0, abs=1e-15)
    assert contraction_ratio([[1, 0.1], [0.1, 1]]) == pytest.approx(9 / 11, abs=1e-15)


@pytest.mark.parametrize("a", [SYM, [[1, 0.1], [0.1, 1]], [[3, 1, 2], [1, 1, 5], [2, 2, 1]]])
def test_diameter_and_contraction_by_sampling(a, rng):
    a = np.asarray(a, float)
    u, v = cone_pairs(rng, a.shape[0], 100000)
    du = proj_distance_rows(u @ a.T, v @ a.T)
    tau = birkhoff_diameter(a)
    assert du.max() <= tau + 1e-12
    assert du.max() >= 0.8 * tau            # the sup is approached by random pairs
    d0 = proj_distance_rows(u, v)
    ok = d0 > 1e-9
    assert np.max(du[ok] / d0[ok]) <= math.tanh(tau / 4) + 1e-9


def test_kappa_beta_examples():
    e = np.array([0.5, 0.5])
    beta, ku = kappa_beta(SYM, e, [1, 0])
    assert (beta, ku) == (pytest.approx(2.0), pytest.approx(2.0))
    r1 = np.outer([1, 3], [2, 5])
    for u in ([1, 0], [0.2, 0.9], [4, 1]):
        assert kappa_beta(r1, e, u)[1] == pytest.approx(3.0)
    assert kappa(r1, e) == pytest.approx(3.0)
    assert kappa_beta(SYM, e, [1, 1])[1] == pytest.approx(1.0)
    with pytest.raises(FocusingError):
        kappa_beta([[1, 0], [1, 0]], e, [0, 1])


def test_kappa_is_attained_on_columns(rng):
    a = rng.uniform(0.1, 3, (4, 4))
    e = rng.uniform(0.5, 1.5, 4)
    simplex = rng.dirichlet(np.ones(4), 50000)
    img = simplex @ a.T / e
    ratios = img.max(axis=1) / img.min(axis=1)
    assert ratios.max() <= kappa(a, e) * (1 + 1e-12)
    assert kappa(a, e) == pytest.approx(max(kappa_beta(a, e, col)[1] for col in np.eye(4)))


def test_perron_vector_minimizes_kappa_u(rng):
    e = np.array([0.5, 0.5])
    ku_perron = kappa_beta(SYM, e, [1, 1])[1]
    for u in rng.exponential(size=(1000, 2)):
        assert kappa_beta(SYM, e, u)[1] >= ku_perron - 1e-12


def test_primitivity_examples():
    assert primitivity_index(SYM) == 1
    assert primitivity_index([[0, 1], [1, 0]]) is None
    assert primitivity_index([[0.3, 1.2], [0.5, 0]]) == 2
    # Wielandt matrix attains the bound (n-1)^2 + 1
    n = 4
    w = np.zeros((n, n))
    w[np.arange(n - 1), np.arange(1, n)] = 1
    w[n - 1, 0] = w[n - 1, 1] = 1
    assert primitivity_index(w) == (n - 1) ** 2 + 1


def test_primitivity_by_enumeration(rng):
    for _ in range(50):
        pat = (rng.random((4, 4)) < 0.4).astype(float)
        pat[rng.integers(0, 4), :] = 1          # no zero column
        t = primitivity_index(pat)
        powers = [np.all(np.linalg.matrix_power(pat, k) > 0) for k in range(1, 11)]
        if t is None:
            assert not any(powers)
        else:
            assert powers[t - 1] and not any(powers[: t - 1])


def test_verify_A5_examples():
    a = np.array([[2.0, 1.0], [0.5, 2.0]])
    vals, vecs = np.linalg.eig(a)
    i = np.argmax(vals.real)
    perron = np.abs(vecs[:, i].real)
    perron /= perron.sum()
    rep = verify_A5(OmegaPath(Deterministic(matrix=a), 0), perron, horizon=10)
    assert rep.nu_min == pytest.approx(vals.real[i], rel=1e-13)
    diag = IIDEnsemble(n=3, entry=uniform(0, 1)).with_transform(1.0, 0.7 * np.eye(3))
    rep = verify_A5(OmegaPath(diag, 1), [0.2, 0.5, 0.3], horizon=500)
    assert rep.nu_min >= 0.7
    perm = Deterministic(matrix=[[0, 1], [1, 0]])
    rep = verify_A5(OmegaPath(perm, 0), np.ones(2) / math.sqrt(2), horizon=5)
    assert rep.nu_min == 1.0 and rep.nu_mean_log == 0.0


def test_verify_A5_failure_has_index():
    m = Deterministic(matrix=[[1, 1], [0, 0]])      # zero row: nu = 0
    with pytest.raises(AssumptionError) as exc:
        verify_A5(OmegaPath(m, 0), [0.5, 0.5], horizon=10, start=3)
    assert exc.value.index == 3


def test_contraction_and_refinement(rng):
    for _ in range(10):
        a = rng.uniform(0.05, 2, (3, 3))
        u, v = cone_pairs(rng, 3, 2000)
        d0 = proj_distance_rows(u, v)
        d1 = proj_distance_rows(u @ a.T, v @ a.T)
        q = contraction_ratio(a)
        assert np.all(d1 <= q * d0 + 1e-12)
        assert np.all(d1 <= d0 + 1e-12)
        assert np.all(d1 <= 2 * math.log(kappa(a)) + 1e-12)
        for x, y in zip(u[:200], v[:200]):
            before, after = ratio_bounds(x, y), ratio_bounds(a @ x, a @ y)
            assert after.m_lower > before.m_lower
            assert after.M_upper < before.M_upper


@pytest.mark.parametrize("model, step", [
    (IIDEnsemble(n=3, entry=uniform(0.5, 2)), 1),
    (LeslieRandom(fecundity=(uniform(0.2, 0.6), uniform(0.8, 1.6)), survival=(uniform(0.4, 0.9),)), 2),
])
def test_focusing_report(model, step):
    rep = focusing_report(model, seed=0, samples=500)
    assert rep.attain_time == step == auto_step(model)
    assert all(rep.verdicts.values())
    assert rep.kappa >= 1
    assert rep.tau <= 2 * math.log(rep.kappa) + 1e-12
    assert rep.contraction_p == math.tanh(rep.tau / 4)
    assert rep.to_dict()["kappa"] == rep.kappa


def test_focusing_report_imprimitive():
    rep = focusing_report(Deterministic(matrix=[[0, 1], [1, 0]]), samples=10)
    assert rep.primitivity_index is None and rep.attain_time == 1
    assert not rep.verdicts["A3_focusing"] and not rep.verdicts["tau_finite"]
    assert rep.to_dict()["kappa"] is None
