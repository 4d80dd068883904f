import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from unimodal_spath.base_measure import ParetoMixture
from unimodal_spath.paths import SPath, enumerate_paths
from unimodal_spath.posterior import center, exact_joint, log_phi_path
from unimodal_spath.priors import NormalDensity, UniformPrior
from unimodal_spath.samplers import (
    PathTarget,
    _draw_fast,
    _draw_reference,
    ess,
    local_log_weights,
    log_kappa_of,
    naive_sis_draw,
    path_expectation,
    run_sis,
    sip_draw,
    sis_estimates,
    sis_full_draw,
)
from unimodal_spath.species import PoissonDirichlet, SpeciesModel

MODELS = [PoissonDirichlet(0, 1), PoissonDirichlet(0.9, 100), PoissonDirichlet(0.4, -0.2)]
BASES = [ParetoMixture(1, 1), ParetoMixture(), ParetoMixture(2.5, 0.3)]


class GenericPD(SpeciesModel):
    """A PD model seen only through ``log_chi`` (no product-form shortcuts)."""

    def __init__(self, a, b):
        self.pd = PoissonDirichlet(a, b)

    def log_chi(self, sizes):
        return self.pd.log_chi(sizes)


def target(model, base, n, seed, context=()):
    q = np.sort(np.random.default_rng(seed).exponential(1.5, n))
    return PathTarget(model, base, q, tuple(context))


def test_n1_has_no_steps():
    tg = target(MODELS[0], BASES[0], 1, 0)
    d = sip_draw(tg, np.random.default_rng(0))
    assert d.path.coords == (0, 1) and d.log_kappa == 0.0
    assert d.log_w == pytest.approx(tg.log_phi(SPath((0, 1))))
    assert naive_sis_draw(tg, np.random.default_rng(0)).path == d.path


def test_n2_weight_is_constant():
    tg = target(MODELS[1], BASES[0], 2, 1)
    lws = {round(sip_draw(tg, np.random.default_rng(s)).log_w, 12) for s in range(40)}
    assert len(lws) == 1
    total = logsumexp([tg.log_phi(p) for p in enumerate_paths(2)])
    assert lws.pop() == pytest.approx(total, abs=1e-12)


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("base", BASES)
@pytest.mark.parametrize("n", [3, 5, 7])
def test_local_weights_match_direct_phi(model, base, n):
    rng = np.random.default_rng(n)
    tg = target(model, base, n, n, context=(2, 1))
    for _ in range(4):
        order, u = rng.permutation(np.arange(1, n)), rng.random(n - 1)
        for naive in (False, True):
            p1, k1 = _draw_reference(tg, order, u, naive)
            p2, k2 = _draw_reference(tg, order, u, naive, direct=True)
            assert p1 == p2 and k1 == pytest.approx(k2, abs=1e-10)


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("base", BASES)
def test_compiled_kernel_matches_reference(model, base):
    rng = np.random.default_rng(7)
    for n in (2, 4, 9, 30):
        tg = target(model, base, n, n, context=(3,))
        for _ in range(5):
            order, u = rng.permutation(np.arange(1, n)), rng.random(n - 1)
            for naive in (False, True):
                p, k = _draw_reference(tg, order, u, naive)
                S, kf, lphi, incs = _draw_fast(tg, order, u, naive)
                assert p.coords == tuple(S)
                assert kf == pytest.approx(k, abs=1e-9)
                assert lphi == pytest.approx(tg.log_phi(p), abs=1e-9)
                assert incs == p.increments


@pytest.mark.parametrize("n", range(1, 9))
def test_trial_normalizes_for_every_permutation(n):
    tg = target(MODELS[1], BASES[0], n, 11, context=(1, 2))
    paths = list(enumerate_paths(n))
    perms = list(itertools.permutations(range(1, n)))
    rng = np.random.default_rng(n)
    if len(perms) > 12:
        perms = [perms[i] for i in rng.choice(len(perms), 12, replace=False)]
    phis = np.array([tg.log_phi(p) for p in paths])
    for perm in perms:
        lk = np.array([log_kappa_of(tg, p, perm, backend="numba") for p in paths])
        assert np.all(np.isfinite(lk))
        assert math.exp(logsumexp(lk)) == pytest.approx(1.0, abs=1e-12)
        # unbiasedness at the weight level: sum kappa * (phi / kappa) = sum phi
        assert logsumexp(lk + (phis - lk)) == pytest.approx(logsumexp(phis), abs=1e-12)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_three_case_trial_is_a_proper_distribution(n):
    tg = target(MODELS[0], BASES[0], n, 5)
    paths = list(enumerate_paths(n))
    for perm in itertools.islice(itertools.permutations(range(1, n)), 6):
        lk = [log_kappa_of(tg, p, perm, trial="three_case") for p in paths]
        assert np.all(np.isfinite(lk))
        assert math.exp(logsumexp(lk)) == pytest.approx(1.0, abs=1e-12)
    d = sip_draw(tg, np.random.default_rng(1), trial="three_case")
    assert np.isfinite(d.log_w)


def test_generic_model_uses_direct_evaluation():
    gen = GenericPD(0.3, 1.5)
    tg = PathTarget(gen, BASES[0], np.sort(np.random.default_rng(2).exponential(1, 5)), (2,))
    assert not tg.fast
    paths = list(enumerate_paths(5))
    lk = [log_kappa_of(tg, p, (3, 1, 4, 2)) for p in paths]
    assert math.exp(logsumexp(lk)) == pytest.approx(1.0, abs=1e-12)
    fast = PathTarget(PoissonDirichlet(0.3, 1.5), BASES[0], tg.q, (2,))
    d1 = sip_draw(tg, np.random.default_rng(9))
    d2 = sip_draw(fast, np.random.default_rng(9))
    assert d1.path == d2.path and d1.log_w == pytest.approx(d2.log_w, abs=1e-10)


def test_numba_backend_rejects_generic_model():
    tg = PathTarget(GenericPD(0, 1), BASES[0], np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        sip_draw(tg, np.random.default_rng(0), backend="numba")


def test_path_expectation_trivial_cases():
    tg = target(MODELS[0], BASES[0], 6, 3)
    est, e, se = path_expectation(tg, lambda s: 2.5, 50, seed=1)
    assert est == pytest.approx(2.5) and se == pytest.approx(0.0, abs=1e-12)
    d = sip_draw(tg, np.random.default_rng([4, 0]))
    est, e, _ = path_expectation(tg, lambda s: s.n_jumps, 1, seed=4)
    assert est == d.path.n_jumps and e == pytest.approx(1.0)


def test_path_expectation_matches_exact():
    tg = target(PoissonDirichlet(0.5, 2), BASES[0], 6, 8)
    paths = list(enumerate_paths(6))
    lp = np.array([tg.log_phi(p) for p in paths])
    prob = np.exp(lp - logsumexp(lp))
    exact = float(sum(p.n_jumps * w for p, w in zip(paths, prob)))
    est, _, se = path_expectation(tg, lambda s: s.n_jumps, 4000, seed=2)
    assert abs(est - exact) < 3 * se


def test_ess_definition():
    assert ess(np.zeros(10)) == pytest.approx(10)
    assert ess([0.0, -np.inf, -np.inf]) == pytest.approx(1.0)
    lw = np.log([1.0, 2.0, 3.0])
    assert ess(lw) == pytest.approx(36 / 14)


def test_full_draw_n2_weight():
    model, base = MODELS[0], BASES[0]
    obs = np.array([-0.7, 1.2])
    prior, rho = UniformPrior(-1, 1), UniformPrior(-0.5, 0.5)
    for s in range(5):
        d = sis_full_draw(model, base, obs, prior, rho, np.random.default_rng(s))
        j = exact_joint(model, base, center(obs, d.theta))
        assert len(j.pairs) == 1
        assert d.log_w == pytest.approx(j.log_normalizer + math.log(0.5) - 0.0, abs=1e-12)


def test_full_draw_zero_gap_gets_zero_weight():
    d = sis_full_draw(MODELS[0], BASES[0], [0.5, 1.0], None, None, np.random.default_rng(0), mode_known=0.5)
    assert d.log_w == -math.inf


def test_weighted_draw_paths_roundtrip():
    obs = np.random.default_rng(1).normal(0, 1, 30)
    d = sis_full_draw(MODELS[1], BASES[1], obs, UniformPrior(-3, 3), NormalDensity(0, 0.5), np.random.default_rng(5))
    data = center(obs, d.theta)
    assert d.s_plus.n == data.n and d.s_minus.n == data.N - data.n
    # weight = phi+ phi- pi / (kappa+ kappa- rho) with the realised paths
    lphi = log_phi_path(MODELS[1], BASES[1], data.y, d.s_plus) + log_phi_path(
        MODELS[1], BASES[1], -data.z, d.s_minus, d.s_plus.increments
    )
    assert np.isfinite(d.log_w) and np.isfinite(lphi)


def test_order_of_sides_does_not_change_joint_phi():
    model, base = MODELS[1], BASES[0]
    obs = np.array([-1.5, -0.4, 0.3, 0.8, 2.0])
    data = center(obs, 0.0)
    for sp in enumerate_paths(data.n):
        for sm in enumerate_paths(data.N - data.n):
            a = log_phi_path(model, base, data.y, sp) + log_phi_path(model, base, -data.z, sm, sp.increments)
            b = log_phi_path(model, base, -data.z, sm) + log_phi_path(model, base, data.y, sp, sm.increments)
            assert a == pytest.approx(b, abs=1e-12)


def test_run_sis_reproducible_and_thread_independent():
    obs = np.random.default_rng(2).normal(0, 1, 25)
    kw = dict(prior=UniformPrior(-3, 3), rho=NormalDensity(0, 0.5))
    a = run_sis(MODELS[0], BASES[1], obs, 40, 17, **kw)
    b = run_sis(MODELS[0], BASES[1], obs, 40, 17, threads=3, **kw)
    assert [x.log_w for x in a] == [x.log_w for x in b]
    assert [x.theta for x in a] == [x.theta for x in b]
    with pytest.raises(ValueError):
        run_sis(MODELS[0], BASES[1], obs, 0, 1, **kw)
    with pytest.raises(ValueError):
        run_sis(MODELS[0], BASES[1], obs, 5, 1)


def test_sis_estimates_single_draw_and_zero_weight():
    obs = np.array([-0.3, 0.6, 1.4])
    draws = run_sis(MODELS[0], BASES[0], obs, 1, 3, prior=UniformPrior(-1, 2), rho=UniformPrior(-1, 2))
    r = sis_estimates(draws, MODELS[0], BASES[0], obs, np.linspace(-3, 3, 7))
    assert r.theta_hat == draws[0].theta and r.ess == pytest.approx(1.0)
    draws[0].log_w = -math.inf
    with pytest.raises(ValueError):
        sis_estimates(draws, MODELS[0], BASES[0], obs)


def test_mode_known_converges_to_exact_given_theta():
    from unimodal_spath.posterior import exact_density_given_theta

    model, base = MODELS[0], BASES[0]
    obs = np.array([-1.1, -0.3, 0.5, 0.9, 2.4])
    grid = np.linspace(-4, 4, 9) + 0.01
    exact = exact_density_given_theta(model, base, center(obs, 0.1), grid).estimate
    draws = run_sis(model, base, obs, 3000, 5, mode_known=0.1)
    r = sis_estimates(draws, model, base, obs, grid)
    assert r.theta_hat == pytest.approx(0.1, abs=1e-14)
    assert np.all(np.abs(r.density.estimate - exact) <= 3 * r.density.stderr + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1), st.sampled_from(MODELS), st.sampled_from(BASES))
def test_draws_are_valid_paths_with_finite_weight(n, seed, model, base):
    tg = target(model, base, n, seed % 1000)
    for naive in (False, True):
        d = sip_draw(tg, np.random.default_rng(seed), naive=naive)
        c = d.path.coords
        assert c[0] == 0 and c[-1] == n
        assert all(c[j] <= j for j in range(n + 1))
        assert all(c[j] <= c[j + 1] for j in range(n))
        assert np.isfinite(d.log_w) and d.log_kappa <= 1e-12
        assert sorted(d.permutation) == (list(range(1, n)) if not naive else sorted(d.permutation))
