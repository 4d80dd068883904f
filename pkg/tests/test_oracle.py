import math

import numpy as np
import pytest

from unimodal_spath.base_measure import ParetoMixture
from unimodal_spath.oracle import (
    conditional_uniformity_check,
    exact_density,
    exact_partition_posterior,
    grouped_by_paths,
    log_varphi_integral,
    rao_blackwell_variances,
)
from unimodal_spath.paths import Partition
from unimodal_spath.posterior import center, exact_density_given_theta, exact_joint
from unimodal_spath.species import PoissonDirichlet

DP = PoissonDirichlet(0, 1)
H11 = ParetoMixture(1, 1)


def test_varphi_examples():
    d = center([1.0, 2.0, -1.0], 0.0)
    assert log_varphi_integral(H11, (2,), 1, d) == pytest.approx(math.log(1 / 16))
    assert log_varphi_integral(H11, (1, 2), 1, d) == pytest.approx(math.log(1 / 48))
    assert log_varphi_integral(H11, (1, -1), 1, d) == -math.inf


def test_cross_sign_pair_forced():
    t = exact_partition_posterior(DP, H11, center([1.0, -1.0], 0.0))
    assert len(t.partitions) == 1 and t.probs[0] == pytest.approx(1.0)


def test_two_positive_hand_value():
    t = exact_partition_posterior(DP, H11, center([1.0, 2.0], 0.0))
    together = [p for sp, p in zip(t.partitions, t.probs) if sp.p_plus == Partition.from_cells([[1, 2]])]
    joint, apart = 0.5 * (1 / 48), 0.5 * (1 / 4) * (1 / 16)
    assert together[0] == pytest.approx(joint / (joint + apart), rel=1e-13)
    assert together[0] == pytest.approx(4 / 7, rel=1e-13)


@pytest.mark.parametrize("obs", [[1.0, 2.0, -1.0, -2.0], [0.3, 0.9, 2.2, -0.4, -1.7], [0.2, 0.5, 1.0, 3.0]])
@pytest.mark.parametrize("ab", [(0.0, 1.0), (0.9, 100.0)])
def test_grouping_reproduces_path_joint(obs, ab):
    model = PoissonDirichlet(*ab)
    d = center(obs, 0.0)
    grouped = grouped_by_paths(exact_partition_posterior(model, H11, d))
    joint = exact_joint(model, H11, d)
    for pair, p in zip(joint.pairs, joint.probs):
        assert grouped[(pair.s_plus, pair.s_minus)] == pytest.approx(p, abs=1e-12)


def test_density_single_observation_closed_form():
    d = center([2.0], 0.0)
    grid = np.array([-1.0, 0.5, 1.0, 3.0])
    # l0 = l1 = 1/2; the cluster term is m2(max(x,2))/m1(2)
    h = H11
    expect = []
    for t in grid:
        prior = 0.5 * math.exp(h.log_tail_moment(1, abs(t)))
        clus = 0.5 * math.exp(h.log_tail_moment(2, max(t, 2.0)) - h.log_tail_moment(1, 2.0)) if t >= 0 else 0.0
        expect.append(prior + clus)
    assert np.allclose(exact_density(DP, h, d, grid).estimate, expect, rtol=1e-14)


def test_density_matches_path_engine():
    d = center([0.3, 0.9, 2.2, -0.4, -1.7, -2.5], 0.05)
    grid = np.linspace(-6, 6, 41)
    a = exact_density(PoissonDirichlet(0.9, 100), H11, d, grid).estimate
    b = exact_density_given_theta(PoissonDirichlet(0.9, 100), H11, d, grid).estimate
    assert np.allclose(a, b, rtol=1e-10, atol=0)


def test_uniformity_examples():
    assert conditional_uniformity_check(DP, H11, center([1.0, -1.0], 0.0)) == 0.0
    d = center([0.5, 1.0, 1.5, 2.0], 0.0)
    t = exact_partition_posterior(DP, H11, d)
    from unimodal_spath.paths import SPath

    target = (SPath((0, 0, 0, 2, 4)), SPath((0,)))
    members = [p for sp, p in zip(t.partitions, t.probs) if sp.path_pair == target]
    assert len(members) == 2
    assert members[0] == pytest.approx(members[1], rel=1e-13)
    assert conditional_uniformity_check(DP, H11, d) <= 1e-12


def test_rao_blackwell_ordering():
    d = center([0.3, 0.9, 2.2, -0.4, -1.7], 0.0)
    rep = rao_blackwell_variances(PoissonDirichlet(0.5, 2), H11, d, np.linspace(-4, 4, 17))
    assert np.all(rep.var_paths <= rep.var_partitions * (1 + 1e-9) + 1e-15)
    assert np.all(rep.var_partitions <= rep.var_latent + 1e-15)
    assert np.any(rep.var_latent > rep.var_partitions * 1.01)
