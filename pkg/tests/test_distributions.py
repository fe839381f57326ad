"""Primitive distributions, checked against scipy.stats as an independent oracle."""
import math

import numpy as np
import pytest
from scipy import integrate, stats

from gpp.distributions import (IMPOSSIBLE, Ber, Beta, Cat, Gamma, Geo, Normal, Pois, Unif,
                               log_density, result_type, sample, scalar_member, support_contains)
from gpp.errors import DistParamOutOfDomain
from gpp.syntax import BOOL, NAT, PREAL, REAL, UREAL, FinNatT
from gpp.typecheck import check_value


CONTINUOUS = [
    (Unif(), stats.uniform(0, 1), (0.0, 1.0)),
    (Beta(3.0, 1.0), stats.beta(3, 1), (0.0, 1.0)),
    (Beta(0.7, 2.5), stats.beta(0.7, 2.5), (0.0, 1.0)),
    (Gamma(2.0, 1.0), stats.gamma(2, scale=1.0), (0.0, np.inf)),
    (Gamma(0.8, 3.0), stats.gamma(0.8, scale=1 / 3.0), (0.0, np.inf)),
    (Normal(-1.0, 2.0), stats.norm(-1, 2), (-np.inf, np.inf)),
]
DISCRETE = [
    (Ber(0.3), lambda k: stats.bernoulli(0.3).logpmf(int(k)), [False, True]),
    (Cat((1.0, 2.0, 5.0)), lambda k: math.log([1, 2, 5][k] / 8), range(3)),
    (Geo(0.25), lambda k: stats.geom(0.25, loc=-1).logpmf(k), range(200)),
    (Pois(4.0), lambda k: stats.poisson(4.0).logpmf(k), range(60)),
]


class TestResultType:
    def test_examples(self):
        assert result_type(Gamma(2.0, 1.0)) == PREAL
        assert result_type(Cat((1.0, 1.0, 1.0))) == FinNatT(3)
        assert result_type(Ber(0.5)) == BOOL
        assert result_type(Unif()) == UREAL
        assert result_type(Beta(1.0, 1.0)) == UREAL
        assert result_type(Normal(0.0, 1.0)) == REAL
        assert result_type(Geo(0.5)) == NAT
        assert result_type(Pois(1.0)) == NAT


class TestSupport:
    def test_examples(self):
        assert support_contains(Unif(), 0.5)
        assert not support_contains(Gamma(2.0, 1.0), -1.0)
        assert support_contains(Pois(4.0), 7)

    def test_exact_carrier_membership(self):
        assert not support_contains(Pois(4.0), 7.0)
        assert not support_contains(Normal(0.0, 1.0), 1)
        assert not support_contains(Ber(0.5), 1)
        assert not support_contains(Geo(0.5), True)
        assert not support_contains(Unif(), 1.0)
        assert not support_contains(Cat((1.0, 1.0)), 2)
        assert not support_contains(Normal(0.0, 1.0), math.inf)

    @pytest.mark.parametrize("d", [Ber(0.5), Unif(), Beta(2.0, 2.0), Gamma(1.0, 1.0),
                                   Normal(0.0, 1.0), Cat((1.0, 3.0)), Geo(0.5), Pois(2.0)])
    def test_support_iff_check_value(self, d):
        for v in (True, False, 0, 1, 2, 5, -3, 0.0, 0.5, 1.0, 2.5, -0.5, ()):
            assert support_contains(d, v) == check_value(v, d.result_type()), (d, v)


class TestLogDensity:
    def test_examples(self):
        assert log_density(Normal(0.0, 1.0), 1.0) == pytest.approx(-1.4189385332046727, abs=1e-12)
        assert log_density(Unif(), 0.3) == 0.0
        assert log_density(Ber(0.1), False) == pytest.approx(math.log(0.9), abs=1e-15)

    def test_outside_support_is_impossible(self):
        assert log_density(Gamma(2.0, 1.0), -1.0) == IMPOSSIBLE
        assert log_density(Pois(2.0), 1.5) == IMPOSSIBLE

    @pytest.mark.parametrize("d,ref,_", CONTINUOUS)
    def test_matches_scipy(self, d, ref, _):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = d.sample(rng)
            assert log_density(d, v) == pytest.approx(ref.logpdf(v), rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("d,ref,sup", DISCRETE)
    def test_matches_scipy_discrete(self, d, ref, sup):
        for k in list(sup)[:20]:
            assert log_density(d, k) == pytest.approx(ref(k), rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("d,_,sup", DISCRETE)
    def test_pmf_sums_to_one(self, d, _, sup):
        total = math.fsum(math.exp(log_density(d, k)) for k in sup)
        assert abs(total - 1.0) <= 1e-9

    @pytest.mark.parametrize("d,_,bounds", CONTINUOUS)
    def test_density_integrates_to_one(self, d, _, bounds):
        f = lambda x: math.exp(d.log_density(float(x))) if d.support_contains(float(x)) else 0.0
        total, _err = integrate.quad(f, *bounds, limit=200)
        assert abs(total - 1.0) <= 1e-6


class TestParameters:
    @pytest.mark.parametrize("make", [
        lambda: Ber(1.2), lambda: Ber(0.0), lambda: Beta(0.0, 1.0), lambda: Gamma(1.0, -1.0),
        lambda: Normal(0.0, 0.0), lambda: Normal(math.nan, 1.0), lambda: Cat(()),
        lambda: Cat((1.0, -1.0)), lambda: Geo(1.0), lambda: Pois(0.0),
    ])
    def test_out_of_domain(self, make):
        with pytest.raises(DistParamOutOfDomain):
            make()


class TestSampling:
    def test_bernoulli_concentration(self):
        eps = 1e-2
        rng = np.random.default_rng(11)
        xs = [sample(Ber(1 - eps), rng) for _ in range(10_000)]
        frac = sum(xs) / len(xs)
        sd = math.sqrt(eps * (1 - eps) / len(xs))
        assert abs(frac - (1 - eps)) <= 3 * sd

    def test_unif_in_open_interval(self):
        rng = np.random.default_rng(1)
        assert all(0.0 < sample(Unif(), rng) < 1.0 for _ in range(5000))

    @pytest.mark.parametrize("d", [Ber(0.5), Unif(), Beta(2.0, 5.0), Gamma(0.5, 2.0),
                                   Normal(1.0, 3.0), Cat((1.0, 2.0)), Geo(0.3), Pois(7.0)])
    def test_deterministic_and_in_support(self, d):
        a = [d.sample(np.random.default_rng(5)) for _ in range(3)]
        r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
        s1 = [d.sample(r1) for _ in range(200)]
        s2 = [d.sample(r2) for _ in range(200)]
        assert s1 == s2
        assert all(d.support_contains(v) for v in s1)
        assert len(set(map(type, a))) == 1

    @pytest.mark.parametrize("d,ref", [(Gamma(2.0, 3.0), stats.gamma(2, scale=1 / 3)),
                                       (Beta(3.0, 1.0), stats.beta(3, 1)),
                                       (Normal(-1.0, 0.5), stats.norm(-1, 0.5))])
    def test_sampler_law(self, d, ref):
        rng = np.random.default_rng(3)
        xs = np.array([d.sample(rng) for _ in range(4000)])
        assert stats.kstest(xs, ref.cdf).pvalue > 1e-3

    def test_geo_and_cat_law(self):
        rng = np.random.default_rng(4)
        xs = np.array([Geo(0.4).sample(rng) for _ in range(20000)])
        assert abs(xs.mean() - 0.6 / 0.4) < 0.05
        cs = np.array([Cat((1.0, 3.0)).sample(rng) for _ in range(20000)])
        assert abs(cs.mean() - 0.75) < 0.015


def test_scalar_member_unit():
    from gpp.syntax import UNIT
    assert scalar_member((), UNIT)
    assert not scalar_member(0, UNIT)
