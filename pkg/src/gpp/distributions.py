"""Primitive distributions: support, log-density, sampling, result type.

Values are plain Python scalars: ``bool`` for booleans, ``int`` for
naturals and ``float`` for the three real types.  Weight zero is the
distinguished log-weight ``IMPOSSIBLE`` (negative infinity), which absorbs
under addition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DistParamOutOfDomain
from .syntax import (BOOL, NAT, PREAL, REAL, UNIT, UREAL, BaseType, BoolT, FinNatT,
                     NatT, PosRealT, RealT, UnitRealT, UnitT)

IMPOSSIBLE = float("-inf")
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def is_impossible(w: float) -> bool:
    return w == IMPOSSIBLE


def is_real(v) -> bool:
    return isinstance(v, float) and math.isfinite(v)


def is_nat(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def scalar_member(v, t: BaseType) -> bool:
    """Does the scalar value ``v`` inhabit the scalar type ``t``?"""
    if isinstance(t, UnitT):
        return v == () and isinstance(v, tuple)
    if isinstance(t, BoolT):
        return isinstance(v, bool)
    if isinstance(t, RealT):
        return is_real(v)
    if isinstance(t, PosRealT):
        return is_real(v) and v > 0.0
    if isinstance(t, UnitRealT):
        return is_real(v) and 0.0 < v < 1.0
    if isinstance(t, NatT):
        return is_nat(v)
    if isinstance(t, FinNatT):
        return is_nat(v) and v < t.n
    return False


def _require(ok: bool, what: str):
    if not ok:
        raise DistParamOutOfDomain(what)


class PrimDist:
    """Common interface; subclasses are frozen dataclasses."""

    def result_type(self) -> BaseType:
        raise NotImplementedError

    def support_contains(self, v) -> bool:
        return scalar_member(v, self.result_type())

    def log_density(self, v) -> float:
        if not self.support_contains(v):
            return IMPOSSIBLE
        return self._logpdf(v)

    def _logpdf(self, v) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator):
        raise NotImplementedError


@dataclass(frozen=True)
class Ber(PrimDist):
    p: float

    def __post_init__(self):
        _require(is_real(self.p) and 0.0 < self.p < 1.0, f"Ber parameter {self.p!r} not in (0,1)")

    def result_type(self):
        return BOOL

    def _logpdf(self, v):
        return math.log(self.p) if v else math.log1p(-self.p)

    def sample(self, rng):
        return bool(rng.random() < self.p)


def _open_unit(draw):
    # redraw the (measure-zero) endpoints so samples always lie in (0,1)
    while True:
        x = float(draw())
        if 0.0 < x < 1.0:
            return x


@dataclass(frozen=True)
class Unif(PrimDist):
    def result_type(self):
        return UREAL

    def _logpdf(self, v):
        return 0.0

    def sample(self, rng):
        return _open_unit(rng.random)


@dataclass(frozen=True)
class Beta(PrimDist):
    a: float
    b: float

    def __post_init__(self):
        _require(is_real(self.a) and self.a > 0, f"Beta shape {self.a!r} must be positive")
        _require(is_real(self.b) and self.b > 0, f"Beta shape {self.b!r} must be positive")

    def result_type(self):
        return UREAL

    def _logpdf(self, v):
        lbeta = math.lgamma(self.a) + math.lgamma(self.b) - math.lgamma(self.a + self.b)
        return (self.a - 1.0) * math.log(v) + (self.b - 1.0) * math.log1p(-v) - lbeta

    def sample(self, rng):
        return _open_unit(lambda: rng.beta(self.a, self.b))


@dataclass(frozen=True)
class Gamma(PrimDist):
    shape: float
    rate: float

    def __post_init__(self):
        _require(is_real(self.shape) and self.shape > 0, f"Gamma shape {self.shape!r} must be positive")
        _require(is_real(self.rate) and self.rate > 0, f"Gamma rate {self.rate!r} must be positive")

    def result_type(self):
        return PREAL

    def _logpdf(self, v):
        k, r = self.shape, self.rate
        return k * math.log(r) + (k - 1.0) * math.log(v) - r * v - math.lgamma(k)

    def sample(self, rng):
        scale = 1.0 / self.rate
        while True:
            x = float(rng.gamma(self.shape, scale))
            if 0.0 < x < math.inf:
                return x


@dataclass(frozen=True)
class Normal(PrimDist):
    mean: float
    stddev: float

    def __post_init__(self):
        _require(is_real(self.mean), f"Normal mean {self.mean!r} must be a finite real")
        _require(is_real(self.stddev) and self.stddev > 0, f"Normal stddev {self.stddev!r} must be positive")

    def result_type(self):
        return REAL

    def _logpdf(self, v):
        z = (v - self.mean) / self.stddev
        return -0.5 * z * z - math.log(self.stddev) - _HALF_LOG_2PI

    def sample(self, rng):
        return float(self.mean + self.stddev * rng.standard_normal())


@dataclass(frozen=True)
class Cat(PrimDist):
    weights: tuple

    def __post_init__(self):
        _require(len(self.weights) >= 1, "Cat needs at least one weight")
        for w in self.weights:
            _require(is_real(w) and w > 0, f"Cat weight {w!r} must be positive")

    def result_type(self):
        return FinNatT(len(self.weights))

    def _logpdf(self, v):
        return math.log(self.weights[v]) - math.log(math.fsum(self.weights))

    def sample(self, rng):
        cdf = np.cumsum(self.weights)
        u = rng.random() * cdf[-1]
        return int(min(np.searchsorted(cdf, u, side="right"), len(self.weights) - 1))


@dataclass(frozen=True)
class Geo(PrimDist):
    """Number of failures before the first success."""

    p: float

    def __post_init__(self):
        _require(is_real(self.p) and 0.0 < self.p < 1.0, f"Geo parameter {self.p!r} not in (0,1)")

    def result_type(self):
        return NAT

    def _logpdf(self, v):
        return math.log(self.p) + v * math.log1p(-self.p)

    def sample(self, rng):
        return int(rng.geometric(self.p)) - 1


@dataclass(frozen=True)
class Pois(PrimDist):
    rate: float

    def __post_init__(self):
        _require(is_real(self.rate) and self.rate > 0, f"Pois rate {self.rate!r} must be positive")

    def result_type(self):
        return NAT

    def _logpdf(self, v):
        return v * math.log(self.rate) - self.rate - math.lgamma(v + 1.0)

    def sample(self, rng):
        return int(rng.poisson(self.rate))


def result_type(d: PrimDist) -> BaseType:
    return d.result_type()


def support_contains(d: PrimDist, v) -> bool:
    return d.support_contains(v)


def log_density(d: PrimDist, v) -> float:
    return d.log_density(v)


def sample(d: PrimDist, rng: np.random.Generator):
    return d.sample(rng)


__all__ = [
    "IMPOSSIBLE", "is_impossible", "scalar_member", "PrimDist",
    "Ber", "Unif", "Beta", "Gamma", "Normal", "Cat", "Geo", "Pois",
    "result_type", "support_contains", "log_density", "sample", "UNIT",
]
