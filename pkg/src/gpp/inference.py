"""Inference engines over model/guide pairs: IS, MH and VI.

Every engine is reproducible from an integer seed.  Importance sampling
gives particle ``i`` its own substream derived from ``(seed, i)``, so
results do not depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (AllImpossible, InitImpossible, NonFiniteGradient, RuntimeFault,
                     TraceMismatch)
from .interpreter import IMPOSSIBLE, eval_proc, joint_execute, model_log_density
from .syntax import EMPTY_TRACE, Program, Trace


def substream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


# ---------------------------------------------------------------------------
# Importance sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Particle:
    latent: Trace
    log_importance: float
    guide_log_weight: float
    model_log_weight: float
    model_result: object = None


@dataclass
class ParticleSet:
    particles: list

    def __len__(self):
        return len(self.particles)

    @property
    def log_weights(self) -> np.ndarray:
        return np.array([q.log_importance for q in self.particles], dtype=float)

    def normalized_weights(self) -> np.ndarray:
        lw = self.log_weights
        top = lw.max() if len(lw) else -np.inf
        if not np.isfinite(top):
            raise AllImpossible("every particle has weight zero")
        w = np.exp(lw - top)
        return w / w.sum()

    def ess(self) -> float:
        w = self.normalized_weights()
        return float(1.0 / np.sum(w * w))

    def log_evidence(self) -> float:
        lw = self.log_weights
        top = lw.max()
        if not np.isfinite(top):
            return IMPOSSIBLE
        return float(top + math.log(np.mean(np.exp(lw - top))))


def importance_sample(p: Program, guide: str, model: str, so: Trace, n: int, seed: int = 0,
                      guide_args=(), model_args=()) -> ParticleSet:
    if n < 1:
        raise ValueError("need at least one particle")
    out = []
    for i in range(n):
        rec = joint_execute(p, guide, model, guide_args, model_args, so, substream(seed, i))
        out.append(Particle(rec.latent, rec.log_importance, rec.guide_log_weight,
                            rec.model_log_weight, rec.model_result))
    return ParticleSet(out)


def posterior_expectation(particles, f: Callable) -> float:
    ps = particles if isinstance(particles, ParticleSet) else ParticleSet(list(particles))
    w = ps.normalized_weights()
    vals = np.array([f(q.latent) for q in ps.particles], dtype=float)
    nz = w > 0
    return float(np.sum(w[nz] * vals[nz]))


# ---------------------------------------------------------------------------
# Metropolis-Hastings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainState:
    trace: Trace
    model_log_weight: float
    step: int = 0
    accepted: int = 0
    backward_impossible: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.step if self.step else float("nan")


def proposal_log_density(p: Program, proposal: str, given: Trace, target: Trace,
                         proposal_args=()) -> float:
    """Density of proposing ``target`` when the proposal is handed ``given``."""
    try:
        w, _ = eval_proc(p, proposal, (given, *proposal_args), sb=target)
    except (TraceMismatch, RuntimeFault):
        return IMPOSSIBLE
    return w


def mh_step(p: Program, proposal: str, model: str, so: Trace, state: ChainState,
            rng: np.random.Generator, model_args=(), proposal_args=()):
    rec = joint_execute(p, proposal, model, (state.trace, *proposal_args), model_args, so, rng)
    new, log_fwd, log_new = rec.latent, rec.guide_log_weight, rec.model_log_weight
    log_bwd = proposal_log_density(p, proposal, new, state.trace, proposal_args)
    bwd_bad = int(log_bwd == IMPOSSIBLE)
    u = rng.random()
    accept = False
    if log_new != IMPOSSIBLE and not bwd_bad:
        log_alpha = (log_new + log_bwd) - (state.model_log_weight + log_fwd)
        accept = bool(log_alpha >= 0 or math.log(u) < log_alpha)
    if accept:
        nxt = ChainState(new, log_new, state.step + 1, state.accepted + 1,
                         state.backward_impossible + bwd_bad)
    else:
        nxt = replace(state, step=state.step + 1,
                      backward_impossible=state.backward_impossible + bwd_bad)
    return nxt, accept


def mh_chain(p: Program, proposal: str, model: str, so: Trace, init: Trace, steps: int,
             burnin: int = 0, seed: int = 0, model_args=(), proposal_args=()) -> list:
    """Run ``burnin + steps`` MH steps; return the ``steps + 1`` states after burn-in."""
    w0 = model_log_density(p, model, so, init, model_args)
    if w0 == IMPOSSIBLE:
        raise InitImpossible("initial trace has zero model density")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    state = ChainState(init, w0)
    for _ in range(burnin):
        state, _ = mh_step(p, proposal, model, so, state, rng, model_args, proposal_args)
    state = ChainState(state.trace, state.model_log_weight)
    out = [state]
    for _ in range(steps):
        state, _ = mh_step(p, proposal, model, so, state, rng, model_args, proposal_args)
        out.append(state)
    return out


# ---------------------------------------------------------------------------
# Variational inference
# ---------------------------------------------------------------------------

TRANSFORMS = ("identity", "exp", "logit")


def _forward(tag: str, u: float) -> float:
    if tag == "identity":
        return float(u)
    if tag == "exp":
        return float(math.exp(u))
    if tag == "logit":
        return float(1.0 / (1.0 + math.exp(-u)))
    raise ValueError(f"unknown transform {tag!r}")


def _inverse(tag: str, x: float) -> float:
    if tag == "identity":
        return float(x)
    if tag == "exp":
        if x <= 0:
            raise ValueError("exp-transformed parameters must be positive")
        return math.log(x)
    if tag == "logit":
        if not 0 < x < 1:
            raise ValueError("logit-transformed parameters must lie in (0,1)")
        return math.log(x) - math.log1p(-x)
    raise ValueError(f"unknown transform {tag!r}")


@dataclass(frozen=True)
class ViParams:
    names: tuple
    transforms: tuple
    unconstrained: tuple

    def __post_init__(self):
        if not len(self.names) == len(self.transforms) == len(self.unconstrained):
            raise ValueError("names, transforms and values must have equal length")
        for t in self.transforms:
            if t not in TRANSFORMS:
                raise ValueError(f"unknown transform {t!r}")

    @classmethod
    def from_constrained(cls, spec: Sequence) -> "ViParams":
        """Build from ``(name, transform, constrained_value)`` triples."""
        names, tags, vals = [], [], []
        for name, tag, x in spec:
            names.append(name)
            tags.append(tag)
            vals.append(_inverse(tag, float(x)))
        return cls(tuple(names), tuple(tags), tuple(vals))

    def values(self) -> dict:
        return {n: _forward(t, u) for n, t, u in zip(self.names, self.transforms, self.unconstrained)}

    def with_unconstrained(self, u) -> "ViParams":
        return replace(self, unconstrained=tuple(float(x) for x in u))


def _guide_args(p: Program, guide: str, theta: ViParams) -> tuple:
    vals = theta.values()
    decl = p.proc(guide)
    missing = [n for n in decl.param_names if n not in vals]
    if missing or len(vals) != len(decl.param_names):
        raise ValueError(f"guide {guide} parameters {list(decl.param_names)} do not match "
                         f"{list(theta.names)}")
    return tuple(vals[n] for n in decl.param_names)


@dataclass(frozen=True)
class ElboRecord:
    iteration: int
    elbo: float
    params: dict


def elbo_samples(p: Program, guide: str, theta: ViParams, model: str, so: Trace, n: int,
                 rng: np.random.Generator, model_args=()) -> np.ndarray:
    args = _guide_args(p, guide, theta)
    out = np.empty(n)
    for i in range(n):
        rec = joint_execute(p, guide, model, args, model_args, so, rng)
        out[i] = rec.model_log_weight - rec.guide_log_weight
    return out


def elbo_estimate(p: Program, guide: str, theta: ViParams, model: str, so: Trace, n: int,
                  seed: int = 0, model_args=(), return_stderr: bool = False):
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    xs = elbo_samples(p, guide, theta, model, so, n, rng, model_args)
    mean = float(np.mean(xs))
    if return_stderr:
        se = float(np.std(xs, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return mean, se
    return mean


def vi_optimize(p: Program, guide: str, theta0: ViParams, model: str, so: Trace, iters: int,
                n_per_iter: int, step_size: float, seed: int = 0, h: float = 1e-4,
                model_args=(), callback: Optional[Callable] = None) -> ViParams:
    """Gradient ascent on the ELBO with central differences and common random numbers."""
    theta = theta0
    for it in range(iters):
        seq = np.random.SeedSequence(seed, spawn_key=(it,))
        u = np.array(theta.unconstrained, dtype=float)
        grad = np.zeros_like(u)
        centre = []
        for j in range(len(u)):
            evals = []
            for sign in (1.0, -1.0):
                v = u.copy()
                v[j] += sign * h
                xs = elbo_samples(p, guide, theta.with_unconstrained(v), model, so, n_per_iter,
                                  np.random.default_rng(seq), model_args)
                f = float(np.mean(xs))
                if not math.isfinite(f):
                    raise NonFiniteGradient(f"ELBO is {f} at iteration {it}, parameter {theta.names[j]}")
                evals.append(f)
            grad[j] = (evals[0] - evals[1]) / (2.0 * h)
            centre.append(0.5 * (evals[0] + evals[1]))
        theta = theta.with_unconstrained(u + step_size * grad)
        if callback is not None:
            callback(ElboRecord(it, float(np.mean(centre)) if centre else float("nan"), theta.values()))
    return theta
