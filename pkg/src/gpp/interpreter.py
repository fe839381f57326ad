"""Dynamic semantics.

* ``eval_expr`` evaluates pure expressions.
* ``Process`` is a trampolined step machine for commands.  It never calls
  itself recursively; it yields a request whenever the command needs to
  talk on a channel and is resumed with the answer.
* ``eval_cmd`` drives a process against two fixed traces and accumulates the
  log-weight (the weighted big-step judgment).
* ``reduce_cmd`` is an independent recursive implementation of the
  probability-free reduction relation; it is kept separate on purpose so the
  two can be checked against each other.
* ``joint_execute`` runs a guide and a model as coroutines, sampling the
  latent trace on the fly and scoring a fixed observation trace.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import distributions as D
from .errors import (DeadlockError, DistParamOutOfDomain, ObservationExhausted,
                     ObservationMismatch, ProtocolMismatch, RuntimeFault, StepLimitExceeded,
                     Stuck, TraceGetOutOfBounds, TraceGetTypeMismatch, TraceMismatch,
                     UnboundVariable)
from .syntax import (App, BinOp, Bnd, BoolLit, BranchRecv, BranchSend, Call, CBranch, Cmd, Cond,
                     CSample, DistBer, DistBeta, DistCat, DistGamma, DistGeo, DistNormal,
                     DistPois, DistUnif, EMPTY_TRACE, Expr, Fold, FOLD, Lam, Let, NatLit, PBranch,
                     Program, PSample, RealLit, Ret, SampleRecv, SampleSend, Trace, TraceGet,
                     Triv, UnOp, Var)

IMPOSSIBLE = D.IMPOSSIBLE
DEFAULT_STEP_LIMIT = 1_000_000


@dataclass(frozen=True)
class Closure:
    env: dict
    param: str
    param_type: object
    body: Expr

    def __hash__(self):
        return id(self)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

def _real(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise RuntimeFault(f"{what} produced a non-finite value")
    return x


def _binop(op, x, y):
    if op == "+":
        return x + y if isinstance(x, int) else _real(x + y, "+")
    if op == "-":
        return _real(x - y, "-")
    if op == "*":
        return x * y if isinstance(x, int) else _real(x * y, "*")
    if op == "/":
        if y == 0:
            raise RuntimeFault("division by zero")
        return _real(x / y, "/")
    if op == "<":
        return x < y
    if op == "<=":
        return x <= y
    if op == ">":
        return x > y
    if op == ">=":
        return x >= y
    if op == "==":
        return x == y
    if op == "!=":
        return x != y
    if op == "max":
        return max(x, y)
    if op == "min":
        return min(x, y)
    raise RuntimeFault(f"unknown operator {op!r}")


def _unop(op, x):
    if op == "neg":
        return -x
    if op == "not":
        return not x
    if op == "exp":
        try:
            r = math.exp(x)
        except OverflowError:
            raise RuntimeFault("exp overflow") from None
        if r == 0.0:
            raise RuntimeFault("exp underflow to zero")
        return r
    if op == "log":
        if x <= 0:
            raise RuntimeFault("log of a non-positive number")
        return math.log(x)
    if op == "sqrt":
        if x < 0:
            raise RuntimeFault("sqrt of a negative number")
        return math.sqrt(x)
    if op == "real":
        return float(x)
    raise RuntimeFault(f"unknown operator {op!r}")


def _as_float(v):
    return float(v) if isinstance(v, int) and not isinstance(v, bool) else v


def eval_expr(V: dict, e: Expr):
    if isinstance(e, Var):
        try:
            return V[e.name]
        except KeyError:
            raise UnboundVariable(f"unbound variable {e.name!r}") from None
    if isinstance(e, RealLit):
        return float(e.value)
    if isinstance(e, NatLit):
        return int(e.value)
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Triv):
        return ()
    if isinstance(e, BinOp):
        if e.op == "and":
            return eval_expr(V, e.lhs) and eval_expr(V, e.rhs)
        if e.op == "or":
            return eval_expr(V, e.lhs) or eval_expr(V, e.rhs)
        x, y = eval_expr(V, e.lhs), eval_expr(V, e.rhs)
        if isinstance(x, float) or isinstance(y, float):
            x, y = _as_float(x), _as_float(y)
        return _binop(e.op, x, y)
    if isinstance(e, UnOp):
        return _unop(e.op, eval_expr(V, e.arg))
    if isinstance(e, Cond):
        return eval_expr(V, e.then if eval_expr(V, e.cond) else e.else_)
    if isinstance(e, Lam):
        return Closure(V, e.param, e.param_type, e.body)
    if isinstance(e, App):
        f = eval_expr(V, e.fn)
        arg = eval_expr(V, e.arg)
        if not isinstance(f, Closure):
            raise RuntimeFault("applying a non-function")
        return eval_expr({**f.env, f.param: arg}, f.body)
    if isinstance(e, Let):
        v = eval_expr(V, e.bound)
        return eval_expr({**V, e.name: v}, e.body)
    if isinstance(e, DistBer):
        return D.Ber(_as_float(eval_expr(V, e.p)))
    if isinstance(e, DistUnif):
        return D.Unif()
    if isinstance(e, DistBeta):
        return D.Beta(_as_float(eval_expr(V, e.a)), _as_float(eval_expr(V, e.b)))
    if isinstance(e, DistGamma):
        return D.Gamma(_as_float(eval_expr(V, e.shape)), _as_float(eval_expr(V, e.rate)))
    if isinstance(e, DistNormal):
        return D.Normal(_as_float(eval_expr(V, e.mean)), _as_float(eval_expr(V, e.stddev)))
    if isinstance(e, DistCat):
        return D.Cat(tuple(_as_float(eval_expr(V, w)) for w in e.weights))
    if isinstance(e, DistGeo):
        return D.Geo(_as_float(eval_expr(V, e.p)))
    if isinstance(e, DistPois):
        return D.Pois(_as_float(eval_expr(V, e.rate)))
    if isinstance(e, TraceGet):
        t = eval_expr(V, e.trace)
        i = eval_expr(V, e.index)
        if not isinstance(t, Trace):
            raise TraceGetTypeMismatch("get[...] applied to a non-trace")
        if not (isinstance(i, int) and not isinstance(i, bool)) or not 0 <= i < len(t):
            raise TraceGetOutOfBounds(f"trace index {i!r} out of range for a trace of length {len(t)}")
        msg = t[i]
        if isinstance(msg, Fold) or not D.scalar_member(msg.value, e.annot):
            raise TraceGetTypeMismatch(f"message {i} ({msg}) does not carry a {e.annot}")
        return msg.value
    raise RuntimeFault(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# The step machine
# ---------------------------------------------------------------------------

CONSUMED, PROVIDED = "a", "b"


def message_class(role: str, sending: bool, branch: bool):
    """Which message kind a sample/branch command exchanges on a channel role."""
    provider = (role == PROVIDED) == sending
    if branch:
        return PBranch if provider else CBranch
    return PSample if provider else CSample


@dataclass(frozen=True)
class SampleReq:
    role: str
    sending: bool
    dist: D.PrimDist


@dataclass(frozen=True)
class BranchReq:
    role: str
    sending: bool
    pred: Optional[bool]


@dataclass(frozen=True)
class FoldReq:
    role: str


@dataclass(frozen=True)
class Done:
    value: object


def _roles_of(decl) -> dict:
    roles = {}
    if decl.consume:
        roles[decl.consume] = CONSUMED
    if decl.provide:
        roles[decl.provide] = PROVIDED
    return roles


class Process:
    """One logical execution, advanced request by request."""

    def __init__(self, program: Program, cmd: Cmd, env: dict, roles: dict,
                 step_limit: int = DEFAULT_STEP_LIMIT):
        self.program = program
        self.roles = roles
        self.stack = []
        self.state = ("exec", cmd, env)
        self.waiting = None
        self.folds = []
        self.steps = 0
        self.step_limit = step_limit

    @classmethod
    def for_proc(cls, program: Program, name: str, args=(), **kw) -> "Process":
        decl = program.proc(name)
        if len(args) != len(decl.params):
            raise RuntimeFault(f"{name} expects {len(decl.params)} argument(s), got {len(args)}")
        return cls(program, decl.body, dict(zip(decl.param_names, args)), _roles_of(decl), **kw)

    def _role(self, chan):
        try:
            return self.roles[chan]
        except KeyError:
            raise RuntimeFault(f"channel {chan!r} is not available here") from None

    def next(self, value=None):
        """Resume with ``value`` (the answer to the previous request) and run to the next request."""
        w = self.waiting
        if w is not None:
            self.waiting = None
            if w[0] == "value":
                self.state = ("ret", value)
            elif w[0] == "branch":
                then, else_, env = w[1]
                self.state = ("exec", then if value else else_, env)
        while True:
            self.steps += 1
            if self.steps > self.step_limit:
                raise StepLimitExceeded(f"exceeded {self.step_limit} steps")
            if self.folds:
                role = self.folds.pop(0)
                self.waiting = ("fold",)
                return FoldReq(role)
            state = self.state
            if state[0] == "ret":
                v = state[1]
                if not self.stack:
                    self.state = ("done", v)
                    return Done(v)
                frame = self.stack.pop()
                if frame[0] == "bind":
                    _, binder, rest, env = frame
                    self.state = ("exec", rest, {**env, binder: v})
                else:
                    self.roles = frame[1]
                continue
            if state[0] == "done":
                return Done(state[1])
            _, m, env = state
            if isinstance(m, Ret):
                self.state = ("ret", eval_expr(env, m.expr))
            elif isinstance(m, Bnd):
                self.stack.append(("bind", m.binder, m.rest, env))
                self.state = ("exec", m.first, env)
            elif isinstance(m, Call):
                args = [eval_expr(env, a) for a in m.args]
                callee = self.program.proc(m.proc)
                self.stack.append(("call", self.roles))
                self.roles = _roles_of(callee)
                if callee.consume:
                    self.folds.append(CONSUMED)
                if callee.provide:
                    self.folds.append(PROVIDED)
                self.state = ("exec", callee.body, dict(zip(callee.param_names, args)))
            elif isinstance(m, (SampleRecv, SampleSend)):
                d = eval_expr(env, m.dist)
                if not isinstance(d, D.PrimDist):
                    raise RuntimeFault("sample expects a distribution")
                self.waiting = ("value",)
                return SampleReq(self._role(m.chan), isinstance(m, SampleSend), d)
            elif isinstance(m, BranchSend):
                pv = eval_expr(env, m.pred)
                self.waiting = ("branch", (m.then, m.else_, env))
                return BranchReq(self._role(m.chan), True, bool(pv))
            elif isinstance(m, BranchRecv):
                self.waiting = ("branch", (m.then, m.else_, env))
                return BranchReq(self._role(m.chan), False, None)
            else:
                raise RuntimeFault(f"not a command: {m!r}")


# ---------------------------------------------------------------------------
# Weighted evaluation against fixed traces
# ---------------------------------------------------------------------------

def _drive(proc: Process, sa: Trace, sb: Trace):
    traces = {CONSUMED: sa.messages, PROVIDED: sb.messages}
    cur = {CONSUMED: 0, PROVIDED: 0}
    logw = 0.0
    req = proc.next()
    while not isinstance(req, Done):
        role = req.role
        msgs, i = traces[role], cur[role]
        if i >= len(msgs):
            raise TraceMismatch(f"trace on channel role {role} exhausted at position {i}")
        msg = msgs[i]
        cur[role] = i + 1
        if isinstance(req, FoldReq):
            if not isinstance(msg, Fold):
                raise TraceMismatch(f"expected fold at {role}[{i}], found {msg}")
            req = proc.next()
        elif isinstance(req, SampleReq):
            want = message_class(role, req.sending, branch=False)
            if not isinstance(msg, want):
                raise TraceMismatch(f"expected {want.__name__} at {role}[{i}], found {msg}")
            if not req.dist.support_contains(msg.value):
                raise TraceMismatch(f"value {msg.value!r} at {role}[{i}] outside the support of {req.dist}")
            logw += req.dist.log_density(msg.value)
            req = proc.next(msg.value)
        else:
            want = message_class(role, req.sending, branch=True)
            if not isinstance(msg, want):
                raise TraceMismatch(f"expected {want.__name__} at {role}[{i}], found {msg}")
            if req.sending and msg.value != req.pred:
                logw = IMPOSSIBLE
            req = proc.next(msg.value)
    for role in (CONSUMED, PROVIDED):
        if cur[role] != len(traces[role]):
            raise TraceMismatch(f"{len(traces[role]) - cur[role]} unused message(s) on channel role {role}")
    return logw, req.value


def eval_cmd(p: Program, V: dict, sa: Trace, sb: Trace, m: Cmd, a: Optional[str] = None,
             b: Optional[str] = None, step_limit: int = DEFAULT_STEP_LIMIT):
    """Score ``m`` against traces ``sa`` (channel ``a``) and ``sb`` (channel ``b``).

    Returns ``(log_weight, value)``.  A branch selection that contradicts
    the predicate yields ``IMPOSSIBLE``; structural disagreement raises
    ``TraceMismatch``.
    """
    roles = {}
    if a is not None:
        roles[a] = CONSUMED
    if b is not None:
        roles[b] = PROVIDED
    return _drive(Process(p, m, dict(V), roles, step_limit), sa, sb)


def eval_proc(p: Program, name: str, args=(), sa: Trace = EMPTY_TRACE, sb: Trace = EMPTY_TRACE,
              step_limit: int = DEFAULT_STEP_LIMIT):
    """Score a top-level run of procedure ``name`` (its body, no initial fold)."""
    return _drive(Process.for_proc(p, name, tuple(args), step_limit=step_limit), sa, sb)


def model_log_density(p: Program, model: str, so: Trace, sl: Trace, args=()) -> float:
    try:
        w, _ = eval_proc(p, model, args, sa=sl, sb=so)
    except TraceMismatch:
        return IMPOSSIBLE
    return w


# ---------------------------------------------------------------------------
# Probability-free reduction (independent recursive implementation)
# ---------------------------------------------------------------------------

class _Reducer:
    def __init__(self, p: Program, sa: Trace, sb: Trace):
        self.p = p
        self.traces = {CONSUMED: sa.messages, PROVIDED: sb.messages}
        self.cur = {CONSUMED: 0, PROVIDED: 0}

    def stuck(self, rule, detail=""):
        raise Stuck(rule, dict(self.cur), detail)

    def take(self, role, kind, rule):
        msgs, i = self.traces[role], self.cur[role]
        if i >= len(msgs):
            self.stuck(rule, "trace exhausted")
        if not isinstance(msgs[i], kind):
            self.stuck(rule, f"found {msgs[i]}")
        self.cur[role] = i + 1
        return msgs[i]

    def run(self, m: Cmd, V: dict, roles: dict):
        while True:
            if isinstance(m, Ret):
                return eval_expr(V, m.expr)
            if isinstance(m, Bnd):
                v = self.run(m.first, V, roles)
                V = {**V, m.binder: v}
                m = m.rest
                continue
            if isinstance(m, (SampleRecv, SampleSend)):
                role = roles[m.chan]
                sending = isinstance(m, SampleSend)
                rule = f"RM:Sample:{'Send' if sending else 'Recv'}:{'L' if role == CONSUMED else 'R'}"
                d = eval_expr(V, m.dist)
                msg = self.take(role, message_class(role, sending, False), rule)
                if not d.support_contains(msg.value):
                    self.stuck(rule, f"{msg.value!r} outside support")
                return msg.value
            if isinstance(m, BranchSend):
                role = roles[m.chan]
                rule = f"RM:Cond:Send:{'L' if role == CONSUMED else 'R'}"
                pv = bool(eval_expr(V, m.pred))
                msg = self.take(role, message_class(role, True, True), rule)
                if msg.value != pv:
                    self.stuck(rule, "recorded selection differs from the predicate")
                m = m.then if pv else m.else_
                continue
            if isinstance(m, BranchRecv):
                role = roles[m.chan]
                rule = f"RM:Cond:Recv:{'L' if role == CONSUMED else 'R'}"
                msg = self.take(role, message_class(role, False, True), rule)
                m = m.then if msg.value else m.else_
                continue
            if isinstance(m, Call):
                args = [eval_expr(V, a) for a in m.args]
                callee = self.p.proc(m.proc)
                if callee.consume:
                    self.take(CONSUMED, Fold, "RM:Call")
                if callee.provide:
                    self.take(PROVIDED, Fold, "RM:Call")
                return self.run(callee.body, dict(zip(callee.param_names, args)), _roles_of(callee))
            raise RuntimeFault(f"not a command: {m!r}")


def reduce_cmd(p: Program, V: dict, sa: Trace, sb: Trace, m: Cmd, a: Optional[str] = None,
               b: Optional[str] = None):
    roles = {}
    if a is not None:
        roles[a] = CONSUMED
    if b is not None:
        roles[b] = PROVIDED
    r = _Reducer(p, sa, sb)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 20000))
    try:
        v = r.run(m, dict(V), roles)
    finally:
        sys.setrecursionlimit(old)
    for role in (CONSUMED, PROVIDED):
        if r.cur[role] != len(r.traces[role]):
            r.stuck("RM:Ret", f"unused messages on channel role {role}")
    return v


def reduce_proc(p: Program, name: str, args=(), sa: Trace = EMPTY_TRACE, sb: Trace = EMPTY_TRACE):
    decl = p.proc(name)
    return reduce_cmd(p, dict(zip(decl.param_names, args)), sa, sb, decl.body,
                      decl.consume, decl.provide)


# ---------------------------------------------------------------------------
# Joint coroutine execution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExecutionRecord:
    latent: Trace
    obs: Trace
    guide_log_weight: float
    model_log_weight: float
    guide_result: object
    model_result: object

    @property
    def log_importance(self) -> float:
        return self.model_log_weight - self.guide_log_weight


def _describe(req) -> str:
    if isinstance(req, Done):
        return "termination"
    if isinstance(req, FoldReq):
        return "a procedure call"
    kind = "branch" if isinstance(req, BranchReq) else "sample"
    direction = "send" if req.sending else "receive"
    return f"{kind} {direction}"


def joint_execute(p: Program, guide: str, model: str, guide_args=(), model_args=(),
                  so: Trace = EMPTY_TRACE, rng: Optional[np.random.Generator] = None,
                  step_limit: int = DEFAULT_STEP_LIMIT) -> ExecutionRecord:
    """Run guide and model cooperatively over the shared latent channel."""
    if rng is None:
        rng = np.random.default_rng()
    g = Process.for_proc(p, guide, tuple(guide_args), step_limit=step_limit)
    m = Process.for_proc(p, model, tuple(model_args), step_limit=step_limit)
    obs = so.messages
    oi = 0
    latent = []
    wg = wm = 0.0

    rg = g.next()
    rm = m.next()
    while True:
        # the model's observation-side requests are answered from so
        while not isinstance(rm, Done) and rm.role == PROVIDED:
            if oi >= len(obs):
                raise ObservationExhausted(f"model needs observation {oi} but only {len(obs)} given")
            msg = obs[oi]
            oi += 1
            if isinstance(rm, FoldReq):
                if not isinstance(msg, Fold):
                    raise ObservationMismatch(f"observation {oi - 1}: expected fold, found {msg}")
                rm = m.next()
            elif isinstance(rm, SampleReq):
                want = message_class(PROVIDED, rm.sending, False)
                if not isinstance(msg, want) or not rm.dist.support_contains(msg.value):
                    raise ObservationMismatch(
                        f"observation {oi - 1}: {msg} does not fit a {want.__name__} from {rm.dist}")
                wm += rm.dist.log_density(msg.value)
                rm = m.next(msg.value)
            else:
                want = message_class(PROVIDED, rm.sending, True)
                if not isinstance(msg, want):
                    raise ObservationMismatch(f"observation {oi - 1}: expected {want.__name__}, found {msg}")
                if rm.sending and msg.value != rm.pred:
                    wm = IMPOSSIBLE
                rm = m.next(msg.value)
        if not isinstance(rg, Done) and rg.role == CONSUMED:
            raise ProtocolMismatch("the guide tried to use a consumed channel; guides only provide")

        if isinstance(rg, Done) and isinstance(rm, Done):
            break
        if isinstance(rg, Done) or isinstance(rm, Done):
            raise ProtocolMismatch(f"latent channel: guide is at {_describe(rg)} "
                                   f"while model is at {_describe(rm)}")
        if isinstance(rg, FoldReq) and isinstance(rm, FoldReq):
            latent.append(FOLD)
            rg, rm = g.next(), m.next()
        elif isinstance(rg, SampleReq) and isinstance(rm, SampleReq):
            if rg.sending == rm.sending:
                if not rg.sending:
                    raise DeadlockError("both sides wait to receive a latent sample")
                raise ProtocolMismatch("both sides try to send a latent sample")
            sender, receiver = (rg, rm) if rg.sending else (rm, rg)
            v = sender.dist.sample(rng)
            lg = rg.dist.log_density(v)
            lm = rm.dist.log_density(v)
            wg += lg
            wm += lm
            latent.append(PSample(v) if rg.sending else CSample(v))
            rg, rm = g.next(v), m.next(v)
        elif isinstance(rg, BranchReq) and isinstance(rm, BranchReq):
            if rg.sending == rm.sending:
                if not rg.sending:
                    raise DeadlockError("both sides wait for a latent branch selection")
                raise ProtocolMismatch("both sides try to select a latent branch")
            sel = rg.pred if rg.sending else rm.pred
            latent.append(PBranch(sel) if rg.sending else CBranch(sel))
            rg, rm = g.next(sel), m.next(sel)
        else:
            raise ProtocolMismatch(f"latent channel: guide is at {_describe(rg)} "
                                   f"while model is at {_describe(rm)}")
    if oi != len(obs):
        raise ObservationMismatch(f"{len(obs) - oi} observation message(s) left unused")
    return ExecutionRecord(Trace(tuple(latent)), so, wg, wm, rg.value, rm.value)
