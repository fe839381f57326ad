"""Static semantics.

Two passes per procedure: a forward pass that computes basic types of
expressions and commands, then a backward pass that infers the guide-type
protocol on each channel from the command structure.  Also provides trace
typing, value typing, freeness predicates and model/guide compatibility.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import scalar_member
from .errors import ChannelMismatch, TypeCheckError, UnknownOperator
from .syntax import (BOOL, END, NAT, PREAL, REAL, UNIT, UREAL, App, ArrowT, BaseType, BinOp,
                     Bnd, BoolLit, BoolT, BranchRecv, BranchSend, Call, CBranch, ChoiceC,
                     ChoiceP, Cmd, Cond, CSample, DistBer, DistBeta, DistCat, DistGamma,
                     DistGeo, DistNormal, DistPois, DistT, DistUnif, End, Expr, FinNatT, Fold,
                     FOLD, GuideType, Lam, Let, NatLit, NatT, OpApp, PBranch, PosRealT,
                     ProcDecl, ProcSignature, Program, PSample, RealLit, RealT, Ret, SampleC,
                     SampleP, SampleRecv, SampleSend, TraceGet, TraceT, Trace, Triv, TVar,
                     TypeDef, UnitRealT, UnitT, UnOp, Var, substitute, validate_program)

# ---------------------------------------------------------------------------
# Subtyping
# ---------------------------------------------------------------------------

_REAL_RANK = {UnitRealT: 0, PosRealT: 1, RealT: 2}


def subtype(t1: BaseType, t2: BaseType) -> bool:
    if t1 == t2:
        return True
    r1, r2 = _REAL_RANK.get(type(t1)), _REAL_RANK.get(type(t2))
    if r1 is not None and r2 is not None:
        return r1 <= r2
    if isinstance(t1, FinNatT):
        if isinstance(t2, NatT):
            return True
        if isinstance(t2, FinNatT):
            return t1.n <= t2.n
        return False
    if isinstance(t1, ArrowT) and isinstance(t2, ArrowT):
        return subtype(t2.arg, t1.arg) and subtype(t1.res, t2.res)
    return False


def join(t1: BaseType, t2: BaseType) -> Optional[BaseType]:
    """Least upper bound, or None if the types are incompatible."""
    if subtype(t1, t2):
        return t2
    if subtype(t2, t1):
        return t1
    r1, r2 = _REAL_RANK.get(type(t1)), _REAL_RANK.get(type(t2))
    if r1 is not None and r2 is not None:
        return t1 if r1 > r2 else t2
    if isinstance(t1, (FinNatT, NatT)) and isinstance(t2, (FinNatT, NatT)):
        if isinstance(t1, FinNatT) and isinstance(t2, FinNatT):
            return FinNatT(max(t1.n, t2.n))
        return NAT
    if isinstance(t1, ArrowT) and isinstance(t2, ArrowT):
        arg = meet(t1.arg, t2.arg)
        res = join(t1.res, t2.res)
        if arg is not None and res is not None:
            return ArrowT(arg, res)
    return None


def meet(t1: BaseType, t2: BaseType) -> Optional[BaseType]:
    if subtype(t1, t2):
        return t1
    if subtype(t2, t1):
        return t2
    return None


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

_ARITH = {
    "+": [((NAT, NAT), NAT), ((PREAL, PREAL), PREAL), ((REAL, REAL), REAL)],
    "*": [((NAT, NAT), NAT), ((UREAL, UREAL), UREAL), ((PREAL, PREAL), PREAL), ((REAL, REAL), REAL)],
    "-": [((REAL, REAL), REAL)],
    "/": [((PREAL, PREAL), PREAL), ((REAL, REAL), REAL)],
    "<": [((REAL, REAL), BOOL), ((NAT, NAT), BOOL)],
    "<=": [((REAL, REAL), BOOL), ((NAT, NAT), BOOL)],
    ">": [((REAL, REAL), BOOL), ((NAT, NAT), BOOL)],
    ">=": [((REAL, REAL), BOOL), ((NAT, NAT), BOOL)],
    "==": [((REAL, REAL), BOOL), ((NAT, NAT), BOOL), ((BOOL, BOOL), BOOL)],
    "!=": [((REAL, REAL), BOOL), ((NAT, NAT), BOOL), ((BOOL, BOOL), BOOL)],
    "and": [((BOOL, BOOL), BOOL)],
    "or": [((BOOL, BOOL), BOOL)],
    "max": [((NAT, NAT), NAT), ((UREAL, UREAL), UREAL), ((PREAL, PREAL), PREAL),
            ((PREAL, REAL), PREAL), ((REAL, PREAL), PREAL), ((REAL, REAL), REAL)],
    "min": [((NAT, NAT), NAT), ((UREAL, UREAL), UREAL), ((PREAL, PREAL), PREAL),
            ((REAL, REAL), REAL)],
}
BINARY_OPS = {op: tuple(sigs) for op, sigs in _ARITH.items()}

UNARY_OPS = {
    "neg": [(REAL, REAL)],
    "not": [(BOOL, BOOL)],
    "exp": [(REAL, PREAL)],
    "log": [(PREAL, REAL)],
    "sqrt": [(PREAL, PREAL)],
    "real": [(NAT, REAL)],
}


def literal_type(r: float) -> BaseType:
    if 0.0 < r < 1.0:
        return UREAL
    if r > 0.0:
        return PREAL
    return REAL


def _err(msg, e, where=None):
    raise TypeCheckError(msg, getattr(e, "span", None), where)


def _need(G, e, want: BaseType, what: str):
    t = type_of_expr(G, e)
    if not subtype(t, want):
        _err(f"{what}: expected {want}, got {t}", e)
    return t


def type_of_expr(G: dict, e: Expr) -> BaseType:
    if isinstance(e, Var):
        if e.name not in G:
            _err(f"unbound variable {e.name!r}", e)
        return G[e.name]
    if isinstance(e, Triv):
        return UNIT
    if isinstance(e, BoolLit):
        return BOOL
    if isinstance(e, RealLit):
        if e.value != e.value or e.value in (float("inf"), float("-inf")):
            _err("non-finite real literal", e)
        return literal_type(e.value)
    if isinstance(e, NatLit):
        return FinNatT(e.value + 1)
    if isinstance(e, Cond):
        _need(G, e.cond, BOOL, "condition")
        t1, t2 = type_of_expr(G, e.then), type_of_expr(G, e.else_)
        j = join(t1, t2)
        if j is None:
            _err(f"conditional arms have incompatible types {t1} and {t2}", e)
        return j
    if isinstance(e, BinOp):
        if e.op not in BINARY_OPS:
            _err(f"unknown operator {e.op!r}", e)
        t1, t2 = type_of_expr(G, e.lhs), type_of_expr(G, e.rhs)
        for (p1, p2), r in BINARY_OPS[e.op]:
            if subtype(t1, p1) and subtype(t2, p2):
                return r
        _err(f"operator {e.op!r} does not accept ({t1}, {t2})", e)
    if isinstance(e, UnOp):
        if e.op not in UNARY_OPS:
            _err(f"unknown operator {e.op!r}", e)
        t = type_of_expr(G, e.arg)
        for p, r in UNARY_OPS[e.op]:
            if subtype(t, p):
                return r
        _err(f"operator {e.op!r} does not accept {t}", e)
    if isinstance(e, Lam):
        body = type_of_expr({**G, e.param: e.param_type}, e.body)
        return ArrowT(e.param_type, body)
    if isinstance(e, App):
        tf = type_of_expr(G, e.fn)
        if not isinstance(tf, ArrowT):
            _err(f"applying a non-function of type {tf}", e)
        _need(G, e.arg, tf.arg, "function argument")
        return tf.res
    if isinstance(e, Let):
        t = type_of_expr(G, e.bound)
        return type_of_expr({**G, e.name: t}, e.body)
    if isinstance(e, DistBer):
        _need(G, e.p, UREAL, "Ber parameter")
        return DistT(BOOL)
    if isinstance(e, DistUnif):
        return DistT(UREAL)
    if isinstance(e, DistBeta):
        _need(G, e.a, PREAL, "Beta parameter")
        _need(G, e.b, PREAL, "Beta parameter")
        return DistT(UREAL)
    if isinstance(e, DistGamma):
        _need(G, e.shape, PREAL, "Gamma shape")
        _need(G, e.rate, PREAL, "Gamma rate")
        return DistT(PREAL)
    if isinstance(e, DistNormal):
        _need(G, e.mean, REAL, "Normal mean")
        _need(G, e.stddev, PREAL, "Normal stddev")
        return DistT(REAL)
    if isinstance(e, DistCat):
        for w in e.weights:
            _need(G, w, PREAL, "Cat weight")
        return DistT(FinNatT(len(e.weights)))
    if isinstance(e, DistGeo):
        _need(G, e.p, UREAL, "Geo parameter")
        return DistT(NAT)
    if isinstance(e, DistPois):
        _need(G, e.rate, PREAL, "Pois rate")
        return DistT(NAT)
    if isinstance(e, TraceGet):
        tt = type_of_expr(G, e.trace)
        if not isinstance(tt, TraceT):
            _err(f"get[...] expects a trace, got {tt}", e)
        _need(G, e.index, NAT, "trace index")
        return e.annot
    raise TypeCheckError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------

def value_type(v) -> Optional[BaseType]:
    """Minimal type of a runtime value (None if it has none)."""
    from .interpreter import Closure  # local import: interpreter depends on us
    from .distributions import PrimDist

    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return FinNatT(v + 1) if v >= 0 else None
    if isinstance(v, float):
        if not scalar_member(v, REAL):
            return None
        return literal_type(v)
    if v == () and isinstance(v, tuple):
        return UNIT
    if isinstance(v, PrimDist):
        return DistT(v.result_type())
    if isinstance(v, Trace):
        return TraceT(None)
    if isinstance(v, Closure):
        G = {}
        for name, val in v.env.items():
            t = value_type(val)
            if t is None:
                return None
            G[name] = t
        try:
            return ArrowT(v.param_type, type_of_expr({**G, v.param: v.param_type}, v.body))
        except TypeCheckError:
            return None
    return None


def check_value(v, t: BaseType, defs: Optional[dict] = None) -> bool:
    if t.is_scalar:
        return scalar_member(v, t)
    if isinstance(t, TraceT):
        if not isinstance(v, Trace):
            return False
        return t.protocol is None or check_trace(v, t.protocol, defs or {})
    vt = value_type(v)
    if vt is None:
        return False
    return subtype(vt, t)


# ---------------------------------------------------------------------------
# Guide-type predicates
# ---------------------------------------------------------------------------

def guide_type_equal(a: GuideType, b: GuideType) -> bool:
    """Syntactic equality with nominal operators."""
    return a == b


def _lookup(defs: dict, op: str) -> TypeDef:
    try:
        return defs[op]
    except KeyError:
        raise UnknownOperator(f"undefined type operator {op!r}") from None


def _free_of(ty: GuideType, defs: dict, bad) -> bool:
    seen = set()
    stack = [ty]
    while stack:
        t = stack.pop()
        if isinstance(t, bad):
            return False
        if isinstance(t, (SampleP, SampleC)):
            stack.append(t.cont)
        elif isinstance(t, (ChoiceP, ChoiceC)):
            stack.extend((t.left, t.right))
        elif isinstance(t, OpApp):
            stack.append(t.arg)
            if t.op not in seen:
                seen.add(t.op)
                stack.append(_lookup(defs, t.op).body)
    return True


def is_oplus_free(ty: GuideType, defs: Optional[dict] = None) -> bool:
    return _free_of(ty, defs or {}, ChoiceP)


def is_amp_free(ty: GuideType, defs: Optional[dict] = None) -> bool:
    return _free_of(ty, defs or {}, ChoiceC)


_fresh_counter = itertools.count()


def guide_type_equiv(a: GuideType, b: GuideType, defs_a: dict, defs_b: Optional[dict] = None) -> bool:
    """Equality up to a consistent renaming of type operators.

    Two applications ``T[A]`` and ``U[B]`` agree when ``A`` agrees with ``B``
    and the bodies of ``T`` and ``U`` agree on a shared fresh variable,
    assuming ``T ~ U`` while comparing the bodies.
    """
    return _first_mismatch(a, b, defs_a, defs_b if defs_b is not None else defs_a) is None


def _first_mismatch(a, b, defs_a, defs_b, path=()):
    assumed = set()
    work = [(a, b, path)]
    while work:
        x, y, where = work.pop()
        if isinstance(x, End) and isinstance(y, End):
            continue
        if isinstance(x, TVar) and isinstance(y, TVar):
            if x.name != y.name:
                return where, x, y
            continue
        if type(x) is not type(y):
            return where, x, y
        if isinstance(x, (SampleP, SampleC)):
            if x.carrier != y.carrier:
                return where, x, y
            work.append((x.cont, y.cont, where + ("sample",)))
        elif isinstance(x, (ChoiceP, ChoiceC)):
            work.append((x.right, y.right, where + ("else",)))
            work.append((x.left, y.left, where + ("then",)))
        elif isinstance(x, OpApp):
            work.append((x.arg, y.arg, where + ("after " + x.op,)))
            if (x.op, y.op) not in assumed:
                assumed.add((x.op, y.op))
                tx, ty = _lookup(defs_a, x.op), _lookup(defs_b, y.op)
                z = TVar(f"%{next(_fresh_counter)}")
                work.append((substitute(tx.body, tx.param, z), substitute(ty.body, ty.param, z),
                             where + ("in " + x.op,)))
        else:
            return where, x, y
    return None


def _describe_slot(t: GuideType) -> str:
    if isinstance(t, SampleP):
        return f"a provider sample of {t.carrier}"
    if isinstance(t, SampleC):
        return f"a consumer sample of {t.carrier}"
    if isinstance(t, ChoiceC):
        return "a consumer branch selection"
    if isinstance(t, ChoiceP):
        return "a provider branch selection"
    if isinstance(t, OpApp):
        return f"a call ({t.op})"
    if isinstance(t, End):
        return "the end of the protocol"
    return f"type variable {t.name}" if isinstance(t, TVar) else repr(t)


def describe_mismatch(model_ty, guide_ty, defs) -> Optional[str]:
    found = _first_mismatch(model_ty, guide_ty, defs, defs)
    if found is None:
        return None
    where, x, y = found
    loc = " / ".join(where) if where else "start"
    if isinstance(x, (SampleP, SampleC)) and type(x) is type(y) and x.carrier != y.carrier:
        return f"carrier mismatch at [{loc}]: model expects {x.carrier}, guide provides {y.carrier}"
    return f"protocol mismatch at [{loc}]: model expects {_describe_slot(x)}, guide has {_describe_slot(y)}"


# ---------------------------------------------------------------------------
# Trace typing
# ---------------------------------------------------------------------------

def check_trace(s: Trace, A: GuideType, defs: dict) -> bool:
    """Does the trace inhabit the (closed) guide type ``A``?"""
    msgs = s.messages if isinstance(s, Trace) else tuple(s)
    i, ty = 0, A
    n = len(msgs)
    while True:
        if isinstance(ty, End):
            return i == n
        if isinstance(ty, TVar):
            raise TypeCheckError(f"trace typing needs a closed type, found variable {ty.name}")
        if isinstance(ty, OpApp):
            td = _lookup(defs, ty.op)
            if i >= n or not isinstance(msgs[i], Fold):
                return False
            i += 1
            ty = substitute(td.body, td.param, ty.arg)
            continue
        if i >= n:
            return False
        m = msgs[i]
        if isinstance(ty, SampleP):
            if not isinstance(m, PSample) or not scalar_member(m.value, ty.carrier):
                return False
            ty = ty.cont
        elif isinstance(ty, SampleC):
            if not isinstance(m, CSample) or not scalar_member(m.value, ty.carrier):
                return False
            ty = ty.cont
        elif isinstance(ty, ChoiceP):
            if not isinstance(m, PBranch):
                return False
            ty = ty.left if m.value else ty.right
        elif isinstance(ty, ChoiceC):
            if not isinstance(m, CBranch):
                return False
            ty = ty.left if m.value else ty.right
        else:
            raise TypeCheckError(f"not a guide type: {ty!r}")
        i += 1


def random_scalar(t: BaseType, rng: np.random.Generator):
    if isinstance(t, UnitT):
        return ()
    if isinstance(t, BoolT):
        return bool(rng.random() < 0.5)
    if isinstance(t, UnitRealT):
        while True:
            x = float(rng.random())
            if x > 0.0:
                return x
    if isinstance(t, PosRealT):
        return float(rng.exponential(2.0)) + 1e-12
    if isinstance(t, RealT):
        return float(rng.normal(0.0, 3.0))
    if isinstance(t, FinNatT):
        return int(rng.integers(0, t.n))
    if isinstance(t, NatT):
        return int(rng.geometric(0.3)) - 1
    raise TypeCheckError(f"no scalar generator for {t}")


def random_trace(A: GuideType, defs: dict, rng: np.random.Generator, max_len: int = 200,
                 p_left: float = 0.5) -> Optional[Trace]:
    """Draw a trace of type ``A`` by walking its derivation; None if it runs past ``max_len``."""
    out = []
    ty = A
    while not isinstance(ty, End):
        if len(out) > max_len:
            return None
        if isinstance(ty, OpApp):
            td = _lookup(defs, ty.op)
            out.append(FOLD)
            ty = substitute(td.body, td.param, ty.arg)
        elif isinstance(ty, SampleP):
            out.append(PSample(random_scalar(ty.carrier, rng)))
            ty = ty.cont
        elif isinstance(ty, SampleC):
            out.append(CSample(random_scalar(ty.carrier, rng)))
            ty = ty.cont
        elif isinstance(ty, (ChoiceP, ChoiceC)):
            b = bool(rng.random() < p_left)
            out.append(PBranch(b) if isinstance(ty, ChoiceP) else CBranch(b))
            ty = ty.left if b else ty.right
        else:
            raise TypeCheckError(f"random_trace needs a closed type, found {ty!r}")
    return Trace(tuple(out))


# ---------------------------------------------------------------------------
# Commands and programs
# ---------------------------------------------------------------------------

@dataclass
class ProgramTypes:
    """Result of inference over a whole program."""

    signatures: dict
    typedefs: dict
    params: dict = field(default_factory=dict)

    def operator(self, proc: str, chan: str) -> Optional[str]:
        sig = self.signatures[proc]
        for slot in (sig.consume, sig.provide):
            if slot and slot[0] == chan:
                return slot[1]
        return None

    def protocol(self, proc: str, chan: str, post: GuideType = END) -> GuideType:
        """The protocol a top-level run of ``proc`` follows on ``chan``."""
        op = self.operator(proc, chan)
        if op is None:
            raise ChannelMismatch(f"{proc} has no channel {chan!r}")
        td = self.typedefs[op]
        return substitute(td.body, td.param, post)


def _sig_ret(S: dict, name: str, m) -> BaseType:
    sig = S.get(name)
    if sig is None:
        _err(f"call to undefined procedure {name!r}", m)
    return sig


def base_type_of_cmd(S: dict, G: dict, m: Cmd) -> BaseType:
    if isinstance(m, Ret):
        return type_of_expr(G, m.expr)
    if isinstance(m, Bnd):
        t1 = base_type_of_cmd(S, G, m.first)
        return base_type_of_cmd(S, {**G, m.binder: t1}, m.rest)
    if isinstance(m, Call):
        sig = _sig_ret(S, m.proc, m)
        if len(m.args) != len(sig.arg_types):
            _err(f"{m.proc} expects {len(sig.arg_types)} argument(s), got {len(m.args)}", m)
        for arg, want in zip(m.args, sig.arg_types):
            _need(G, arg, want, f"argument of {m.proc}")
        if sig.ret_type is None:
            _err(f"return type of {m.proc} is not known here; annotate it with '-> type'", m)
        return sig.ret_type
    if isinstance(m, (SampleRecv, SampleSend)):
        t = type_of_expr(G, m.dist)
        if not isinstance(t, DistT):
            _err(f"sample expects a distribution, got {t}", m)
        return t.carrier
    if isinstance(m, (BranchSend, BranchRecv)):
        if isinstance(m, BranchSend):
            _need(G, m.pred, BOOL, "branch predicate")
        t1 = base_type_of_cmd(S, G, m.then)
        t2 = base_type_of_cmd(S, G, m.else_)
        j = join(t1, t2)
        if j is None:
            _err(f"branch arms return incompatible types {t1} and {t2}", m)
        return j
    raise TypeCheckError(f"not a command: {m!r}")


def _dist_carrier(G, e, m) -> BaseType:
    t = type_of_expr(G, e)
    if not isinstance(t, DistT):
        _err(f"sample expects a distribution, got {t}", m)
    return t.carrier


def infer_cmd_pre(S: dict, G: dict, m: Cmd, a: Optional[str], b: Optional[str],
                  Apost: Optional[GuideType], Bpost: Optional[GuideType]):
    """Backward inference: the protocols on ``a`` (consumed) and ``b`` (provided)
    required before ``m`` so that ``Apost``/``Bpost`` hold afterwards."""
    if isinstance(m, Ret):
        return Apost, Bpost
    if isinstance(m, Bnd):
        t1 = base_type_of_cmd(S, G, m.first)
        Amid, Bmid = infer_cmd_pre(S, {**G, m.binder: t1}, m.rest, a, b, Apost, Bpost)
        return infer_cmd_pre(S, G, m.first, a, b, Amid, Bmid)
    if isinstance(m, SampleRecv):
        tau = _dist_carrier(G, m.dist, m)
        if m.chan == a and a is not None:
            return SampleP(tau, Apost), Bpost
        if m.chan == b and b is not None:
            _err(f"receiving a sample on provided channel {m.chan!r} would need a consumer-sample type, "
                 "which the checker does not synthesize", m)
        _err(f"sample on unknown channel {m.chan!r}", m)
    if isinstance(m, SampleSend):
        tau = _dist_carrier(G, m.dist, m)
        if m.chan == b and b is not None:
            return Apost, SampleP(tau, Bpost)
        if m.chan == a and a is not None:
            _err(f"sending a sample on consumed channel {m.chan!r} would need a consumer-sample type, "
                 "which the checker does not synthesize", m)
        _err(f"sample on unknown channel {m.chan!r}", m)
    if isinstance(m, BranchSend):
        _need(G, m.pred, BOOL, "branch predicate")
        if m.chan != a or a is None:
            if m.chan == b and b is not None:
                _err(f"selecting a branch on provided channel {m.chan!r} would need a provider-choice "
                     "type, which the checker does not synthesize", m)
            _err(f"branch on unknown channel {m.chan!r}", m)
        A1, B1 = infer_cmd_pre(S, G, m.then, a, b, Apost, Bpost)
        A2, B2 = infer_cmd_pre(S, G, m.else_, a, b, Apost, Bpost)
        if not guide_type_equal(B1, B2):
            _err(f"branch arms disagree on channel {b!r}: {_fmt(B1)} vs {_fmt(B2)}", m)
        return ChoiceC(A1, A2), B1
    if isinstance(m, BranchRecv):
        if m.chan != b or b is None:
            if m.chan == a and a is not None:
                _err(f"receiving a branch selection on consumed channel {m.chan!r} would need a "
                     "provider-choice type, which the checker does not synthesize", m)
            _err(f"branch on unknown channel {m.chan!r}", m)
        A1, B1 = infer_cmd_pre(S, G, m.then, a, b, Apost, Bpost)
        A2, B2 = infer_cmd_pre(S, G, m.else_, a, b, Apost, Bpost)
        if not guide_type_equal(A1, A2):
            _err(f"branch arms disagree on channel {a!r}: {_fmt(A1)} vs {_fmt(A2)}", m)
        return A1, ChoiceC(B1, B2)
    if isinstance(m, Call):
        sig = _sig_ret(S, m.proc, m)
        base_type_of_cmd(S, G, m)
        Apre, Bpre = Apost, Bpost
        if sig.consume is not None:
            if a is None:
                _err(f"{m.proc} consumes a channel but the caller has none", m)
            Apre = OpApp(sig.consume[1], Apost)
        if sig.provide is not None:
            if b is None:
                _err(f"{m.proc} provides a channel but the caller has none", m)
            Bpre = OpApp(sig.provide[1], Bpost)
        return Apre, Bpre
    raise TypeCheckError(f"not a command: {m!r}")


def _fmt(g):
    if g is None:
        return "(absent)"
    from .parser import format_guide_type

    return format_guide_type(g)


def operator_name(proc: str, chan: str) -> str:
    return f"{proc}.{chan}"


CONSUME_VAR = "X"
PROVIDE_VAR = "Y"


def _return_types(p: Program, arg_types: dict) -> dict:
    """Annotated return types, plus inferred ones for non-recursive procedures."""
    rets = {d.name: d.ret_type for d in p.procs}
    state = {}

    def visit(name):
        if rets[name] is not None:
            return rets[name]
        if state.get(name) == "active":
            raise TypeCheckError("recursive procedure needs a return type annotation ('-> type')",
                                 p.proc(name).span, name)
        state[name] = "active"
        decl = p.proc(name)
        S = {}
        for callee in _callees(decl.body):
            if callee in rets:
                visit(callee)
        for n in rets:
            S[n] = ProcSignature(arg_types[n], rets[n])
        G = dict(decl.params)
        try:
            rets[name] = base_type_of_cmd(S, G, decl.body)
        except TypeCheckError as exc:
            raise TypeCheckError(exc.message, exc.span, name) from None
        state[name] = "done"
        return rets[name]

    for d in p.procs:
        visit(d.name)
    return rets


def _callees(m: Cmd):
    stack = [m]
    while stack:
        c = stack.pop()
        if isinstance(c, Call):
            yield c.proc
        elif isinstance(c, Bnd):
            stack.extend((c.first, c.rest))
        elif isinstance(c, (BranchRecv, BranchSend)):
            stack.extend((c.then, c.else_))


def infer_program_types(p: Program) -> ProgramTypes:
    diags = validate_program(p)
    if diags:
        d = diags[0]
        raise TypeCheckError(d.message, d.span, d.where)
    arg_types = {d.name: d.param_types for d in p.procs}
    rets = _return_types(p, arg_types)

    S = {}
    for d in p.procs:
        cons = (d.consume, operator_name(d.name, d.consume)) if d.consume else None
        prov = (d.provide, operator_name(d.name, d.provide)) if d.provide else None
        S[d.name] = ProcSignature(arg_types[d.name], rets[d.name], cons, prov)

    typedefs = dict(p.typedef_table)
    for d in p.procs:
        Apost = TVar(CONSUME_VAR) if d.consume else None
        Bpost = TVar(PROVIDE_VAR) if d.provide else None
        G = dict(d.params)
        try:
            t = base_type_of_cmd(S, G, d.body)
            if not subtype(t, rets[d.name]):
                _err(f"body returns {t}, annotation says {rets[d.name]}", d.body)
            Apre, Bpre = infer_cmd_pre(S, G, d.body, d.consume, d.provide, Apost, Bpost)
        except TypeCheckError as exc:
            raise type(exc)(exc.message, exc.span or d.span, d.name) from None
        sig = S[d.name]
        if sig.consume:
            typedefs[sig.consume[1]] = TypeDef(sig.consume[1], CONSUME_VAR, Apre)
        if sig.provide:
            typedefs[sig.provide[1]] = TypeDef(sig.provide[1], PROVIDE_VAR, Bpre)
    return ProgramTypes(S, typedefs, {d.name: d.params for d in p.procs})


# ---------------------------------------------------------------------------
# Model/guide compatibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompatReport:
    channel: str
    model: str
    guide: str
    latent_type: GuideType          # from the guide's provided protocol
    model_latent_type: GuideType    # from the model's consumed protocol
    obs_type: Optional[GuideType]
    oplus_free: bool
    amp_free: bool
    types_match: bool
    verdict: str
    reasons: tuple = ()

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_json(self) -> dict:
        return {
            "channel": self.channel,
            "model": self.model,
            "guide": self.guide,
            "latent_type": _fmt(self.latent_type),
            "model_latent_type": _fmt(self.model_latent_type),
            "obs_type": _fmt(self.obs_type),
            "oplus_free": self.oplus_free,
            "amp_free": self.amp_free,
            "types_match": self.types_match,
            "verdict": self.verdict,
            "reasons": list(self.reasons),
        }


def check_model_guide(p: Program, model: str, guide: str,
                      types: Optional[ProgramTypes] = None) -> CompatReport:
    types = types or infer_program_types(p)
    m, g = p.proc(model), p.proc(guide)
    if m.consume is None:
        raise ChannelMismatch(f"model {model} consumes no latent channel", m.span)
    if g.provide != m.consume:
        raise ChannelMismatch(
            f"guide {guide} provides {g.provide or 'no channel'} but model {model} "
            f"consumes {m.consume}", g.span)
    defs = types.typedefs
    A_guide = types.protocol(guide, g.provide)
    A_model = types.protocol(model, m.consume)
    B = types.protocol(model, m.provide) if m.provide else END
    reasons = []
    if g.consume is not None:
        reasons.append(f"guide {guide} consumes channel {g.consume}; a guide must not consume")
    mismatch = describe_mismatch(A_model, A_guide, defs)
    if mismatch:
        reasons.append(mismatch)
    oplus = is_oplus_free(A_guide, defs)
    amp = is_amp_free(B, defs)
    if not oplus:
        reasons.append("latent protocol contains a provider choice")
    if not amp:
        reasons.append("observation protocol contains a consumer choice")
    ok = mismatch is None and oplus and amp and g.consume is None
    return CompatReport(m.consume, model, guide, A_guide, A_model, B, oplus, amp,
                        mismatch is None, "accept" if ok else "reject", tuple(reasons))


def check_program(p: Program) -> list:
    """All diagnostics for a program as strings (empty when clean)."""
    diags = [str(d) for d in validate_program(p)]
    if diags:
        return diags
    try:
        infer_program_types(p)
    except TypeCheckError as exc:
        return [str(exc)]
    return []
