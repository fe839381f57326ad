"""Abstract syntax of the coroutine calculus.

Basic types, pure expressions, monadic commands, guide types, guidance
messages/traces and whole programs.  Every node is an immutable dataclass;
source spans ride along on expressions, commands and procedures but never
take part in equality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Union


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self):
        if (self.start_line, self.start_col) > (self.end_line, self.end_col):
            raise ValueError("span start must not come after its end")

    def __str__(self):
        return f"{self.file}:{self.start_line}:{self.start_col}"


def _span():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Basic types
# ---------------------------------------------------------------------------

class BaseType:
    """Marker base class for basic (value-level) types."""

    is_scalar = False


@dataclass(frozen=True)
class UnitT(BaseType):
    is_scalar = True

    def __str__(self):
        return "unit"


@dataclass(frozen=True)
class BoolT(BaseType):
    is_scalar = True

    def __str__(self):
        return "bool"


@dataclass(frozen=True)
class UnitRealT(BaseType):
    is_scalar = True

    def __str__(self):
        return "ureal"


@dataclass(frozen=True)
class PosRealT(BaseType):
    is_scalar = True

    def __str__(self):
        return "preal"


@dataclass(frozen=True)
class RealT(BaseType):
    is_scalar = True

    def __str__(self):
        return "real"


@dataclass(frozen=True)
class FinNatT(BaseType):
    n: int
    is_scalar = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"nat[{self.n}] needs a positive bound")

    def __str__(self):
        return f"nat[{self.n}]"


@dataclass(frozen=True)
class NatT(BaseType):
    is_scalar = True

    def __str__(self):
        return "nat"


@dataclass(frozen=True)
class ArrowT(BaseType):
    arg: BaseType
    res: BaseType

    def __str__(self):
        arg = f"({self.arg})" if isinstance(self.arg, ArrowT) else str(self.arg)
        return f"{arg} -> {self.res}"


@dataclass(frozen=True)
class DistT(BaseType):
    carrier: BaseType

    def __post_init__(self):
        if not self.carrier.is_scalar:
            raise ValueError(f"distribution carrier must be scalar, got {self.carrier}")

    def __str__(self):
        return f"dist[{self.carrier}]"


@dataclass(frozen=True)
class TraceT(BaseType):
    """First-class guidance traces; ``protocol=None`` leaves the protocol open."""

    protocol: Optional["GuideType"] = None

    def __str__(self):
        if self.protocol is None:
            return "trace"
        from .parser import format_guide_type

        return f"trace[{format_guide_type(self.protocol)}]"


UNIT = UnitT()
BOOL = BoolT()
UREAL = UnitRealT()
PREAL = PosRealT()
REAL = RealT()
NAT = NatT()


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

class Expr:
    span: Optional[SourceSpan]


@dataclass(frozen=True)
class Var(Expr):
    name: str
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class Triv(Expr):
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class Cond(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class RealLit(Expr):
    value: float
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class NatLit(Expr):
    value: int
    span: Optional[SourceSpan] = _span()

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("natural literal must be non-negative")


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    lhs: Expr
    rhs: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class UnOp(Expr):
    op: str
    arg: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class Lam(Expr):
    param: str
    param_type: BaseType
    body: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class Let(Expr):
    bound: Expr
    name: str
    body: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class DistBer(Expr):
    p: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class DistUnif(Expr):
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class DistBeta(Expr):
    a: Expr
    b: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class DistGamma(Expr):
    shape: Expr
    rate: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class DistNormal(Expr):
    mean: Expr
    stddev: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class DistCat(Expr):
    weights: tuple
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class DistGeo(Expr):
    p: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class DistPois(Expr):
    rate: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class TraceGet(Expr):
    """``get[annot](trace, index)``: read the payload of message ``index``."""

    annot: BaseType
    trace: Expr
    index: Expr
    span: Optional[SourceSpan] = _span()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

class Cmd:
    span: Optional[SourceSpan]


@dataclass(frozen=True)
class Ret(Cmd):
    expr: Expr
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class Bnd(Cmd):
    first: Cmd
    binder: str
    rest: Cmd
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class Call(Cmd):
    proc: str
    args: tuple
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class SampleRecv(Cmd):
    dist: Expr
    chan: str
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class SampleSend(Cmd):
    dist: Expr
    chan: str
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class BranchRecv(Cmd):
    then: Cmd
    else_: Cmd
    chan: str
    span: Optional[SourceSpan] = _span()


@dataclass(frozen=True)
class BranchSend(Cmd):
    pred: Expr
    then: Cmd
    else_: Cmd
    chan: str
    span: Optional[SourceSpan] = _span()


# ---------------------------------------------------------------------------
# Guide types
# ---------------------------------------------------------------------------

class GuideType:
    pass


@dataclass(frozen=True)
class TVar(GuideType):
    name: str


@dataclass(frozen=True)
class End(GuideType):
    pass


@dataclass(frozen=True)
class OpApp(GuideType):
    op: str
    arg: GuideType


@dataclass(frozen=True)
class SampleP(GuideType):
    """Provider samples a ``carrier`` value, then continues with ``cont``."""

    carrier: BaseType
    cont: GuideType

    def __post_init__(self):
        if not self.carrier.is_scalar:
            raise ValueError(f"guide-type carrier must be scalar, got {self.carrier}")


@dataclass(frozen=True)
class SampleC(GuideType):
    """Consumer samples a ``carrier`` value, then continues with ``cont``."""

    carrier: BaseType
    cont: GuideType

    def __post_init__(self):
        if not self.carrier.is_scalar:
            raise ValueError(f"guide-type carrier must be scalar, got {self.carrier}")


@dataclass(frozen=True)
class ChoiceP(GuideType):
    """Provider selects the branch."""

    left: GuideType
    right: GuideType


@dataclass(frozen=True)
class ChoiceC(GuideType):
    """Consumer selects the branch."""

    left: GuideType
    right: GuideType


END = End()


@dataclass(frozen=True)
class TypeDef:
    op: str
    param: str
    body: GuideType


@dataclass(frozen=True)
class ProcSignature:
    arg_types: tuple
    ret_type: BaseType
    consume: Optional[tuple] = None  # (channel, operator)
    provide: Optional[tuple] = None

    def __post_init__(self):
        if self.consume and self.provide and self.consume[0] == self.provide[0]:
            raise ValueError("consumed and provided channels must differ")


def free_type_vars(ty: GuideType) -> set:
    out = set()
    stack = [ty]
    while stack:
        t = stack.pop()
        if isinstance(t, TVar):
            out.add(t.name)
        elif isinstance(t, OpApp):
            stack.append(t.arg)
        elif isinstance(t, (SampleP, SampleC)):
            stack.append(t.cont)
        elif isinstance(t, (ChoiceP, ChoiceC)):
            stack.extend((t.left, t.right))
    return out


def substitute(ty: GuideType, name: str, repl: GuideType) -> GuideType:
    """Capture-free substitution ``[repl/name] ty`` (guide types have no binders)."""
    if isinstance(ty, TVar):
        return repl if ty.name == name else ty
    if isinstance(ty, End):
        return ty
    if isinstance(ty, OpApp):
        return OpApp(ty.op, substitute(ty.arg, name, repl))
    if isinstance(ty, SampleP):
        return SampleP(ty.carrier, substitute(ty.cont, name, repl))
    if isinstance(ty, SampleC):
        return SampleC(ty.carrier, substitute(ty.cont, name, repl))
    if isinstance(ty, ChoiceP):
        return ChoiceP(substitute(ty.left, name, repl), substitute(ty.right, name, repl))
    if isinstance(ty, ChoiceC):
        return ChoiceC(substitute(ty.left, name, repl), substitute(ty.right, name, repl))
    raise TypeError(f"not a guide type: {ty!r}")


def operators_of(ty: GuideType) -> set:
    out = set()
    stack = [ty]
    while stack:
        t = stack.pop()
        if isinstance(t, OpApp):
            out.add(t.op)
            stack.append(t.arg)
        elif isinstance(t, (SampleP, SampleC)):
            stack.append(t.cont)
        elif isinstance(t, (ChoiceP, ChoiceC)):
            stack.extend((t.left, t.right))
    return out


# ---------------------------------------------------------------------------
# Guidance messages and traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PSample:
    value: object


@dataclass(frozen=True)
class CSample:
    value: object


@dataclass(frozen=True)
class PBranch:
    value: bool


@dataclass(frozen=True)
class CBranch:
    value: bool


@dataclass(frozen=True)
class Fold:
    pass


FOLD = Fold()
Message = Union[PSample, CSample, PBranch, CBranch, Fold]


@dataclass(frozen=True)
class Trace:
    """A finite guidance trace."""

    messages: tuple = ()

    def __len__(self):
        return len(self.messages)

    def __iter__(self) -> Iterator[Message]:
        return iter(self.messages)

    def __getitem__(self, i):
        return self.messages[i]

    def __add__(self, other: "Trace") -> "Trace":
        return Trace(self.messages + other.messages)


EMPTY_TRACE = Trace()


def concat_traces(s1: Trace, s2: Trace) -> Trace:
    return s1 + s2


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcDecl:
    name: str
    params: tuple  # of (name, BaseType)
    ret_type: Optional[BaseType]
    consume: Optional[str]
    provide: Optional[str]
    body: Cmd
    span: Optional[SourceSpan] = _span()

    @property
    def param_names(self):
        return tuple(n for n, _ in self.params)

    @property
    def param_types(self):
        return tuple(t for _, t in self.params)


@dataclass(frozen=True)
class Program:
    procs: tuple = ()
    typedefs: tuple = ()

    @cached_property
    def proc_table(self) -> dict:
        return {p.name: p for p in self.procs}

    @cached_property
    def typedef_table(self) -> dict:
        return {t.op: t for t in self.typedefs}

    def proc(self, name: str) -> ProcDecl:
        try:
            return self.proc_table[name]
        except KeyError:
            raise KeyError(f"unknown procedure {name!r}") from None


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    where: str
    rule: str
    message: str
    span: Optional[SourceSpan] = None

    def __str__(self):
        loc = f"{self.span}: " if self.span else ""
        return f"{loc}[{self.rule}] {self.where}: {self.message}"


def _commands(cmd: Cmd):
    stack = [cmd]
    while stack:
        c = stack.pop()
        yield c
        if isinstance(c, Bnd):
            stack.extend((c.first, c.rest))
        elif isinstance(c, (BranchRecv, BranchSend)):
            stack.extend((c.then, c.else_))


def validate_program(p: Program) -> list:
    diags = []
    seen = set()
    for decl in p.procs:
        if decl.name in seen:
            diags.append(Diagnostic(decl.name, "duplicate-proc",
                                    "procedure declared more than once", decl.span))
        seen.add(decl.name)
    table = p.proc_table

    for decl in p.procs:
        names = decl.param_names
        if len(set(names)) != len(names):
            diags.append(Diagnostic(decl.name, "duplicate-param",
                                    "parameter names must be distinct", decl.span))
        if decl.consume is not None and decl.consume == decl.provide:
            diags.append(Diagnostic(decl.name, "channel-clash",
                                    f"channel {decl.consume!r} both consumed and provided",
                                    decl.span))
        chans = {decl.consume, decl.provide} - {None}
        for c in _commands(decl.body):
            if isinstance(c, (SampleRecv, SampleSend, BranchRecv, BranchSend)):
                if c.chan not in chans:
                    diags.append(Diagnostic(
                        decl.name, "unknown-channel",
                        f"channel {c.chan!r} is not in the header "
                        f"(consume {decl.consume or '.'} provide {decl.provide or '.'})",
                        c.span))
            elif isinstance(c, Call):
                callee = table.get(c.proc)
                if callee is None:
                    diags.append(Diagnostic(decl.name, "unknown-proc",
                                            f"call to undefined procedure {c.proc!r}", c.span))
                    continue
                if len(c.args) != len(callee.params):
                    diags.append(Diagnostic(
                        decl.name, "arity",
                        f"{c.proc} expects {len(callee.params)} argument(s), got {len(c.args)}",
                        c.span))
                if callee.consume is not None and decl.consume is None:
                    diags.append(Diagnostic(decl.name, "call-channel",
                                            f"{c.proc} consumes a channel but the caller has none",
                                            c.span))
                if callee.provide is not None and decl.provide is None:
                    diags.append(Diagnostic(decl.name, "call-channel",
                                            f"{c.proc} provides a channel but the caller has none",
                                            c.span))

    ops = set()
    for td in p.typedefs:
        if td.op in ops:
            diags.append(Diagnostic(td.op, "duplicate-typedef", "operator defined more than once"))
        ops.add(td.op)
        extra = free_type_vars(td.body) - {td.param}
        if extra:
            diags.append(Diagnostic(td.op, "typedef-free-vars",
                                    f"free type variables {sorted(extra)} besides {td.param}"))
    for td in p.typedefs:
        for op in operators_of(td.body) - ops:
            diags.append(Diagnostic(td.op, "unknown-operator", f"operator {op!r} is undefined"))
    return diags
