"""Concrete syntax: tokenizer, recursive-descent parser and pretty-printer.

Grammar summary (``#`` starts a line comment)::

    program  ::= (typedef | proc)*
    typedef  ::= 'typedef' NAME '[' VAR ']' '=' gtype
    proc     ::= 'proc' NAME '(' [param (',' param)*] ')' ['->' type]
                 'consume' chan 'provide' chan '=' cmd
    chan     ::= NAME | '.'
    cmd      ::= NAME '<-' cmd1 ';' cmd | cmd1 [';' cmd]
    cmd1     ::= 'return' expr | 'call' NAME '(' args ')'
               | 'sample' '[' ('recv'|'send') ']' '(' chan ',' expr ')'
               | 'observe' '(' chan ',' expr ')'
               | 'if' '[' 'send' chan ']' expr 'then' cmd 'else' cmd
               | 'if' '[' 'recv' chan ']' '*' 'then' cmd 'else' cmd
               | '{' cmd '}'
    gtype    ::= scalar ('/\\' | '=>') gtype | gatom [('&' | '(+)') gtype]
    gatom    ::= '1' | VAR | NAME '[' gtype ']' | '(' gtype ')'
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError
from .syntax import (BOOL, END, NAT, PREAL, REAL, UNIT, UREAL, App, ArrowT, BaseType,
                     BinOp, Bnd, BoolLit, BranchRecv, BranchSend, Call, ChoiceC, ChoiceP,
                     Cmd, Cond, DistBer, DistBeta, DistCat, DistGamma, DistGeo, DistNormal,
                     DistPois, DistT, DistUnif, End, Expr, FinNatT, GuideType, Lam, Let,
                     NatLit, OpApp, ProcDecl, Program, RealLit, Ret, SampleC, SampleP,
                     SampleRecv, SampleSend, SourceSpan, TraceGet, TraceT, Triv, TVar,
                     TypeDef, UnOp, Var)

KEYWORDS = {
    "proc", "typedef", "consume", "provide", "return", "call", "sample", "observe",
    "if", "then", "else", "let", "in", "fun", "true", "false", "and", "or", "not",
    "recv", "send", "get", "exp", "log", "sqrt", "real", "max", "min",
    "Ber", "Unif", "Beta", "Gamma", "Normal", "Cat", "Geo", "Pois",
    "unit", "bool", "ureal", "preal", "nat", "dist", "trace",
}
# "real" doubles as a type keyword and the nat-to-real conversion
_SCALAR_KW = {"unit": UNIT, "bool": BOOL, "ureal": UREAL, "preal": PREAL, "real": REAL}
UNARY_FUNS = ("exp", "log", "sqrt", "real")
BINARY_FUNS = ("max", "min")
CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<nat>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<sym>\(\+\)|<-|->|/\\|=>|<=|>=|==|!=|[()\[\]{},;:=<>+\-*/&.])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # 'real' | 'nat' | 'ident' | 'kw' | 'sym' | 'eof'
    text: str
    line: int
    col: int

    @property
    def end_col(self):
        return self.col + len(self.text)


def tokenize(text: str, file: str = "<input>") -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}",
                             SourceSpan(file, line, col, line, col + 1))
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, s, line, col))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    def __init__(self, text: str, file: str):
        self.file = file
        self.toks = tokenize(text, file)
        self.i = 0

    # -- token helpers ----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def span_of(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.file, tok.line, tok.col, tok.line, max(tok.end_col, tok.col))

    def span_from(self, start: Token) -> SourceSpan:
        prev = self.toks[self.i - 1] if self.i > 0 else start
        if (prev.line, prev.end_col) < (start.line, start.col):
            prev = start
        return SourceSpan(self.file, start.line, start.col, prev.line, prev.end_col)

    def error(self, message=None, expected=()):
        tok = self.tok
        if message is None:
            message = f"unexpected {_describe(tok)}"
        raise ParseError(message, self.span_of(tok), expected)

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("kw", "sym") and t.text in texts

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text) -> Token:
        if not self.at(text):
            self.error(expected=[text])
        t = self.tok
        self.i += 1
        return t

    def ident(self, what="identifier") -> str:
        if self.tok.kind != "ident":
            self.error(expected=[what])
        t = self.tok
        self.i += 1
        return t.text

    def chan(self):
        if self.accept("."):
            return None
        return self.ident("channel name")

    # -- programs ---------------------------------------------------------
    def program(self) -> Program:
        procs, typedefs = [], []
        while self.tok.kind != "eof":
            if self.at("proc"):
                procs.append(self.proc())
            elif self.at("typedef"):
                typedefs.append(self.typedef())
            else:
                self.error(expected=["proc", "typedef"])
        return Program(tuple(procs), tuple(typedefs))

    def typedef(self) -> TypeDef:
        self.expect("typedef")
        op = self.ident("operator name")
        self.expect("[")
        param = self.ident("type variable")
        self.expect("]")
        self.expect("=")
        return TypeDef(op, param, self.gtype())

    def proc(self) -> ProcDecl:
        start = self.expect("proc")
        name = self.ident("procedure name")
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pname = self.ident("parameter name")
                self.expect(":")
                params.append((pname, self.type()))
                if not self.accept(","):
                    break
        self.expect(")")
        ret = None
        if self.accept("->"):
            ret = self.type()
        self.expect("consume")
        consume = self.chan()
        self.expect("provide")
        provide = self.chan()
        self.expect("=")
        body = self.cmd()
        return ProcDecl(name, tuple(params), ret, consume, provide, body, self.span_from(start))

    # -- basic types ------------------------------------------------------
    def type(self) -> BaseType:
        t = self.type_atom()
        if self.accept("->"):
            return ArrowT(t, self.type())
        return t

    def type_atom(self) -> BaseType:
        tok = self.tok
        if tok.kind == "kw" and tok.text in _SCALAR_KW:
            self.i += 1
            return _SCALAR_KW[tok.text]
        if self.accept("nat"):
            if self.accept("["):
                nt = self.tok
                if nt.kind != "nat":
                    self.error(expected=["positive integer"])
                self.i += 1
                self.expect("]")
                if int(nt.text) < 1:
                    raise ParseError("nat[n] needs n >= 1", self.span_of(nt))
                return FinNatT(int(nt.text))
            return NAT
        if self.accept("dist"):
            self.expect("[")
            inner_tok = self.tok
            inner = self.type()
            self.expect("]")
            if not inner.is_scalar:
                raise ParseError("distribution carrier must be scalar", self.span_of(inner_tok))
            return DistT(inner)
        if self.accept("trace"):
            if self.accept("["):
                g = self.gtype()
                self.expect("]")
                return TraceT(g)
            return TraceT(None)
        if self.accept("("):
            t = self.type()
            self.expect(")")
            return t
        self.error(expected=["type"])

    def scalar_type(self) -> BaseType:
        tok = self.tok
        t = self.type_atom()
        if not t.is_scalar:
            raise ParseError("guide-type carrier must be scalar", self.span_of(tok))
        return t

    # -- guide types ------------------------------------------------------
    def gtype(self) -> GuideType:
        tok = self.tok
        if tok.kind == "kw" and tok.text in ("unit", "bool", "ureal", "preal", "real", "nat"):
            carrier = self.scalar_type()
            if self.accept("/\\"):
                return SampleP(carrier, self.gtype())
            if self.accept("=>"):
                return SampleC(carrier, self.gtype())
            self.error(expected=["/\\", "=>"])
        left = self.gatom()
        if self.accept("&"):
            return ChoiceC(left, self.gtype())
        if self.accept("(+)"):
            return ChoiceP(left, self.gtype())
        return left

    def gatom(self) -> GuideType:
        tok = self.tok
        if tok.kind == "nat" and tok.text == "1":
            self.i += 1
            return END
        if tok.kind == "ident":
            self.i += 1
            if self.accept("["):
                arg = self.gtype()
                self.expect("]")
                return OpApp(tok.text, arg)
            return TVar(tok.text)
        if self.accept("("):
            g = self.gtype()
            self.expect(")")
            return g
        self.error(expected=["1", "type variable", "operator application", "(", "scalar type"])

    # -- commands ---------------------------------------------------------
    def cmd(self) -> Cmd:
        start = self.tok
        if start.kind == "ident" and self.peek().kind == "sym" and self.peek().text == "<-":
            self.i += 2
            first = self.cmd1()
            self.expect(";")
            rest = self.cmd()
            return Bnd(first, start.text, rest, self.span_from(start))
        first = self.cmd1()
        if self.accept(";"):
            rest = self.cmd()
            return Bnd(first, "_", rest, self.span_from(start))
        return first

    def cmd1(self) -> Cmd:
        start = self.tok
        if self.accept("return"):
            return Ret(self.expr(), self.span_from(start))
        if self.accept("call"):
            name = self.ident("procedure name")
            self.expect("(")
            args = self.args(")")
            return Call(name, args, self.span_from(start))
        if self.accept("sample"):
            self.expect("[")
            if self.accept("recv"):
                ctor = SampleRecv
            elif self.accept("send"):
                ctor = SampleSend
            else:
                self.error(expected=["recv", "send"])
            self.expect("]")
            self.expect("(")
            c = self.ident("channel name")
            self.expect(",")
            e = self.expr()
            self.expect(")")
            return ctor(e, c, self.span_from(start))
        if self.accept("observe"):
            self.expect("(")
            c = self.ident("channel name")
            self.expect(",")
            e = self.expr()
            self.expect(")")
            return SampleSend(e, c, self.span_from(start))
        if self.accept("if"):
            self.expect("[")
            if self.accept("send"):
                sending = True
            elif self.accept("recv"):
                sending = False
            else:
                self.error(expected=["send", "recv"])
            c = self.ident("channel name")
            self.expect("]")
            if sending:
                pred = self.expr()
            else:
                self.expect("*")
            self.expect("then")
            then = self.cmd()
            self.expect("else")
            else_ = self.cmd()
            if sending:
                return BranchSend(pred, then, else_, c, self.span_from(start))
            return BranchRecv(then, else_, c, self.span_from(start))
        if self.accept("{"):
            m = self.cmd()
            self.expect("}")
            return m
        self.error(expected=["return", "call", "sample", "observe", "if", "{", "binder"])

    def args(self, close) -> tuple:
        out = []
        if not self.accept(close):
            while True:
                out.append(self.expr())
                if self.accept(close):
                    break
                self.expect(",")
        return tuple(out)

    # -- expressions ------------------------------------------------------
    def expr(self) -> Expr:
        start = self.tok
        if self.accept("let"):
            name = self.ident()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            body = self.expr()
            return Let(bound, name, body, self.span_from(start))
        if self.accept("if"):
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            b = self.expr()
            return Cond(c, a, b, self.span_from(start))
        if self.accept("fun"):
            self.expect("(")
            name = self.ident("parameter name")
            self.expect(":")
            t = self.type()
            self.expect(")")
            self.expect("->")
            body = self.expr()
            return Lam(name, t, body, self.span_from(start))
        return self.or_expr()

    def _binary_chain(self, sub, ops):
        start = self.tok
        lhs = sub()
        while self.at(*ops):
            op = self.tok.text
            self.i += 1
            rhs = sub()
            lhs = BinOp(op, lhs, rhs, self.span_from(start))
        return lhs

    def or_expr(self):
        return self._binary_chain(self.and_expr, ("or",))

    def and_expr(self):
        return self._binary_chain(self.cmp_expr, ("and",))

    def cmp_expr(self):
        start = self.tok
        lhs = self.add_expr()
        if self.at(*CMP_OPS):
            op = self.tok.text
            self.i += 1
            rhs = self.add_expr()
            return BinOp(op, lhs, rhs, self.span_from(start))
        return lhs

    def add_expr(self):
        return self._binary_chain(self.mul_expr, ("+", "-"))

    def mul_expr(self):
        return self._binary_chain(self.unary_expr, ("*", "/"))

    def unary_expr(self):
        start = self.tok
        if self.accept("-"):
            if self.tok.kind == "real":
                v = float(self.tok.text)
                self.i += 1
                return RealLit(-v, self.span_from(start))
            return UnOp("neg", self.unary_expr(), self.span_from(start))
        if self.accept("not"):
            return UnOp("not", self.unary_expr(), self.span_from(start))
        return self.app_expr()

    def _starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("ident", "real", "nat"):
            return True
        if t.kind == "kw":
            return t.text in ("true", "false", "get", "Ber", "Unif", "Beta", "Gamma", "Normal",
                              "Cat", "Geo", "Pois") + UNARY_FUNS + BINARY_FUNS
        return t.kind == "sym" and t.text == "("

    def app_expr(self):
        start = self.tok
        fn = self.atom()
        while self._starts_atom():
            fn = App(fn, self.atom(), self.span_from(start))
        return fn

    def atom(self) -> Expr:
        start = tok = self.tok
        if tok.kind == "ident":
            self.i += 1
            return Var(tok.text, self.span_of(tok))
        if tok.kind == "real":
            self.i += 1
            return RealLit(float(tok.text), self.span_of(tok))
        if tok.kind == "nat":
            self.i += 1
            return NatLit(int(tok.text), self.span_of(tok))
        if self.accept("true"):
            return BoolLit(True, self.span_of(tok))
        if self.accept("false"):
            return BoolLit(False, self.span_of(tok))
        if self.accept("("):
            if self.accept(")"):
                return Triv(self.span_from(start))
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("Unif"):
            return DistUnif(self.span_of(tok))
        for kw, ctor, arity in (("Ber", DistBer, 1), ("Geo", DistGeo, 1), ("Pois", DistPois, 1),
                                ("Beta", DistBeta, 2), ("Gamma", DistGamma, 2),
                                ("Normal", DistNormal, 2)):
            if self.accept(kw):
                self.expect("(")
                args = self.args(")")
                if len(args) != arity:
                    raise ParseError(f"{kw} takes {arity} argument(s), got {len(args)}",
                                     self.span_from(start))
                return ctor(*args, span=self.span_from(start))
        if self.accept("Cat"):
            self.expect("(")
            args = self.args(")")
            if not args:
                raise ParseError("Cat needs at least one weight", self.span_from(start))
            return DistCat(args, self.span_from(start))
        if self.accept("get"):
            self.expect("[")
            t = self.type()
            self.expect("]")
            self.expect("(")
            tr = self.expr()
            self.expect(",")
            ix = self.expr()
            self.expect(")")
            if not t.is_scalar:
                raise ParseError("get[...] annotation must be a scalar type", self.span_from(start))
            return TraceGet(t, tr, ix, self.span_from(start))
        for fn in UNARY_FUNS:
            if self.accept(fn):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return UnOp(fn, arg, self.span_from(start))
        for fn in BINARY_FUNS:
            if self.accept(fn):
                self.expect("(")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return BinOp(fn, a, b, self.span_from(start))
        self.error(expected=["expression"])


def parse_program(text: str, file: str = "<input>") -> Program:
    p = _Parser(text, file)
    return p.program()


def parse_guide_type(text: str, file: str = "<input>") -> GuideType:
    p = _Parser(text, file)
    g = p.gtype()
    if p.tok.kind != "eof":
        p.error(expected=["end of input"])
    return g


def parse_expr(text: str, file: str = "<input>") -> Expr:
    p = _Parser(text, file)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(expected=["end of input"])
    return e


def parse_cmd(text: str, file: str = "<input>") -> Cmd:
    p = _Parser(text, file)
    m = p.cmd()
    if p.tok.kind != "eof":
        p.error(expected=["end of input"])
    return m


def parse_type(text: str, file: str = "<input>") -> BaseType:
    p = _Parser(text, file)
    t = p.type()
    if p.tok.kind != "eof":
        p.error(expected=["end of input"])
    return t


# ---------------------------------------------------------------------------
# Pretty-printing
# ---------------------------------------------------------------------------

def format_type(t: BaseType) -> str:
    return str(t)


def _gatom(g: GuideType) -> str:
    s = format_guide_type(g)
    if isinstance(g, (SampleP, SampleC, ChoiceP, ChoiceC)):
        return f"({s})"
    return s


def format_guide_type(g: GuideType) -> str:
    if isinstance(g, End):
        return "1"
    if isinstance(g, TVar):
        return g.name
    if isinstance(g, OpApp):
        return f"{g.op}[{format_guide_type(g.arg)}]"
    if isinstance(g, (SampleP, SampleC)):
        sym = "/\\" if isinstance(g, SampleP) else "=>"
        cont = g.cont
        rhs = _gatom(cont) if isinstance(cont, (ChoiceP, ChoiceC)) else format_guide_type(cont)
        return f"{g.carrier} {sym} {rhs}"
    if isinstance(g, (ChoiceP, ChoiceC)):
        sym = "&" if isinstance(g, ChoiceC) else "(+)"
        return f"{_gatom(g.left)} {sym} {_gatom(g.right)}"
    raise TypeError(f"not a guide type: {g!r}")


def _fmt_real(r: float) -> str:
    s = repr(float(r))
    if "inf" in s or "nan" in s:
        raise ValueError(f"cannot print non-finite literal {r}")
    return f"({s})" if r < 0 or s.startswith("-") else s


def format_expr(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Triv):
        return "()"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, RealLit):
        return _fmt_real(e.value)
    if isinstance(e, NatLit):
        return str(e.value)
    if isinstance(e, Cond):
        return f"(if {format_expr(e.cond)} then {format_expr(e.then)} else {format_expr(e.else_)})"
    if isinstance(e, BinOp):
        if e.op in BINARY_FUNS:
            return f"{e.op}({format_expr(e.lhs)}, {format_expr(e.rhs)})"
        return f"({format_expr(e.lhs)} {e.op} {format_expr(e.rhs)})"
    if isinstance(e, UnOp):
        if e.op == "neg":
            # keep negation distinct from a negative literal
            if isinstance(e.arg, RealLit):
                return f"(-({format_expr(e.arg)}))"
            return f"(-{format_expr(e.arg)})"
        if e.op == "not":
            return f"(not {format_expr(e.arg)})"
        return f"{e.op}({format_expr(e.arg)})"
    if isinstance(e, Lam):
        return f"(fun ({e.param}: {e.param_type}) -> {format_expr(e.body)})"
    if isinstance(e, App):
        return f"({format_expr(e.fn)} {format_expr(e.arg)})"
    if isinstance(e, Let):
        return f"(let {e.name} = {format_expr(e.bound)} in {format_expr(e.body)})"
    if isinstance(e, DistBer):
        return f"Ber({format_expr(e.p)})"
    if isinstance(e, DistUnif):
        return "Unif"
    if isinstance(e, DistBeta):
        return f"Beta({format_expr(e.a)}, {format_expr(e.b)})"
    if isinstance(e, DistGamma):
        return f"Gamma({format_expr(e.shape)}, {format_expr(e.rate)})"
    if isinstance(e, DistNormal):
        return f"Normal({format_expr(e.mean)}, {format_expr(e.stddev)})"
    if isinstance(e, DistCat):
        return "Cat(" + ", ".join(format_expr(w) for w in e.weights) + ")"
    if isinstance(e, DistGeo):
        return f"Geo({format_expr(e.p)})"
    if isinstance(e, DistPois):
        return f"Pois({format_expr(e.rate)})"
    if isinstance(e, TraceGet):
        return f"get[{e.annot}]({format_expr(e.trace)}, {format_expr(e.index)})"
    raise TypeError(f"not an expression: {e!r}")


def _indent(s: str, by: str) -> str:
    return "\n".join(by + line if line else line for line in s.split("\n"))


def format_cmd(m: Cmd) -> str:
    if isinstance(m, Ret):
        return f"return {format_expr(m.expr)}"
    if isinstance(m, Call):
        return f"call {m.proc}(" + ", ".join(format_expr(a) for a in m.args) + ")"
    if isinstance(m, SampleRecv):
        return f"sample[recv]({m.chan}, {format_expr(m.dist)})"
    if isinstance(m, SampleSend):
        return f"sample[send]({m.chan}, {format_expr(m.dist)})"
    if isinstance(m, Bnd):
        first = format_cmd(m.first)
        if isinstance(m.first, (Bnd, BranchSend, BranchRecv)):
            first = "{\n" + _indent(first, "  ") + "\n}"
        head = first if m.binder == "_" else f"{m.binder} <- {first}"
        return f"{head};\n{format_cmd(m.rest)}"
    if isinstance(m, (BranchSend, BranchRecv)):
        if isinstance(m, BranchSend):
            head = f"if[send {m.chan}] {format_expr(m.pred)}"
        else:
            head = f"if[recv {m.chan}] *"
        return (f"{head} then {{\n{_indent(format_cmd(m.then), '  ')}\n}} "
                f"else {{\n{_indent(format_cmd(m.else_), '  ')}\n}}")
    raise TypeError(f"not a command: {m!r}")


def format_proc(d: ProcDecl) -> str:
    params = ", ".join(f"{n}: {t}" for n, t in d.params)
    ret = f" -> {d.ret_type}" if d.ret_type is not None else ""
    head = (f"proc {d.name}({params}){ret} consume {d.consume or '.'} "
            f"provide {d.provide or '.'} =")
    return head + "\n" + _indent(format_cmd(d.body), "  ")


def format_program(p: Program) -> str:
    parts = [f"typedef {td.op}[{td.param}] = {format_guide_type(td.body)}" for td in p.typedefs]
    parts += [format_proc(d) for d in p.procs]
    return "\n\n".join(parts) + ("\n" if parts else "")
