import pytest

import gpp
from gpp.errors import ChannelMismatch, TypeCheckError
from gpp.parser import format_guide_type, parse_expr, parse_guide_type, parse_program
from gpp.syntax import (BOOL, END, NAT, PREAL, REAL, UNIT, UREAL, ArrowT, CBranch, DistT,
                        FinNatT, FOLD, OpApp, PSample, Trace, TypeDef, TVar)
from gpp.typecheck import (check_model_guide, check_program, check_trace, check_value,
                           guide_type_equal, guide_type_equiv, infer_program_types, is_amp_free,
                           is_oplus_free, join, literal_type, subtype, type_of_expr)


def g(text):
    return parse_guide_type(text)


def fmt_proto(types, proc, chan):
    return format_guide_type(types.protocol(proc, chan))


class TestSubtyping:
    def test_real_chain(self):
        assert subtype(UREAL, PREAL) and subtype(PREAL, REAL) and subtype(UREAL, REAL)
        assert not subtype(REAL, PREAL)

    def test_naturals(self):
        assert subtype(FinNatT(3), NAT)
        assert subtype(FinNatT(2), FinNatT(3))
        assert not subtype(NAT, FinNatT(3))
        assert not subtype(NAT, REAL)

    def test_arrow_variance(self):
        assert subtype(ArrowT(REAL, UREAL), ArrowT(PREAL, REAL))
        assert not subtype(ArrowT(UREAL, REAL), ArrowT(REAL, REAL))

    def test_join(self):
        assert join(UREAL, PREAL) == PREAL
        assert join(FinNatT(2), FinNatT(5)) == FinNatT(5)
        assert join(BOOL, REAL) is None


class TestExpressions:
    @pytest.mark.parametrize("src,ty", [
        ("0.5", UREAL), ("2.0", PREAL), ("-1.0", REAL), ("0.0", REAL), ("3", FinNatT(4)),
        ("true", BOOL), ("()", UNIT),
        ("1.0 + 2.0", PREAL), ("0.5 * 0.5", UREAL), ("1.0 - 2.0", REAL),
        ("exp(-3.0)", PREAL), ("log(2.0)", REAL), ("real(3)", REAL), ("1.0 < 2.0", BOOL),
        ("Normal(0.0, 1.0)", DistT(REAL)), ("Gamma(2.0, 1.0)", DistT(PREAL)),
        ("Cat(1.0, 2.0, 3.0)", DistT(FinNatT(3))), ("Ber(0.5)", DistT(BOOL)),
        ("if true then 0.5 else 2.0", PREAL),
        ("fun (x: real) -> x", ArrowT(REAL, REAL)),
        ("(fun (x: real) -> x) 0.5", REAL),
        ("let x = 2.0 in x * x", PREAL),
    ])
    def test_types(self, src, ty):
        assert type_of_expr({}, parse_expr(src)) == ty

    def test_literal_type(self):
        assert literal_type(0.25) == UREAL and literal_type(1.0) == PREAL and literal_type(-2.0) == REAL

    @pytest.mark.parametrize("src", [
        "Normal(0.0, -1.0)", "Gamma(-1.0, 1.0)", "Ber(2.0)", "log(-1.0)", "true + 1.0",
        "if 1.0 then 1.0 else 2.0", "y", "(fun (x: preal) -> x) (-1.0)", "Beta(1.0, x)",
    ])
    def test_rejected(self, src):
        with pytest.raises(TypeCheckError):
            type_of_expr({"x": REAL}, parse_expr(src))

    def test_environment(self):
        assert type_of_expr({"x": PREAL}, parse_expr("Gamma(x, x)")) == DistT(PREAL)


class TestValues:
    def test_check_value(self):
        assert check_value(0.5, UREAL) and check_value(0.5, REAL)
        assert not check_value(1.5, UREAL)
        assert check_value(2, FinNatT(3)) and not check_value(3, FinNatT(3))
        assert not check_value(1, REAL) and not check_value(1.0, NAT)
        assert check_value((), UNIT) and check_value(True, BOOL) and not check_value(1, BOOL)


class TestTraceTyping:
    DEFS = {"T": TypeDef("T", "X", g("real /\\ X"))}

    def test_examples(self):
        A = g("preal /\\ (1 & (ureal /\\ 1))")
        assert check_trace(Trace((PSample(2.5), CBranch(True))), A, {})
        assert check_trace(Trace((PSample(2.5), CBranch(False), PSample(0.3))), A, {})
        assert not check_trace(Trace((PSample(2.5), CBranch(False))), A, {})
        assert not check_trace(Trace((PSample(-2.5), CBranch(True))), A, {})
        assert not check_trace(Trace((PSample(2.5), CBranch(True), PSample(0.1))), A, {})

    def test_fold_required_at_operator(self):
        A = OpApp("T", END)
        assert check_trace(Trace((FOLD, PSample(-1.0))), A, self.DEFS)
        assert not check_trace(Trace((PSample(-1.0),)), A, self.DEFS)

    def test_open_type_rejected(self):
        with pytest.raises(TypeCheckError):
            check_trace(Trace(), TVar("X"), {})


MINI = """
proc M3(f: ureal -> unit) consume a provide . =
  x <- sample[recv](a, Normal(0.0, 1.0));
  y <- return f;
  call Helper()

proc Helper() consume a provide . =
  return ()
"""


class TestInference:
    def test_call_and_sample_pre_type(self):
        types = infer_program_types(parse_program(MINI))
        assert format_guide_type(types.typedefs["M3.a"].body) == "real /\\ Helper.a[X]"
        assert types.typedefs["Helper.a"].body == TVar("X")
        assert fmt_proto(types, "M3", "a") == "real /\\ Helper.a[1]"

    def test_toy(self, toy):
        types = infer_program_types(toy)
        assert format_guide_type(types.typedefs["Model.latent"].body) == "preal /\\ (X & (ureal /\\ X))"
        assert format_guide_type(types.typedefs["Model.obs"].body) == "real /\\ Y"
        assert format_guide_type(types.typedefs["Guide1.latent"].body) == "preal /\\ (Y & (ureal /\\ Y))"
        assert types.signatures["Model"].ret_type == PREAL

    def test_recursive_procedures(self, corpus):
        types = infer_program_types(corpus["pcfg"])
        assert format_guide_type(types.typedefs["PcfgGen.latent"].body) == (
            "ureal /\\ ((real /\\ X) & PcfgGen.latent[PcfgGen.latent[X]])")
        types = infer_program_types(corpus["ptrace"])
        assert format_guide_type(types.typedefs["PtraceHelper.latent"].body) == (
            "ureal /\\ (X & PtraceHelper.latent[X])")

    def test_deterministic(self, corpus):
        for p in corpus.values():
            assert infer_program_types(p) == infer_program_types(p)

    def test_every_corpus_program_checks(self, corpus):
        for name, p in corpus.items():
            assert check_program(p) == [], name

    def test_recursion_needs_annotation(self):
        p = parse_program("proc R() consume a provide . = x <- sample[recv](a, Unif); call R()")
        with pytest.raises(TypeCheckError, match="annotation"):
            infer_program_types(p)

    def test_dual_forms_rejected(self):
        for body in ("sample[send](a, Unif)", "if[recv a] * then return () else return ()"):
            with pytest.raises(TypeCheckError, match="does not synthesize"):
                infer_program_types(parse_program(f"proc P() consume a provide . = {body}"))

    def test_arms_disagree_on_other_channel(self):
        src = """proc P() consume a provide b =
          if[send a] true then { sample[send](b, Unif); return () } else return ()"""
        with pytest.raises(TypeCheckError, match="disagree"):
            infer_program_types(parse_program(src))

    def test_bad_expression_located(self):
        with pytest.raises(TypeCheckError) as ei:
            infer_program_types(parse_program("proc P() consume a provide . = sample[recv](a, Normal(0.0, -1.0))"))
        assert ei.value.where == "P"


class TestGuideTypeRelations:
    def test_nominal_equality(self):
        assert not guide_type_equal(OpApp("T", END), OpApp("U", END))
        assert guide_type_equal(g("real /\\ 1"), g("real /\\ 1"))

    def test_equivalence_up_to_renaming(self):
        defs = {"T": TypeDef("T", "X", g("real /\\ (X & T[X])")),
                "U": TypeDef("U", "Y", g("real /\\ (Y & U[Y])")),
                "V": TypeDef("V", "Z", g("preal /\\ (Z & V[Z])"))}
        assert guide_type_equiv(OpApp("T", END), OpApp("U", END), defs)
        assert not guide_type_equiv(OpApp("T", END), OpApp("V", END), defs)

    def test_freeness(self):
        defs = {"T": TypeDef("T", "X", g("real /\\ (X (+) X)"))}
        assert not is_oplus_free(OpApp("T", END), defs)
        assert is_amp_free(OpApp("T", END), defs)
        assert is_oplus_free(g("real /\\ (1 & 1)"), {})
        assert not is_amp_free(g("real /\\ (1 & 1)"), {})


class TestCompat:
    def test_toy_accepts(self, toy):
        for guide in ("Guide1", "Guide2", "PriorGuide"):
            rep = check_model_guide(toy, "Model", guide)
            assert rep.accepted and rep.reasons == ()
            assert rep.to_json()["verdict"] == "accept"

    @pytest.mark.parametrize("guide,carrier", [("GuidePois", "nat"), ("GuideNormal", "real")])
    def test_unsound_rejected(self, corpus, guide, carrier):
        rep = check_model_guide(corpus["toy_unsound"], "Model", guide)
        assert not rep.accepted
        assert any("preal" in r and carrier in r for r in rep.reasons), rep.reasons

    def test_recursive_pairs_accepted(self, corpus):
        assert check_model_guide(corpus["pcfg"], "Pcfg", "PcfgGuide").accepted
        assert check_model_guide(corpus["ptrace"], "Ptrace", "PtraceGuide").accepted

    def test_channel_mismatch(self, toy):
        with pytest.raises(ChannelMismatch):
            check_model_guide(toy, "Guide1", "Model")
