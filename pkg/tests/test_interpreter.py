import math

import numpy as np
import pytest
from scipy import stats

from gpp.distributions import Ber, Normal
from gpp.errors import (ObservationExhausted, ObservationMismatch, RuntimeFault, StepLimitExceeded,
                        Stuck, TraceGetOutOfBounds, TraceGetTypeMismatch, TraceMismatch,
                        UnboundVariable)
from gpp.interpreter import (IMPOSSIBLE, eval_cmd, eval_expr, eval_proc, joint_execute,
                             model_log_density, reduce_cmd, reduce_proc)
from gpp.parser import parse_cmd, parse_expr, parse_program
from gpp.syntax import CBranch, FOLD, PBranch, Program, PSample, Trace


def T(*msgs):
    return Trace(tuple(msgs))


EMPTY = Program(())
M1 = parse_cmd("x <- sample[recv](a, Normal(0.0, 1.0)); y <- sample[send](b, Normal(x, 1.0)); return x + y")
M2 = parse_cmd("sample[send](a, Normal(3.0, 1.0)); return ()")


class TestExpressions:
    def test_examples(self):
        assert eval_expr({}, parse_expr("if true then 1.0 else 2.0")) == 1.0
        assert eval_expr({"x": 0.5}, parse_expr("Ber(x)")) == Ber(0.5)
        assert eval_expr({}, parse_expr("(fun (x: real) -> x + x) 2.0")) == 4.0

    def test_cond_evaluates_taken_arm_only(self):
        assert eval_expr({}, parse_expr("if false then log(-1.0) else 2.0")) == 2.0

    def test_closure_captures_environment(self):
        f = eval_expr({"k": 3.0}, parse_expr("fun (x: real) -> x * k"))
        assert eval_expr({"f": f, "k": 100.0}, parse_expr("f 2.0")) == 6.0

    def test_mixed_arithmetic(self):
        assert eval_expr({"n": 2}, parse_expr("real(n) + 0.5")) == 2.5
        assert eval_expr({}, parse_expr("2 + 3")) == 5

    def test_errors(self):
        with pytest.raises(UnboundVariable):
            eval_expr({}, parse_expr("y"))
        with pytest.raises(RuntimeFault):
            eval_expr({"x": 1.2}, parse_expr("Ber(x)"))
        with pytest.raises(RuntimeFault):
            eval_expr({"x": -1.0}, parse_expr("log(x)"))

    def test_trace_get(self):
        t = T(PSample(True), FOLD, CBranch(False), PSample(0.25))
        V = {"t": t}
        assert eval_expr(V, parse_expr("get[bool](t, 0)")) is True
        assert eval_expr(V, parse_expr("get[ureal](t, 3)")) == 0.25
        with pytest.raises(TraceGetOutOfBounds):
            eval_expr(V, parse_expr("get[bool](t, 4)"))
        with pytest.raises(TraceGetTypeMismatch):
            eval_expr(V, parse_expr("get[real](t, 0)"))
        with pytest.raises(TraceGetTypeMismatch):
            eval_expr(V, parse_expr("get[bool](t, 1)"))


class TestEvalCmd:
    def test_two_channel_example(self):
        w, v = eval_cmd(EMPTY, {}, T(PSample(1.0)), T(PSample(2.0)), M1, "a", "b")
        assert w == pytest.approx(2 * stats.norm.logpdf(1.0), abs=1e-12)
        assert w == pytest.approx(-2.8378771, abs=1e-7)
        assert v == 3.0

    def test_provider_only_example(self):
        w, v = eval_cmd(EMPTY, {}, T(), T(PSample(1.0)), M2, None, "a")
        assert w == pytest.approx(stats.norm.logpdf(-2.0), abs=1e-12)
        assert v == ()

    def test_return(self):
        assert eval_cmd(EMPTY, {}, T(), T(), parse_cmd("return ()")) == (0.0, ())

    @pytest.mark.parametrize("sa,sb", [
        (T(FOLD), T(PSample(2.0))),                         # wrong kind
        (T(PSample(1.0)), T()),                             # exhausted
        (T(PSample(1.0)), T(PSample(2.0), PSample(0.1))),   # leftovers
        (T(PSample(1)), T(PSample(2.0))),                   # outside support
        (T(CBranch(True)), T(PSample(2.0))),
    ])
    def test_mismatches(self, sa, sb):
        with pytest.raises(TraceMismatch):
            eval_cmd(EMPTY, {}, sa, sb, M1, "a", "b")

    def test_branch_indicator(self, toy):
        ok = model_log_density(toy, "Model", T(PSample(-0.5)), T(PSample(1.0), CBranch(True)))
        want = stats.gamma(2).logpdf(1.0) + stats.norm(-1, 1).logpdf(-0.5)
        assert ok == pytest.approx(want, abs=1e-12)
        w, _ = eval_proc(toy, "Model", (), T(PSample(1.0), CBranch(False), PSample(0.5)), T(PSample(-0.5)))
        assert w == IMPOSSIBLE

    def test_model_log_density_is_total(self, toy):
        so = T(PSample(-0.5))
        assert model_log_density(toy, "Model", so, T(PSample(-1.0), CBranch(True))) == IMPOSSIBLE
        assert model_log_density(toy, "Model", so, T(PSample(1.0), CBranch(False), PSample(0.5))) == IMPOSSIBLE
        assert model_log_density(toy, "Model", so, T(PSample(1.0))) == IMPOSSIBLE

    def test_call_consumes_fold(self, corpus):
        p = corpus["marsaglia"]
        assert "Polar" in p.proc_table
        with pytest.raises(TraceMismatch):
            eval_proc(p, "Marsaglia", (), T(PSample(0.5)), T(PSample(0.0)))

    def test_step_limit(self):
        p = parse_program("proc Loop() -> unit consume . provide . = call Loop()")
        with pytest.raises(StepLimitExceeded):
            eval_proc(p, "Loop", (), step_limit=10_000)

    def test_deep_recursion_is_trampolined(self):
        src = """proc Count(n: nat) -> nat consume a provide . =
          b <- sample[recv](a, Ber(0.5));
          if[send a] b then return n else call Count(n + 1)"""
        p = parse_program(src)
        depth = 5000
        msgs = []
        for i in range(depth):
            msgs += [PSample(False), CBranch(False), FOLD]
        msgs += [PSample(True), CBranch(True)]
        w, v = eval_proc(p, "Count", (0,), Trace(tuple(msgs)))
        assert v == depth
        assert w == pytest.approx((depth + 1) * math.log(0.5))


class TestReduce:
    def test_agrees_with_eval(self):
        assert reduce_cmd(EMPTY, {}, T(PSample(1.0)), T(PSample(2.0)), M1, "a", "b") == 3.0

    def test_return_with_leftover_is_stuck(self):
        with pytest.raises(Stuck):
            reduce_cmd(EMPTY, {}, T(PSample(1.0)), T(), parse_cmd("return ()"), "a")

    def test_flipped_selection_is_stuck(self, toy):
        sa = T(PSample(1.0), CBranch(False), PSample(0.5))
        with pytest.raises(Stuck) as ei:
            reduce_proc(toy, "Model", (), sa, T(PSample(-0.5)))
        assert ei.value.rule.startswith("RM:Cond:Send")
        assert eval_proc(toy, "Model", (), sa, T(PSample(-0.5)))[0] == IMPOSSIBLE


class TestJoint:
    def test_toy_shapes(self, toy, obs08):
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(300):
            rec = joint_execute(toy, "Guide1", "Model", so=obs08, rng=rng)
            s = rec.latent.messages
            x = s[0].value
            assert isinstance(s[0], PSample) and x > 0
            assert isinstance(s[1], CBranch) and s[1].value == (x < 2)
            if x < 2:
                assert len(s) == 2
            else:
                assert len(s) == 3 and 0 < s[2].value < 1
            assert math.isfinite(rec.guide_log_weight) and math.isfinite(rec.model_log_weight)
            seen.add(len(s))
        assert seen == {2, 3}

    def test_replay(self, corpus):
        p = corpus["pcfg"]
        rng = np.random.default_rng(5)
        for _ in range(200):
            rec = joint_execute(p, "PcfgGuide", "Pcfg", rng=rng)
            wm, vm = eval_proc(p, "Pcfg", (), rec.latent, rec.obs)
            wg, _ = eval_proc(p, "PcfgGuide", (), sb=rec.latent)
            assert wm == pytest.approx(rec.model_log_weight, abs=1e-12)
            assert wg == pytest.approx(rec.guide_log_weight, abs=1e-12)
            assert vm == rec.model_result

    def test_deterministic(self, toy, obs08):
        a = joint_execute(toy, "Guide1", "Model", so=obs08, rng=np.random.default_rng(3))
        b = joint_execute(toy, "Guide1", "Model", so=obs08, rng=np.random.default_rng(3))
        assert a == b

    def test_trivial_guide(self):
        p = parse_program("""
          proc G() consume . provide l = return ()
          proc M() consume l provide o = observe(o, Normal(0.0, 1.0)); return ()""")
        rec = joint_execute(p, "G", "M", so=T(PSample(0.0)), rng=np.random.default_rng(0))
        assert rec.latent == T() and rec.guide_log_weight == 0.0
        assert rec.model_log_weight == pytest.approx(Normal(0.0, 1.0).log_density(0.0))

    def test_observation_errors(self, toy):
        rng = np.random.default_rng(0)
        with pytest.raises(ObservationExhausted):
            joint_execute(toy, "Guide1", "Model", so=T(), rng=rng)
        with pytest.raises(ObservationMismatch):
            joint_execute(toy, "Guide1", "Model", so=T(PBranch(True)), rng=rng)
        with pytest.raises(ObservationMismatch):
            joint_execute(toy, "Guide1", "Model", so=T(PSample(1)), rng=rng)
