import gpp.interpreter as interp

from property_checks import PAIRS, Pair, run_all, run_pair, Tally


def test_small_run_is_clean():
    tally = run_all(15)
    assert tally.runs == 15 * len(PAIRS)
    assert tally.violations == []


def test_detects_reducer_ignoring_support(monkeypatch):
    """A reducer that accepts out-of-support samples must be caught."""
    original = interp._Reducer.run

    def sloppy(self, m, V, roles):
        if isinstance(m, (interp.SampleRecv, interp.SampleSend)):
            role = roles[m.chan]
            kind = interp.message_class(role, isinstance(m, interp.SampleSend), False)
            return self.take(role, kind, "sloppy").value
        return original(self, m, V, roles)

    monkeypatch.setattr(interp._Reducer, "run", sloppy)
    tally = run_pair(Pair("toy", "Model", "Guide1"), 40, 1, Tally())
    assert any(v.startswith("EvalReduce") for v in tally.violations)


def test_detects_wrong_guide_weight(monkeypatch):
    """Joint weights that disagree with replay must be caught."""
    original = interp.joint_execute

    def skewed(*args, **kw):
        rec = original(*args, **kw)
        return interp.ExecutionRecord(rec.latent, rec.obs, rec.guide_log_weight + 1e-6,
                                      rec.model_log_weight, rec.guide_result, rec.model_result)

    import property_checks
    monkeypatch.setattr(property_checks, "joint_execute", skewed)
    tally = run_pair(Pair("coin", "Coin", "CoinPrior"), 5, 1, Tally())
    assert sum(v.startswith("Replay") for v in tally.violations) == 5
