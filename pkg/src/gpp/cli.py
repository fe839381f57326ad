"""Command-line driver: ``gpp check | compat | score | run``.

Exit codes: 0 success, 1 diagnostics (type errors, rejected pairs, bad
traces, engine failures), 2 usage errors.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import inference as inf
from .errors import GppError
from .interpreter import model_log_density
from .io import load_trace, trace_to_json
from .parser import format_guide_type, parse_program
from .syntax import EMPTY_TRACE
from .typecheck import check_model_guide, infer_program_types

EXIT_OK, EXIT_DIAG, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    source: str
    model: str
    guide: str
    obs: Optional[str]
    engine: str
    n: int = 1000
    steps: int = 1000
    burnin: int = 0
    iters: int = 100
    n_per_iter: int = 50
    step_size: float = 0.01
    seed: int = 0
    out: Optional[str] = None
    init: Optional[str] = None
    params: list = field(default_factory=list)
    model_args: tuple = ()

    def validate(self):
        if self.engine not in ("is", "mh", "vi"):
            raise UsageError(f"unknown engine {self.engine!r}")
        if self.engine == "mh" and self.init is None:
            raise UsageError("--engine mh needs --init (initial latent trace)")
        if self.engine == "vi" and not self.params:
            raise UsageError("--engine vi needs at least one --param name:transform:init")
        for k in ("n", "steps", "burnin", "iters", "n_per_iter"):
            if getattr(self, k) < 0:
                raise UsageError(f"--{k.replace('_', '-')} must be non-negative")
        if self.engine == "is" and self.n < 1:
            raise UsageError("--n must be at least 1")


def _load(path):
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read(), path)


def _scalar_arg(text: str):
    try:
        v = json.loads(text)
    except json.JSONDecodeError:
        raise UsageError(f"cannot parse argument value {text!r}") from None
    if not isinstance(v, (bool, int, float)):
        raise UsageError(f"argument {text!r} is not a scalar")
    return v


def _param(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--param expects name:transform:init, got {text!r}")
    name, tag, init = parts
    if tag not in inf.TRANSFORMS:
        raise UsageError(f"unknown transform {tag!r}")
    try:
        return name, tag, float(init)
    except ValueError:
        raise UsageError(f"bad initial value in {text!r}") from None


def _seed(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("GPP_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"GPP_SEED must be an integer, got {env!r}") from None


def _emit(obj, as_json: bool, text: str, out):
    out = out or sys.stdout
    print(json.dumps(obj, sort_keys=True) if as_json else text, file=out)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_check(path: str, as_json=False, out=None) -> int:
    p = _load(path)
    types = infer_program_types(p)
    report = {"procedures": {}, "typedefs": {}}
    lines = []
    for d in p.procs:
        sig = types.signatures[d.name]
        entry = {
            "params": [[n, str(t)] for n, t in d.params],
            "returns": str(sig.ret_type),
            "channels": {},
        }
        args = ", ".join(str(t) for t in sig.arg_types)
        lines.append(f"proc {d.name} : ({args}) -> {sig.ret_type}")
        for role, slot in (("consume", sig.consume), ("provide", sig.provide)):
            if slot:
                proto = format_guide_type(types.protocol(d.name, slot[0]))
                entry["channels"][slot[0]] = {"role": role, "operator": slot[1], "protocol": proto}
                lines.append(f"  {role} {slot[0]} : {proto}")
        report["procedures"][d.name] = entry
    for op, td in types.typedefs.items():
        body = format_guide_type(td.body)
        report["typedefs"][op] = {"param": td.param, "body": body}
        lines.append(f"typedef {op}[{td.param}] = {body}")
    _emit(report, as_json, "\n".join(lines), out)
    return EXIT_OK


def cmd_compat(path: str, model: str, guide: str, as_json=False, out=None) -> int:
    p = _load(path)
    rep = check_model_guide(p, model, guide)
    text = "\n".join([
        f"channel     {rep.channel}",
        f"latent (A)  {format_guide_type(rep.latent_type)}",
        f"model A     {format_guide_type(rep.model_latent_type)}",
        f"obs (B)     {format_guide_type(rep.obs_type)}",
        f"oplus-free  {rep.oplus_free}",
        f"amp-free    {rep.amp_free}",
        f"verdict     {rep.verdict}",
    ] + [f"reason      {r}" for r in rep.reasons])
    _emit(rep.to_json(), as_json, text, out)
    return EXIT_OK if rep.accepted else EXIT_DIAG


def cmd_score(path: str, model: str, latent: str, obs: Optional[str], model_args=(),
              out=None) -> int:
    p = _load(path)
    infer_program_types(p)
    sl = load_trace(latent)
    so = load_trace(obs) if obs else EMPTY_TRACE
    w = model_log_density(p, model, so, sl, model_args)
    print("-inf" if w == -math.inf else repr(w), file=out or sys.stdout)
    return EXIT_OK


def cmd_run(cfg: RunConfig, out=None) -> int:
    cfg.validate()
    p = _load(cfg.source)
    types = infer_program_types(p)
    so = load_trace(cfg.obs) if cfg.obs else EMPTY_TRACE
    rep = check_model_guide(p, cfg.model, cfg.guide, types)
    if not rep.accepted:
        print("model/guide pair rejected:", file=sys.stderr)
        for r in rep.reasons:
            print(f"  {r}", file=sys.stderr)
        return EXIT_DIAG

    records = []
    if cfg.engine == "is":
        ps = inf.importance_sample(p, cfg.guide, cfg.model, so, cfg.n, cfg.seed,
                                   model_args=cfg.model_args)
        for q in ps.particles:
            records.append({"trace": trace_to_json(q.latent), "log_weight": q.log_importance,
                            "guide_log_weight": q.guide_log_weight,
                            "model_log_weight": q.model_log_weight})
        summary = {"engine": "is", "n": len(ps), "ess": ps.ess(), "log_evidence": ps.log_evidence()}
    elif cfg.engine == "mh":
        init = load_trace(cfg.init)
        chain = inf.mh_chain(p, cfg.guide, cfg.model, so, init, cfg.steps, cfg.burnin, cfg.seed,
                             model_args=cfg.model_args)
        for s in chain:
            records.append({"step": s.step, "trace": trace_to_json(s.trace),
                            "log_weight": s.model_log_weight, "accepted": s.accepted})
        last = chain[-1]
        summary = {"engine": "mh", "steps": last.step,
                   "acceptance_rate": last.acceptance_rate if last.step else None,
                   "backward_impossible": last.backward_impossible}
    else:
        theta0 = inf.ViParams.from_constrained(cfg.params)

        def log(rec):
            records.append({"iteration": rec.iteration, "elbo": rec.elbo, "params": rec.params})

        theta = inf.vi_optimize(p, cfg.guide, theta0, cfg.model, so, cfg.iters, cfg.n_per_iter,
                                cfg.step_size, cfg.seed, model_args=cfg.model_args, callback=log)
        summary = {"engine": "vi", "iters": cfg.iters, "params": theta.values(),
                   "final_elbo": records[-1]["elbo"] if records else None}
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True), file=out or sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpp", description="Check and run coroutine probabilistic programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse, validate and infer guide types")
    c.add_argument("source")
    c.add_argument("--json", action="store_true")

    c = sub.add_parser("compat", help="check that a guide matches a model")
    c.add_argument("source")
    c.add_argument("--model", required=True)
    c.add_argument("--guide", required=True)
    c.add_argument("--json", action="store_true")

    c = sub.add_parser("score", help="log-density of a latent/observation trace pair")
    c.add_argument("source")
    c.add_argument("--model", required=True)
    c.add_argument("--latent", required=True)
    c.add_argument("--obs")
    c.add_argument("--model-arg", action="append", default=[])

    c = sub.add_parser("run", help="run IS, MH or VI")
    c.add_argument("source")
    c.add_argument("--model", required=True)
    c.add_argument("--guide", required=True, help="guide (IS, VI) or proposal (MH) procedure")
    c.add_argument("--obs")
    c.add_argument("--engine", required=True, choices=("is", "mh", "vi"))
    c.add_argument("--n", type=int, default=1000)
    c.add_argument("--steps", type=int, default=1000)
    c.add_argument("--burnin", type=int, default=0)
    c.add_argument("--iters", type=int, default=100)
    c.add_argument("--n-per-iter", type=int, default=50)
    c.add_argument("--step-size", type=float, default=0.01)
    c.add_argument("--init", help="initial latent trace for MH")
    c.add_argument("--seed", type=int)
    c.add_argument("--out")
    c.add_argument("--param", action="append", default=[], help="name:transform:init")
    c.add_argument("--model-arg", action="append", default=[])
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "check":
            return cmd_check(args.source, args.json)
        if args.command == "compat":
            return cmd_compat(args.source, args.model, args.guide, args.json)
        model_args = tuple(_scalar_arg(a) for a in args.model_arg)
        if args.command == "score":
            return cmd_score(args.source, args.model, args.latent, args.obs, model_args)
        cfg = RunConfig(args.source, args.model, args.guide, args.obs, args.engine, args.n,
                        args.steps, args.burnin, args.iters, args.n_per_iter, args.step_size,
                        _seed(args.seed), args.out, args.init,
                        [_param(s) for s in args.param], model_args)
        return cmd_run(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GppError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAG


if __name__ == "__main__":
    sys.exit(main())
