"""Coroutine-based probabilistic programs with guide-type checking."""
from __future__ import annotations

from importlib import resources

from .errors import (ChannelMismatch, GppError, ParseError, RuntimeFault, Stuck,
                     TraceMismatch, TypeCheckError)
from .interpreter import (IMPOSSIBLE, ExecutionRecord, eval_cmd, eval_expr, eval_proc,
                          joint_execute, model_log_density, reduce_cmd, reduce_proc)
from .parser import (format_guide_type, format_program, parse_guide_type, parse_program)
from .syntax import Program, Trace, concat_traces, validate_program
from .typecheck import (CompatReport, check_model_guide, check_trace, infer_program_types)

__version__ = "0.1.0"


def corpus_names() -> list:
    root = resources.files(__package__) / "corpus"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".gpp"))


def corpus_source(name: str) -> str:
    return (resources.files(__package__) / "corpus" / f"{name}.gpp").read_text(encoding="utf-8")


def load_corpus(name: str) -> Program:
    return parse_program(corpus_source(name), f"{name}.gpp")


__all__ = [
    "ChannelMismatch", "GppError", "ParseError", "RuntimeFault", "Stuck", "TraceMismatch",
    "TypeCheckError", "IMPOSSIBLE", "ExecutionRecord", "eval_cmd", "eval_expr", "eval_proc",
    "joint_execute", "model_log_density", "reduce_cmd", "reduce_proc", "format_guide_type",
    "format_program", "parse_guide_type", "parse_program", "Program", "Trace",
    "concat_traces", "validate_program", "CompatReport", "check_model_guide", "check_trace",
    "infer_program_types", "corpus_names", "corpus_source", "load_corpus",
]
