"""Must-have-been-initialized analysis for static fields under lazy class initialization."""
from importlib import resources

from .analysis import AbstractState, Solution, check_equations, solve
from .checks import Diagnostic, nullness_flags, read_before_write, verify_soundness
from .frontend import ParseFailure, parse, render, solution_to_json
from .model import FieldId, MethodId, PointLabel, Program, desugar, validate
from .semantics import explore, run_trace

__all__ = [
    "AbstractState", "Diagnostic", "FieldId", "MethodId", "ParseFailure", "PointLabel",
    "Program", "Solution", "check_equations", "desugar", "explore", "load_example",
    "nullness_flags", "parse", "read_before_write", "render", "run_trace", "solution_to_json",
    "solve", "validate", "verify_soundness",
]


def load_example(name: str) -> Program:
    """Parse one of the bundled example programs, e.g. ``load_example("two_paths")``."""
    text = resources.files(__package__).joinpath("programs", f"{name}.sfi").read_text("utf-8")
    return parse(text)
