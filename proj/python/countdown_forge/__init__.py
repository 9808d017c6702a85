"""Python bindings for the forge toolkit."""

from ._core import (
    ConfigError,
    ExprParseError,
    Puzzle,
    QtaValidationError,
    __version__,
    build_dataset,
    count_behaviors,
    evaluate,
    format_response,
    generate,
    parse_qta,
    profiles,
    run_cli,
    run_experiment,
    score,
    solve,
    synthesize,
    templated_qta,
    to_first_person,
)

__all__ = [
    "ConfigError",
    "ExprParseError",
    "Puzzle",
    "QtaValidationError",
    "__version__",
    "build_dataset",
    "count_behaviors",
    "evaluate",
    "format_response",
    "generate",
    "parse_qta",
    "profiles",
    "run_cli",
    "run_experiment",
    "score",
    "solve",
    "synthesize",
    "templated_qta",
    "to_first_person",
]
