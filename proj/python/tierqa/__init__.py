"""Python bindings for the tierqa C++ core."""

from ._core import (
    ConfigError,
    build_initial_prompt,
    cosine,
    cost,
    default_calibration,
    embed,
    estimate_tokens,
    expected_cost,
    extract_code_blocks,
    generate_fake_key,
    is_terminate,
    judge_quality,
    parse_judge_reply,
    replay,
    reproduce_tradeoff,
    simulate,
    summarize_ledger,
)

__all__ = [
    "ConfigError",
    "build_initial_prompt",
    "cosine",
    "cost",
    "default_calibration",
    "embed",
    "estimate_tokens",
    "expected_cost",
    "extract_code_blocks",
    "generate_fake_key",
    "is_terminate",
    "judge_quality",
    "parse_judge_reply",
    "replay",
    "reproduce_tradeoff",
    "simulate",
    "summarize_ledger",
]
