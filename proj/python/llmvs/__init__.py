"""Python bindings for the llmvs C++ core."""

from ._llmvs import (
    LlmvsError,
    Model,
    WindowSpec,
    build_window,
    kendall_tau,
    knapsack_select,
    kts_segment,
    make_folds,
    parse_score,
    render_prompt,
    shot_scores,
    spearman_rho,
    summary_budget,
    train,
)

__all__ = [
    "LlmvsError",
    "Model",
    "WindowSpec",
    "build_window",
    "kendall_tau",
    "knapsack_select",
    "kts_segment",
    "make_folds",
    "parse_score",
    "render_prompt",
    "shot_scores",
    "spearman_rho",
    "summary_budget",
    "train",
]
