"""Preference-optimization objectives, shape analysis and discovery loop."""

from ._disco import (
    ConfigError,
    DivergenceError,
    FiniteViolation,
    NotPointwise,
    ParseFailure,
    ProviderError,
    ShapeError,
    builtin_source,
    burn_in_context,
    check_program,
    convexity_profile,
    default_config,
    discover,
    eval_loss,
    eval_loss_batch,
    eval_program,
    frontier,
    loss_derivative,
    loss_info,
    loss_names,
    make_task,
    parse_candidate,
    render_program,
    resolve_config,
    run_cli,
    stationary_points,
    train,
    validate_candidate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
