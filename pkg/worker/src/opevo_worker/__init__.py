from opevo_worker.host import (
    ALLOWED_IMPORTS,
    LoadedOperator,
    Session,
    ValidationError,
    coerce_offspring,
    handle_message,
    operator_namespace,
    serve,
)

__all__ = [
    "ALLOWED_IMPORTS",
    "LoadedOperator",
    "Session",
    "ValidationError",
    "coerce_offspring",
    "handle_message",
    "operator_namespace",
    "serve",
]
