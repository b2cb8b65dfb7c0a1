"""Shared error types."""


class BudgetError(RuntimeError):
    """A computation exceeded its configured work budget.

    Raised instead of returning a partial or wrong result; callers either
    retry with a larger budget or report the failure.
    """
