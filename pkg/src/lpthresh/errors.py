class ContractError(ValueError):
    """Raised when an input violates an operation's preconditions."""
