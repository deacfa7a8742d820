"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Input violates a documented precondition or schema constraint."""


class ParseError(ValueError):
    """A file or text block does not conform to its documented format."""
