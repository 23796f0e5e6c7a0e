"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """A caller broke an operation's precondition."""


class ConfigurationError(ValueError):
    """Shapes, widths or settings that cannot work together."""


class ParseError(ValueError):
    """Malformed configuration text.

    ``line`` is 1-based (0 when the problem is not tied to one line) and
    ``rule`` names the violated constraint.
    """

    def __init__(self, line, rule, detail=""):
        self.line = line
        self.rule = rule
        self.detail = detail
        msg = f"line {line}: {rule}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class PolicyFileError(ValueError):
    """A policy file failed its version, length or checksum check."""
