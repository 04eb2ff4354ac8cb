"""Exception hierarchy. Each family maps to a distinct CLI exit code."""


class InrError(Exception):
    exit_code = 1


class ConfigError(InrError, ValueError):
    """Invalid network spec, task config or CLI override."""

    exit_code = 2


class ShapeError(InrError, ValueError):
    """Operands with incompatible shapes."""

    exit_code = 2

    def __init__(self, message, *shapes):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = shapes


class FormatError(InrError, IOError):
    """Malformed or truncated file. ``offset`` is the byte position of the problem."""

    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class DivergenceError(InrError, FloatingPointError):
    """Training produced a non-finite loss or output."""

    exit_code = 4

    def __init__(self, message, iteration=None, method=None):
        parts = [message]
        if method is not None:
            parts.append(f"method={method}")
        if iteration is not None:
            parts.append(f"iteration={iteration}")
        super().__init__(", ".join(parts))
        self.iteration = iteration
        self.method = method
