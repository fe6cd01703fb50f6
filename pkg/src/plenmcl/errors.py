"""Exception types shared across the pipeline."""


class InvalidInputError(ValueError):
    """An argument violates an operation's preconditions."""


class InvalidSceneError(InvalidInputError):
    """A synthetic scene cannot be rendered with the given camera."""


class SceneSpecError(InvalidSceneError):
    """Malformed scene JSON. ``field`` names the offending entry."""

    def __init__(self, message, field=None, line=None, column=None):
        self.field = field
        self.line = line
        self.column = column
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}, column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class NoStereoEvidenceError(InvalidInputError):
    """Only the center view is usable, so no cost volume can be built."""


class DepthOutOfRangeError(ValueError):
    """A queried depth lies outside the depth-label range of a volume."""


class TotalLikelihoodFailure(RuntimeError):
    """Every particle scored zero; resampling is undefined."""
