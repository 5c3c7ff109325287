"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the command line
front end prints on failure.
"""


class PlateError(Exception):
    code = "PLATE_ERROR"


class InvalidLevel(PlateError, ValueError):
    code = "INVALID_LEVEL"


class MeshFormatError(PlateError, ValueError):
    code = "MESH_FORMAT"


class NoClampedEdge(PlateError, ValueError):
    code = "NO_CLAMPED_EDGE"


class SingularMaterial(PlateError, ValueError):
    code = "SINGULAR_MATERIAL"


class PointOutsideElement(PlateError, ValueError):
    code = "POINT_OUTSIDE_ELEMENT"


class ShapeMismatch(PlateError, ValueError):
    code = "SHAPE_MISMATCH"


class NotPositiveDefinite(PlateError, ArithmeticError):
    code = "NOT_POSITIVE_DEFINITE"


class SingularSaddle(PlateError, ArithmeticError):
    code = "SINGULAR_SADDLE"


class NotCoercive(NotPositiveDefinite):
    """The penalized boundary form is indefinite on the RT0 quotient."""

    code = "NOT_COERCIVE"


class DegenerateComponent(PlateError, ArithmeticError):
    code = "DEGENERATE_COMPONENT"


class AmbiguousCompatibility(PlateError, ValueError):
    code = "AMBIGUOUS_COMPATIBILITY"


class NonpositivePenalty(PlateError, ValueError):
    code = "NONPOSITIVE_PENALTY"


class SingularSystem(PlateError, ArithmeticError):
    code = "SINGULAR_SYSTEM"


class MissingReference(PlateError, ValueError):
    code = "MISSING_REFERENCE"


class ConfigError(PlateError, ValueError):
    code = "CONFIG"
