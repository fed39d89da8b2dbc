"""Exception types shared across the package."""


class SketchrigError(Exception):
    """Base class for all package errors."""


class AnnotationParseError(SketchrigError):
    """Annotation document violates the schema; carries the offending path."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ReferenceResolutionError(SketchrigError):
    """A segment/part parent id does not resolve."""


class DimensionError(SketchrigError):
    """A mask raster does not match the expected image dimensions."""


class GeometryError(SketchrigError):
    """Degenerate or self-intersecting geometry."""


class BoundsError(SketchrigError):
    """An operation would write outside the canvas."""


class EmptyMaskError(SketchrigError):
    """A mask with no foreground pixels where one is required."""


class MultiComponentError(SketchrigError):
    """A mask expected to be one connected component has several."""


class InsufficientContextError(SketchrigError):
    """Inpainting has no known pixels to draw from."""


class UnsupportedFigureError(SketchrigError):
    """The annotated figure is outside the supported bipedal/upright class."""


class StructuralError(SketchrigError):
    """An annotation or rig structure invariant is broken at build time."""


class RegistrationError(SketchrigError):
    """A deformation handle could not be attached to the mesh."""


class BvhError(SketchrigError):
    """Malformed BVH input; carries a line number when known."""

    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class DegenerateViewError(SketchrigError):
    """Camera directly above the character root: no ground direction."""


class UndefinedCircleError(SketchrigError):
    """Collinear limb vectors define no great circle."""


class SingularityError(SketchrigError):
    """Evaluation at a mathematical singularity (e.g. Jacobian at P=0)."""


class ConfigError(SketchrigError):
    """Invalid configuration value."""


class ProtocolError(SketchrigError):
    """Malformed wire message."""
