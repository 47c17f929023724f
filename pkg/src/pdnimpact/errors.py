"""Exception hierarchy shared by all modules."""


class PdnError(Exception):
    """Base class for every error raised by the package."""


class ParseError(PdnError):
    """A text input (mesh file, config) could not be parsed."""


class ValidationError(PdnError):
    """A model invariant is violated; the message names the offending entity."""


class KindError(PdnError):
    """An operation was applied to an element kind that does not support it."""


class UnknownSetError(PdnError, KeyError):
    """A named boundary set or node set does not exist."""

    def __str__(self):
        return Exception.__str__(self)


class UnsupportedKindError(PdnError):
    """The element kind is outside the scope of the requested operation."""


class MaterialError(PdnError):
    """A constitutive evaluation failed; carries the element id when known."""

    def __init__(self, message, element=None):
        super().__init__(message if element is None else f"element {element}: {message}")
        self.element = element


class InvertedElementError(MaterialError):
    """det F <= 0 was encountered at an integration point."""


class SnapbackError(PdnError):
    """The element length exceeds the crack-band snap-back limit."""


class NonFiniteError(PdnError):
    """NaN or Inf appeared in the kinematic state."""


class AmbiguousProjectionError(PdnError):
    """A node is equidistant to master facets with opposing normals."""


class LivelockError(PdnError):
    """The release/reset loop of a step did not terminate."""


class DesyncError(PdnError):
    """Coupled instances disagree on the message sequence or step index."""


class ChannelClosedError(PdnError):
    """The peer of a message channel has gone away."""


class ConfigError(PdnError):
    """A scenario configuration is inconsistent or incomplete."""


class StabilityError(ConfigError):
    """A fixed time step exceeds the stable time step."""
