"""annotium: a standoff text-annotation platform.

Core pieces: an in-memory collection/document/annotation store, a JSON
interchange format with encoding import filters, a component system driven
by declared pre/post-conditions, a pipeline engine, an external-process
broker for wrapper components, an HTTP processing service and a CLI.
"""

from annotium.model import (
    Annotation,
    AttrKind,
    Attribute,
    AttributeValue,
    Collection,
    Document,
    Span,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AttrKind",
    "Attribute",
    "AttributeValue",
    "Collection",
    "Document",
    "Span",
    "__version__",
]
