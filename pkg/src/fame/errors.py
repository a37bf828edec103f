"""Exception hierarchy for the evolution engine.

Every error carries enough context (file, field, id) to point at the
offending input without a debugger.
"""

from __future__ import annotations


class FameError(Exception):
    """Base class for all engine errors."""


# ---- dataset / loading ----

class DatasetInvalid(FameError):
    """A dataset directory cannot be loaded as a population."""


class MissingSidecar(DatasetInvalid):
    """A mesh file has no matching metadata sidecar."""


class DanglingPartReference(DatasetInvalid):
    """Sidecar references a part id that does not exist in the mesh."""


class MalformedContactKind(DatasetInvalid):
    """A contact's kind does not match its point count (quad=4, pair=2, single=1)."""


# ---- geometry / graph queries ----

class UnknownPartId(FameError):
    """An operation was asked about a part id the shape does not contain."""


class EmptySelection(FameError):
    """A bounding box or subset query received an empty part selection."""


# ---- crossover ----

class DegenerateBBox(FameError):
    """A part group's bounding box has zero extent where a scale is needed."""


class NoContacts(FameError):
    """Contact matching requires at least one contact point on each side."""


class AlignmentImpossible(FameError):
    """A crossover placement could not be computed (degenerate geometry)."""


class NoAnchorLabels(FameError):
    """Part group insertion found no anchor label shared with the host shape."""


# ---- functionality scoring ----

class MissingProvenance(FameError):
    """Simplified partial matching needs offspring provenance, which is absent."""


class NoApplicableModel(FameError):
    """None of the provided category models applies to the shape's categories."""


class UnknownLabel(FameError):
    """A functionality label is not known to the category model queried."""


# ---- evolution / service ----

class EmptyGeneration(FameError):
    """An evolution iteration produced no surviving offspring."""


class WrongStatus(FameError):
    """A session operation was attempted in an incompatible session status."""


class UnknownShapeId(FameError):
    """A selection referenced a shape id not present in the generation."""


class UnknownGeneration(FameError):
    """A generation index outside the session's history was requested."""
