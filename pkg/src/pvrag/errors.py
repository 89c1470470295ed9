"""Exception types shared across the engine.

Every error the library raises deliberately derives from PvragError so the
CLI and HTTP service can map failures to exit codes / status codes in one
place.
"""

from __future__ import annotations


class PvragError(Exception):
    """Base class for all deliberate pvrag failures."""

    code = "error"


# --- knowledge base ingestion ---------------------------------------------


class MalformedRow(PvragError):
    """An input row is syntactically invalid or violates a KB invariant."""

    code = "malformed_row"

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"row {line}: {reason}")


class EmptyResult(PvragError):
    """All input rows were filtered out; the KB would be empty."""

    code = "empty_result"


class UnknownDrug(PvragError):
    code = "unknown_drug"


class NoAssociations(PvragError):
    code = "no_associations"


class UnknownAssociation(PvragError):
    code = "unknown_association"


# --- graph store ------------------------------------------------------------


class CypherSyntaxError(PvragError):
    """Query text falls outside the supported Cypher subset."""

    code = "cypher_syntax_error"

    def __init__(self, position: int, expected: str):
        self.position = position
        self.expected = expected
        super().__init__(f"at position {position}: expected {expected}")


class UnknownProperty(PvragError):
    """A WHERE predicate names a property no node or edge carries."""

    code = "unknown_property"


# --- vector index ------------------------------------------------------------


class EmptyCorpus(PvragError):
    code = "empty_corpus"


class EmptyIndex(PvragError):
    code = "empty_index"


class DimensionMismatch(PvragError):
    code = "dimension_mismatch"


class InvalidVector(PvragError):
    """A vector is zero or contains non-finite entries."""

    code = "invalid_vector"


class ProviderFailure(PvragError):
    """The embedding provider failed for a specific chunk; the build aborts."""

    code = "provider_failure"

    def __init__(self, chunk_id: str, cause: str):
        self.chunk_id = chunk_id
        self.cause = cause
        super().__init__(f"embedding failed for chunk {chunk_id}: {cause}")


class ProviderMismatch(PvragError):
    """Query embedded with a different provider than the index was built with."""

    code = "provider_mismatch"


# --- entity recognition -------------------------------------------------------


class EntityError(PvragError):
    """Base for extraction failures; carries near-miss candidates when known."""

    def __init__(self, message: str, candidates: list[str] | None = None):
        self.candidates = candidates or []
        super().__init__(message)


class DrugNotFound(EntityError):
    code = "drug_not_found"


class SideEffectNotFound(EntityError):
    code = "side_effect_not_found"


class AmbiguousDrug(EntityError):
    code = "ambiguous_drug"


class AmbiguousSideEffect(EntityError):
    code = "ambiguous_side_effect"


# --- pipeline / backends ------------------------------------------------------


class Unparseable(PvragError):
    """Chat completion does not lead with YES or NO."""

    code = "unparseable_completion"

    def __init__(self, completion: str):
        self.completion = completion
        super().__init__(f"completion does not lead with YES/NO: {completion[:120]!r}")


class MalformedPrompt(PvragError):
    """Deterministic backend received a prompt whose assertion matches no template."""

    code = "malformed_prompt"


class BackendUnavailable(PvragError):
    code = "backend_unavailable"


# --- evaluation ---------------------------------------------------------------


class NoEligibleDrugs(PvragError):
    code = "no_eligible_drugs"


class EmptyMatrix(PvragError):
    code = "empty_matrix"


# --- configuration ------------------------------------------------------------


class ConfigError(PvragError):
    code = "config_error"
