"""Error taxonomy and the wire error-code table.

Codes 4001-4007 are the service's rejection namespace (only 4004 is
normative; the rest extend its numbering scheme and are documented as
non-normative). Errors without a `code` never cross the wire with a
specific code and surface as 4000 InternalError if they escape.
"""


class UdssError(Exception):
    """Base class for every UDSS failure."""

    code: int | None = None
    name: str = "InternalError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.name)


class UnknownAppError(UdssError):
    code = 4001
    name = "UnknownApp"


class ScopeViolationError(UdssError):
    code = 4002
    name = "ScopeViolation"


class SchemaViolationError(ScopeViolationError):
    """A field identifier outside the 10-field schema."""


class NoPrimaryIdentifierError(ScopeViolationError):
    """Sign-in request contains no Contact-drawer field."""


class EmptyAuthorizedScopeError(ScopeViolationError):
    """Sign-up intersection with the tier policy is empty."""


class ConsentDeniedError(UdssError):
    code = 4003
    name = "ConsentDenied"


class AuthorizationRevokedError(UdssError):
    code = 4004
    name = "AuthorizationRevoked"


class TokenExpiredError(UdssError):
    code = 4005
    name = "TokenExpired"


class ReplayDetectedError(UdssError):
    code = 4006
    name = "ReplayDetected"


class ManifestInvalidError(UdssError):
    code = 4007
    name = "ManifestInvalid"


class ProvisioningError(UdssError):
    name = "ProvisioningError"


class FatalBootError(UdssError):
    """Gateway refuses to serve (missing manifest, corrupt key store)."""

    name = "FatalBootError"


class EpochMismatchError(UdssError):
    """Token was signed under a non-current key epoch."""

    name = "EpochMismatch"


class SignatureInvalidError(UdssError):
    name = "SignatureInvalid"


class CiphertextTamperedError(UdssError):
    name = "CiphertextTampered"


class KeyUnwrapFailureError(UdssError):
    name = "KeyUnwrapFailure"


class PayloadTooLargeError(UdssError):
    name = "PayloadTooLarge"


class EmptyPayloadError(UdssError):
    name = "EmptyPayload"


class ProtocolError(UdssError):
    """Malformed frame or message on the wire."""

    name = "ProtocolError"


#: Wire code table. 4000 is the catch-all for errors that carry no code.
WIRE_ERROR_CODES = {
    4000: "InternalError",
    4001: "UnknownApp",
    4002: "ScopeViolation",
    4003: "ConsentDenied",
    4004: "AuthorizationRevoked",
    4005: "TokenExpired",
    4006: "ReplayDetected",
    4007: "ManifestInvalid",
}


def wire_code(exc: UdssError) -> int:
    return exc.code if exc.code is not None else 4000


def wire_name(code: int) -> str:
    return WIRE_ERROR_CODES.get(code, "InternalError")
