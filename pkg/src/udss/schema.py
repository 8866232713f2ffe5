"""PII field taxonomy, drawers, tiers, contexts, and scope enforcement.

The 10-field schema is fixed: every field belongs to exactly one drawer
and one access tier. Field identifiers serialize as the camelCase
strings below in all wire messages and ledger entries. All functions
here are pure and operate on immutable values.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import (
    EmptyAuthorizedScopeError,
    NoPrimaryIdentifierError,
    SchemaViolationError,
)


class PiiField(str, Enum):
    FIRST_NAME = "firstName"
    LAST_NAME = "lastName"
    EMAIL = "email"
    PHONE = "phone"
    STREET = "street"
    CITY = "city"
    ZIP = "zip"
    COUNTRY = "country"
    GENDER = "gender"
    DATE_OF_BIRTH = "dateOfBirth"


class DrawerCategory(str, Enum):
    IDENTITY = "Identity"
    CONTACT = "Contact"
    ADDRESS = "Address"
    DEMOGRAPHICS = "Demographics"


class AccessTier(str, Enum):
    STANDARD = "Standard"
    PREMIUM = "Premium"


class RequestContext(str, Enum):
    SIGN_IN = "SIGN_IN"
    SIGN_UP = "SIGN_UP"


#: A scope set is a duplicate-free subset of the 10-field domain.
ScopeSet = frozenset[PiiField]

#: Drawer partition of the schema. Contact is the authentication
#: minimum; the other three drawers carry re-identification, physical
#: location, or sensitive-category risk and sit behind Premium.
DRAWER_FIELDS: dict[DrawerCategory, ScopeSet] = {
    DrawerCategory.IDENTITY: frozenset({PiiField.FIRST_NAME, PiiField.LAST_NAME}),
    DrawerCategory.CONTACT: frozenset({PiiField.EMAIL, PiiField.PHONE}),
    DrawerCategory.ADDRESS: frozenset(
        {PiiField.STREET, PiiField.CITY, PiiField.ZIP, PiiField.COUNTRY}
    ),
    DrawerCategory.DEMOGRAPHICS: frozenset({PiiField.GENDER, PiiField.DATE_OF_BIRTH}),
}

DRAWER_TIER: dict[DrawerCategory, AccessTier] = {
    DrawerCategory.IDENTITY: AccessTier.PREMIUM,
    DrawerCategory.CONTACT: AccessTier.STANDARD,
    DrawerCategory.ADDRESS: AccessTier.PREMIUM,
    DrawerCategory.DEMOGRAPHICS: AccessTier.PREMIUM,
}

FIELD_DRAWER: dict[PiiField, DrawerCategory] = {
    field: drawer for drawer, fields in DRAWER_FIELDS.items() for field in fields
}

ALL_FIELDS: ScopeSet = frozenset(PiiField)
CONTACT_FIELDS: ScopeSet = DRAWER_FIELDS[DrawerCategory.CONTACT]

#: Total order over the schema, used by compact serializations.
FIELD_ORDER: tuple[PiiField, ...] = tuple(PiiField)
FIELD_INDEX: dict[PiiField, int] = {f: i for i, f in enumerate(FIELD_ORDER)}


@dataclass(frozen=True)
class TierPolicy:
    tier: AccessTier
    context: RequestContext
    allowed: ScopeSet


def classify(field: PiiField) -> tuple[DrawerCategory, AccessTier]:
    """Drawer and tier for a schema field."""
    if not isinstance(field, PiiField):
        field = parse_field(field)
    drawer = FIELD_DRAWER[field]
    return drawer, DRAWER_TIER[drawer]


def parse_field(name: str) -> PiiField:
    """Exact-string lookup of a wire field identifier."""
    try:
        return PiiField(name)
    except ValueError:
        raise SchemaViolationError(f"unknown PII field identifier: {name!r}") from None


def parse_scopes(names: Iterable[str]) -> ScopeSet:
    return frozenset(parse_field(n) for n in names)


def scope_names(scopes: Iterable[PiiField]) -> list[str]:
    """Wire identifiers in schema order (deterministic everywhere)."""
    ordered = sorted(scopes, key=lambda f: FIELD_INDEX[f])
    return [f.value for f in ordered]


def parse_context(literal: str) -> RequestContext:
    try:
        return RequestContext(literal)
    except ValueError:
        raise SchemaViolationError(f"unknown requestContext: {literal!r}") from None


def fetch_policy(tier: AccessTier, ctx: RequestContext) -> TierPolicy:
    """Allowed set for a (tier, context) pair.

    The allowed set depends on tier only; the context drives result
    cardinality downstream (sign-in is truncated to a single field by
    enforce_cse, not by the policy table).
    """
    allowed = ALL_FIELDS if tier is AccessTier.PREMIUM else CONTACT_FIELDS
    return TierPolicy(tier=tier, context=ctx, allowed=allowed)


def select_primary_id(req: ScopeSet) -> PiiField:
    """Single unique identifier for a sign-in: email wins over phone."""
    if PiiField.EMAIL in req:
        return PiiField.EMAIL
    if PiiField.PHONE in req:
        return PiiField.PHONE
    raise NoPrimaryIdentifierError(
        "sign-in request contains no Contact-drawer field"
    )


def enforce_cse(tier: AccessTier, ctx: RequestContext, req: ScopeSet) -> ScopeSet:
    """Truncate a requested scope set to what the context and tier allow.

    Sign-in collapses to exactly one Contact field; sign-up intersects
    with the tier policy. The result is always a subset of the request:
    enforcement never grants a field the app did not ask for.
    """
    if not req:
        raise EmptyAuthorizedScopeError("requested scope set is empty")
    if ctx is RequestContext.SIGN_IN:
        return frozenset({select_primary_id(req)})
    authorized = req & fetch_policy(tier, ctx).allowed
    if not authorized:
        raise EmptyAuthorizedScopeError(
            f"no requested field is allowed at tier {tier.value}"
        )
    return authorized


def policy_table() -> list[dict[str, str]]:
    """Field/drawer/tier rows, exportable for the dashboard badges."""
    return [
        {
            "field": field.value,
            "drawer": FIELD_DRAWER[field].value,
            "tier": DRAWER_TIER[FIELD_DRAWER[field]].value,
        }
        for field in FIELD_ORDER
    ]
