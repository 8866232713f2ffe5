import pytest
from hypothesis import given
from hypothesis import strategies as st

from udss.errors import (
    EmptyAuthorizedScopeError,
    NoPrimaryIdentifierError,
    SchemaViolationError,
)
from udss.schema import (
    ALL_FIELDS,
    CONTACT_FIELDS,
    DRAWER_FIELDS,
    AccessTier,
    DrawerCategory,
    PiiField,
    RequestContext,
    classify,
    enforce_cse,
    fetch_policy,
    parse_field,
    parse_scopes,
    policy_table,
    scope_names,
    select_primary_id,
)

F = PiiField

scope_sets = st.frozensets(st.sampled_from(list(PiiField)), min_size=1)
tiers = st.sampled_from(list(AccessTier))
contexts = st.sampled_from(list(RequestContext))


class TestTaxonomy:
    def test_drawer_partition_is_total_and_disjoint(self):
        union = frozenset()
        for fields in DRAWER_FIELDS.values():
            assert not (union & fields)
            union |= fields
        assert union == ALL_FIELDS
        assert len(ALL_FIELDS) == 10

    def test_drawer_membership(self):
        assert DRAWER_FIELDS[DrawerCategory.CONTACT] == {F.EMAIL, F.PHONE}
        assert DRAWER_FIELDS[DrawerCategory.IDENTITY] == {F.FIRST_NAME, F.LAST_NAME}
        assert DRAWER_FIELDS[DrawerCategory.ADDRESS] == {
            F.STREET,
            F.CITY,
            F.ZIP,
            F.COUNTRY,
        }
        assert DRAWER_FIELDS[DrawerCategory.DEMOGRAPHICS] == {
            F.GENDER,
            F.DATE_OF_BIRTH,
        }

    def test_classify_rows(self):
        assert classify(F.EMAIL) == (DrawerCategory.CONTACT, AccessTier.STANDARD)
        assert classify(F.DATE_OF_BIRTH) == (
            DrawerCategory.DEMOGRAPHICS,
            AccessTier.PREMIUM,
        )
        assert classify(F.STREET) == (DrawerCategory.ADDRESS, AccessTier.PREMIUM)

    def test_classify_total_over_domain(self):
        for field in PiiField:
            drawer, tier = classify(field)
            assert isinstance(drawer, DrawerCategory)
            assert isinstance(tier, AccessTier)

    def test_unknown_identifier_rejected(self):
        with pytest.raises(SchemaViolationError):
            parse_field("Email")
        with pytest.raises(SchemaViolationError):
            parse_field("ssn")

    def test_wire_names_are_exact_camel_case(self):
        assert sorted(f.value for f in PiiField) == sorted(
            [
                "firstName",
                "lastName",
                "email",
                "phone",
                "street",
                "city",
                "zip",
                "country",
                "gender",
                "dateOfBirth",
            ]
        )

    def test_policy_table_export(self):
        rows = policy_table()
        assert len(rows) == 10
        by_field = {r["field"]: r for r in rows}
        assert by_field["email"] == {
            "field": "email",
            "drawer": "Contact",
            "tier": "Standard",
        }
        assert by_field["gender"]["tier"] == "Premium"


class TestFetchPolicy:
    def test_standard_signup_is_contact(self):
        assert fetch_policy(AccessTier.STANDARD, RequestContext.SIGN_UP).allowed == {
            F.EMAIL,
            F.PHONE,
        }

    def test_premium_signup_is_full_domain(self):
        assert (
            fetch_policy(AccessTier.PREMIUM, RequestContext.SIGN_UP).allowed
            == ALL_FIELDS
        )

    def test_standard_signin_is_contact(self):
        # oracle: enumerate taxonomy rows carrying the Standard tier
        standard_rows = frozenset(
            f for f in PiiField if classify(f)[1] is AccessTier.STANDARD
        )
        assert (
            fetch_policy(AccessTier.STANDARD, RequestContext.SIGN_IN).allowed
            == standard_rows
            == CONTACT_FIELDS
        )

    @given(tiers, contexts)
    def test_total_over_2x2_domain(self, tier, ctx):
        policy = fetch_policy(tier, ctx)
        assert policy.allowed <= ALL_FIELDS
        assert policy.tier is tier


class TestSelectPrimaryId:
    def test_email_wins_over_everything(self):
        req = frozenset(
            {F.EMAIL, F.FIRST_NAME, F.LAST_NAME, F.STREET, F.DATE_OF_BIRTH}
        )
        assert select_primary_id(req) is F.EMAIL

    def test_singleton_phone(self):
        assert select_primary_id(frozenset({F.PHONE})) is F.PHONE

    def test_no_contact_field_rejected(self):
        # oracle: request ∩ Contact drawer is empty
        req = frozenset({F.FIRST_NAME, F.GENDER})
        assert not (req & CONTACT_FIELDS)
        with pytest.raises(NoPrimaryIdentifierError):
            select_primary_id(req)

    def test_email_beats_phone(self):
        assert select_primary_id(frozenset({F.EMAIL, F.PHONE})) is F.EMAIL


class TestEnforceCse:
    def test_signin_truncates_to_email(self):
        result = enforce_cse(
            AccessTier.STANDARD,
            RequestContext.SIGN_IN,
            frozenset({F.EMAIL, F.FIRST_NAME, F.LAST_NAME, F.STREET, F.DATE_OF_BIRTH}),
        )
        assert result == {F.EMAIL}

    def test_signup_standard_intersection(self):
        req = frozenset({F.EMAIL, F.PHONE, F.FIRST_NAME, F.STREET, F.DATE_OF_BIRTH})
        # oracle: brute-force intersection with Standard-tier rows
        expected = frozenset(
            f for f in req if classify(f)[1] is AccessTier.STANDARD
        )
        assert expected == {F.EMAIL, F.PHONE}
        assert enforce_cse(AccessTier.STANDARD, RequestContext.SIGN_UP, req) == expected

    def test_signup_premium_is_identity(self):
        req = frozenset({F.EMAIL, F.GENDER})
        assert enforce_cse(AccessTier.PREMIUM, RequestContext.SIGN_UP, req) == req

    def test_signup_empty_intersection_rejected(self):
        with pytest.raises(EmptyAuthorizedScopeError):
            enforce_cse(
                AccessTier.STANDARD,
                RequestContext.SIGN_UP,
                frozenset({F.FIRST_NAME, F.GENDER}),
            )

    def test_signin_without_contact_rejected(self):
        with pytest.raises(NoPrimaryIdentifierError):
            enforce_cse(
                AccessTier.PREMIUM, RequestContext.SIGN_IN, frozenset({F.GENDER})
            )

    def test_empty_request_rejected(self):
        with pytest.raises(EmptyAuthorizedScopeError):
            enforce_cse(AccessTier.PREMIUM, RequestContext.SIGN_UP, frozenset())

    # --- invariants -----------------------------------------------------

    @given(tiers, contexts, scope_sets)
    def test_result_is_subset_of_request(self, tier, ctx, req):
        try:
            result = enforce_cse(tier, ctx, req)
        except (NoPrimaryIdentifierError, EmptyAuthorizedScopeError):
            return
        assert result <= req

    @given(tiers, st.frozensets(st.sampled_from(list(PiiField))))
    def test_signin_cardinality_is_one(self, tier, extra):
        req = extra | {F.EMAIL}
        assert len(enforce_cse(tier, RequestContext.SIGN_IN, req)) == 1

    @given(scope_sets)
    def test_standard_signup_within_contact(self, req):
        try:
            result = enforce_cse(AccessTier.STANDARD, RequestContext.SIGN_UP, req)
        except EmptyAuthorizedScopeError:
            return
        assert result <= {F.EMAIL, F.PHONE}

    @given(contexts, scope_sets)
    def test_monotonic_in_tier(self, ctx, req):
        try:
            std = enforce_cse(AccessTier.STANDARD, ctx, req)
            prem = enforce_cse(AccessTier.PREMIUM, ctx, req)
        except (NoPrimaryIdentifierError, EmptyAuthorizedScopeError):
            return
        assert std <= prem

    @given(tiers, contexts, scope_sets)
    def test_idempotent(self, tier, ctx, req):
        try:
            once = enforce_cse(tier, ctx, req)
        except (NoPrimaryIdentifierError, EmptyAuthorizedScopeError):
            return
        assert enforce_cse(tier, ctx, once) == once


def test_scope_name_roundtrip():
    names = scope_names(ALL_FIELDS)
    assert parse_scopes(names) == ALL_FIELDS
    assert names[0] == "firstName"  # schema order is stable
