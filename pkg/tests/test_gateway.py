import random

import pytest

from udss import gateway as gw
from udss.envelope import open_envelope
from udss.errors import (
    AuthorizationRevokedError,
    ConsentDeniedError,
    EmptyAuthorizedScopeError,
    FatalBootError,
    UnknownAppError,
)
from udss.gateway import ConsentDecision, IdentityRequest, boot, handle_request
from udss.keystore import KeyStore
from udss.manifest import TrustMode
from udss.pim import PimStore
from udss.schema import AccessTier, PiiField, RequestContext

from conftest import PREMIUM_APP, PROFILE, STANDARD_APP

F = PiiField
OVERREACH = frozenset({F.EMAIL, F.FIRST_NAME, F.LAST_NAME, F.STREET, F.DATE_OF_BIRTH})


def approve_all(app_id, ctx, scopes, deadline):
    return ConsentDecision(approved=True, decided_scopes=scopes)


def deny_all(app_id, ctx, scopes, deadline):
    return ConsentDecision(approved=False, decided_scopes=scopes)


@pytest.fixture
def state(manifest_file, root_key, pim, clock):
    return boot(manifest_file, root_key.public_key(), pim, clock)


class TestBoot:
    def test_valid_manifest_boots_verified(self, state):
        assert state.trust.mode is TrustMode.VERIFIED
        assert state.epoch.epoch == 1

    def test_missing_manifest_is_fatal(self, tmp_path, root_key, pim, clock):
        with pytest.raises(FatalBootError):
            boot(str(tmp_path / "nope.json"), root_key.public_key(), pim, clock)

    def test_tampered_manifest_boots_degraded_and_logs(
        self, tmp_path, signed_manifest, root_key, pim, clock
    ):
        raw = bytearray(signed_manifest.to_bytes())
        raw[len(raw) // 2] ^= 0x04
        path = tmp_path / "manifest.json"
        path.write_bytes(bytes(raw))
        state = boot(str(path), root_key.public_key(), pim, clock)
        assert state.trust.mode is TrustMode.DEGRADED
        assert pim.entries[-1].outcome == "Error(4007)"

    def test_corrupt_keystore_is_fatal(self, manifest_file, root_key, pim, clock, tmp_path):
        ks = KeyStore(str(tmp_path / "keys"))
        ks.load_or_create_epoch(clock)
        (tmp_path / "keys" / "epoch.json").write_text("{broken")
        with pytest.raises(FatalBootError):
            boot(manifest_file, root_key.public_key(), pim, clock, keystore=ks)


class TestHandleRequest:
    def test_signin_overreach_delivers_only_email(self, state, app_keys):
        request = IdentityRequest(STANDARD_APP, RequestContext.SIGN_IN, OVERREACH)
        env = handle_request(state, request, approve_all)
        payload = open_envelope(
            env, app_keys[STANDARD_APP], state.epoch.public_key()
        )
        assert payload == {F.EMAIL: PROFILE[F.EMAIL]}

    def test_unknown_app_rejected(self, state):
        request = IdentityRequest(
            "tv.example.unregistered", RequestContext.SIGN_IN, OVERREACH
        )
        with pytest.raises(UnknownAppError):
            handle_request(state, request, approve_all)
        assert state.pim.entries[-1].outcome == "Error(4001)"

    def test_consent_denial_is_4003_with_denied_entry(self, state):
        before = len(state.pim.entries)
        request = IdentityRequest(STANDARD_APP, RequestContext.SIGN_IN, OVERREACH)
        with pytest.raises(ConsentDeniedError):
            handle_request(state, request, deny_all)
        new = state.pim.entries[before:]
        assert [e.outcome for e in new] == ["Denied"]
        # vault never extracted: no nonce consumed
        assert state.pim.consumed_nonces == {}

    def test_revoked_app_blocked_before_consent(self, state):
        gw.revoke_app(state, STANDARD_APP)
        consent_calls = []

        def spying_consent(app_id, ctx, scopes, deadline):
            consent_calls.append(app_id)
            return ConsentDecision(True, scopes)

        request = IdentityRequest(STANDARD_APP, RequestContext.SIGN_IN, OVERREACH)
        with pytest.raises(AuthorizationRevokedError):
            handle_request(state, request, spying_consent)
        assert consent_calls == []
        assert state.pim.entries[-1].outcome == "Error(4004)"

    def test_revoke_then_reconsent_restores_flow(self, state, app_keys):
        gw.revoke_app(state, STANDARD_APP)
        gw.re_consent_app(state, STANDARD_APP)
        request = IdentityRequest(STANDARD_APP, RequestContext.SIGN_IN, OVERREACH)
        env = handle_request(state, request, approve_all)
        assert open_envelope(env, app_keys[STANDARD_APP], state.epoch.public_key())

    def test_scope_violation_on_standard_signup_overreach(self, state):
        request = IdentityRequest(
            STANDARD_APP, RequestContext.SIGN_UP, frozenset({F.GENDER, F.STREET})
        )
        with pytest.raises(EmptyAuthorizedScopeError):
            handle_request(state, request, approve_all)
        assert state.pim.entries[-1].outcome == "Error(4002)"

    def test_consent_sees_truncated_set_only(self, state):
        shown = []

        def spy(app_id, ctx, scopes, deadline):
            shown.append((ctx, scopes))
            return ConsentDecision(True, scopes)

        handle_request(
            state,
            IdentityRequest(STANDARD_APP, RequestContext.SIGN_IN, OVERREACH),
            spy,
        )
        handle_request(
            state,
            IdentityRequest(
                PREMIUM_APP,
                RequestContext.SIGN_UP,
                frozenset({F.EMAIL, F.GENDER}),
            ),
            spy,
        )
        assert shown[0] == (RequestContext.SIGN_IN, frozenset({F.EMAIL}))
        assert shown[1][1] == frozenset({F.EMAIL, F.GENDER})

    def test_consent_timeout_denies(self, state, clock):
        def slow_consent(app_id, ctx, scopes, deadline):
            clock.advance(gw.CONSENT_TIMEOUT_SECONDS + 1)
            return ConsentDecision(True, scopes)

        request = IdentityRequest(STANDARD_APP, RequestContext.SIGN_IN, OVERREACH)
        with pytest.raises(ConsentDeniedError):
            handle_request(state, request, slow_consent)

    def test_degraded_gateway_clamps_premium_signup(
        self, tmp_path, signed_manifest, root_key, pim, clock, app_keys
    ):
        import json

        from udss.canonical import canonical_bytes

        doc = json.loads(signed_manifest.to_bytes())
        doc["issuedAt"] += 1  # parseable tamper
        path = tmp_path / "manifest.json"
        path.write_bytes(canonical_bytes(doc))
        state = boot(str(path), root_key.public_key(), pim, clock)
        request = IdentityRequest(
            PREMIUM_APP,
            RequestContext.SIGN_UP,
            frozenset({F.EMAIL, F.PHONE, F.GENDER}),
        )
        env = handle_request(state, request, approve_all)
        payload = open_envelope(env, app_keys[PREMIUM_APP], state.epoch.public_key())
        assert set(payload) == {F.EMAIL, F.PHONE}

    def test_audit_totality_over_random_requests(self, state):
        rng = random.Random(13)
        apps = [STANDARD_APP, PREMIUM_APP, "tv.example.unregistered"]
        invocations = 0
        before = len(state.pim.entries)
        for _ in range(60):
            app = rng.choice(apps)
            ctx = rng.choice(list(RequestContext))
            req = frozenset(rng.sample(list(PiiField), rng.randint(1, 8)))
            consent = rng.choice([approve_all, deny_all])
            invocations += 1
            try:
                handle_request(state, IdentityRequest(app, ctx, req), consent)
            except Exception:
                pass
        assert len(state.pim.entries) - before == invocations

    def test_consent_truncation_invariant_randomized(self, state):
        rng = random.Random(29)
        from udss.schema import CONTACT_FIELDS, fetch_policy

        def asserting_consent(app_id, ctx, scopes, deadline):
            if ctx is RequestContext.SIGN_IN:
                assert len(scopes) == 1
                assert scopes <= CONTACT_FIELDS
            else:
                tier = (
                    AccessTier.PREMIUM if app_id == PREMIUM_APP else AccessTier.STANDARD
                )
                assert scopes <= fetch_policy(tier, ctx).allowed
            return ConsentDecision(True, scopes)

        for _ in range(40):
            app = rng.choice([STANDARD_APP, PREMIUM_APP])
            ctx = rng.choice(list(RequestContext))
            req = frozenset(rng.sample(list(PiiField), rng.randint(1, 10)))
            try:
                handle_request(
                    state, IdentityRequest(app, ctx, req), asserting_consent
                )
            except Exception:
                pass


class TestIssueToken:
    def test_consecutive_nonces(self, state):
        t1 = gw.issue_token(state, STANDARD_APP, frozenset({F.EMAIL}))
        t2 = gw.issue_token(state, STANDARD_APP, frozenset({F.EMAIL}))
        assert t2.nonce == t1.nonce + 1

    def test_expiry_window(self, state, clock):
        token = gw.issue_token(state, STANDARD_APP, frozenset({F.EMAIL}))
        assert token.issued_at == clock.now()
        assert token.expires_at == clock.now() + 30

    def test_rotation_persists_and_invalidates_old_tokens(
        self, manifest_file, root_key, pim, clock, tmp_path
    ):
        ks = KeyStore(str(tmp_path / "keys"))
        state = boot(manifest_file, root_key.public_key(), pim, clock, keystore=ks)
        token = gw.issue_token(state, STANDARD_APP, frozenset({F.EMAIL}))
        state.rotate()
        assert state.epoch.epoch == 2
        from udss import tokens
        from udss.errors import EpochMismatchError

        with pytest.raises(EpochMismatchError):
            tokens.verify_signature(token, state.epoch.epoch, state.epoch.public_key())
        # restart picks up the rotated epoch
        state2 = boot(manifest_file, root_key.public_key(), PimStore(), clock, keystore=ks)
        assert state2.epoch.epoch == 2
