import json
import random

import pytest
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from udss import pim as pim_mod
from udss import tokens
from udss.clock import LogicalClock
from udss.errors import (
    AuthorizationRevokedError,
    FatalBootError,
    ReplayDetectedError,
    TokenExpiredError,
)
from udss.ledger import (
    GENESIS_HASH,
    append_entry,
    entry_from_document,
    export_ledger,
    verify_chain,
)
from udss.pim import PimStore
from udss.schema import PiiField

from conftest import PROFILE


@pytest.fixture
def signing_key():
    return Ed25519PrivateKey.generate()


def make_token(signing_key, scopes=frozenset({PiiField.EMAIL}), nonce=1, issued_at=1000):
    return tokens.issue("app.a", scopes, nonce, issued_at, 1, signing_key)


class TestExtract:
    def test_honest_extraction(self, pim, clock, signing_key):
        token = make_token(signing_key)
        clock.advance(10)  # now = 1010, expires 1030
        payload = pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        assert payload == {PiiField.EMAIL: PROFILE[PiiField.EMAIL]}
        assert pim.entries[-1].outcome == "Granted"
        assert pim.entries[-1].authorized_scopes == ("email",)

    def test_replay_rejected_on_second_presentation(self, pim, clock, signing_key):
        token = make_token(signing_key)
        pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        with pytest.raises(ReplayDetectedError):
            pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        assert pim.entries[-1].outcome == "Error(4006)"

    def test_expiry_boundary_inclusive(self, pim, signing_key):
        clock = LogicalClock(start=1030)  # now == expiresAt
        token = make_token(signing_key)
        payload = pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        assert payload

    def test_expired_one_second_past_boundary(self, pim, signing_key):
        clock = LogicalClock(start=1031)
        token = make_token(signing_key)
        with pytest.raises(TokenExpiredError):
            pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        assert pim.entries[-1].outcome == "Error(4005)"

    def test_nonce_strictly_increasing_across_tokens(self, pim, clock, signing_key):
        t1 = make_token(signing_key, nonce=1)
        t2 = make_token(signing_key, nonce=2)
        pim_mod.extract(pim, t2, clock, 1, signing_key.public_key())
        # older nonce after newer one consumed -> replay
        with pytest.raises(ReplayDetectedError):
            pim_mod.extract(pim, t1, clock, 1, signing_key.public_key())

    def test_absent_fields_omitted_and_noted(self, clock, signing_key):
        store = PimStore()
        store.load_profile({PiiField.EMAIL: "a@b.c"})
        token = make_token(
            signing_key, scopes=frozenset({PiiField.EMAIL, PiiField.GENDER})
        )
        payload = pim_mod.extract(store, token, clock, 1, signing_key.public_key())
        assert payload == {PiiField.EMAIL: "a@b.c"}
        entry = store.entries[-1]
        assert entry.absent_scopes == ("gender",)
        assert entry.authorized_scopes == ("email",)


class TestRevocation:
    def test_revoked_app_gets_4004(self, pim, clock, signing_key):
        pim.revoke("app.a", clock)
        token = make_token(signing_key)
        with pytest.raises(AuthorizationRevokedError):
            pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        outcomes = [e.outcome for e in pim.entries]
        assert "Revoked" in outcomes
        assert outcomes[-1] == "Error(4004)"

    def test_other_apps_unaffected(self, pim, clock, signing_key):
        pim.revoke("app.other", clock)
        token = make_token(signing_key)
        assert pim_mod.extract(pim, token, clock, 1, signing_key.public_key())

    def test_re_consent_clears_gate(self, pim, clock, signing_key):
        pim.revoke("app.a", clock)
        pim.re_consent("app.a", clock)
        token = make_token(signing_key)
        assert pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        assert pim.entries[-1].outcome == "Granted"


class TestPurge:
    def test_purge_empties_every_drawer(self, pim, clock, signing_key):
        before = len(pim.entries)
        pim.purge(clock)
        assert pim.profile == {}
        assert len(pim.entries) == before + 1
        assert pim.entries[-1].outcome == "Purged"

    def test_chain_verifies_after_purge(self, pim, clock):
        pim.purge(clock)
        assert pim.verify_ledger()

    def test_extraction_after_purge_yields_empty_map(self, pim, clock, signing_key):
        pim.purge(clock)
        token = make_token(
            signing_key, scopes=frozenset({PiiField.EMAIL, PiiField.PHONE})
        )
        payload = pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        assert payload == {}
        assert pim.entries[-1].absent_scopes == ("email", "phone")


def build_chain(n=50):
    chain = []
    for i in range(n):
        append_entry(
            chain,
            timestamp=1000 + i,
            app_id=f"app.{i % 3}",
            context="SIGN_IN" if i % 2 else "SIGN_UP",
            requested_scopes=["email", "gender"],
            authorized_scopes=["email"],
            outcome="Granted" if i % 4 else "Denied",
        )
    return chain


class TestChain:
    def test_untouched_chain_verifies(self):
        chain = build_chain(50)
        assert verify_chain(chain)
        assert verify_chain(chain, expected_head=chain[-1].entry_hash)

    def test_genesis_uses_zero_hash(self):
        chain = build_chain(1)
        assert chain[0].prev_hash == GENESIS_HASH

    def test_outcome_flip_detected(self):
        chain = build_chain(50)
        doc = chain[17].to_document()
        doc["outcome"] = "Denied" if doc["outcome"] == "Granted" else "Granted"
        chain[17] = entry_from_document(doc)
        assert not verify_chain(chain)

    def test_middle_deletion_detected(self):
        chain = build_chain(50)
        del chain[20]
        assert not verify_chain(chain)

    def test_tail_deletion_detected_with_anchored_head(self):
        chain = build_chain(50)
        head = chain[-1].entry_hash
        del chain[-1]
        assert verify_chain(chain)  # bare chain cannot see truncation
        assert not verify_chain(chain, expected_head=head)

    def test_random_mutations_detected(self):
        rng = random.Random(7)
        original = build_chain(40)
        head = original[-1].entry_hash
        for _ in range(200):
            chain = list(original)
            kind = rng.choice(["edit", "delete", "insert", "reorder"])
            i = rng.randrange(len(chain))
            if kind == "edit":
                doc = chain[i].to_document()
                field = rng.choice(
                    ["timestamp", "appId", "outcome", "requestedScopes", "prevHash"]
                )
                if field == "timestamp":
                    doc[field] += 1
                elif field == "requestedScopes":
                    doc[field] = doc[field] + ["phone"]
                elif field == "prevHash":
                    doc[field] = "f" * 64
                else:
                    doc[field] = doc[field] + "x"
                chain[i] = entry_from_document(doc)
            elif kind == "delete":
                del chain[i]
            elif kind == "insert":
                chain.insert(i, original[rng.randrange(len(original))])
            else:
                j = rng.randrange(len(chain))
                if i == j:
                    j = (j + 1) % len(chain)
                chain[i], chain[j] = chain[j], chain[i]
            assert not verify_chain(chain, expected_head=head)

    def test_export_is_pii_free_ndjson(self, pim, clock, signing_key):
        token = make_token(signing_key)
        pim_mod.extract(pim, token, clock, 1, signing_key.public_key())
        exported = pim.export_ledger()
        lines = exported.splitlines()
        assert len(lines) == len(pim.entries)
        for line in lines:
            json.loads(line)
        for value in PROFILE.values():
            assert value not in exported


class TestPersistence:
    def test_encrypted_store_roundtrip(self, tmp_path, clock, signing_key):
        path = str(tmp_path / "vault.bin")
        key = b"k" * 32
        store = PimStore(path, key)
        store.load_profile(dict(PROFILE))
        token = make_token(signing_key)
        pim_mod.extract(store, token, clock, 1, signing_key.public_key())
        store.revoke("app.b", clock)

        reopened = PimStore(path, key)
        assert reopened.profile == PROFILE
        assert reopened.consumed_nonces == {"app.a": 1}
        assert reopened.is_revoked("app.b")
        assert reopened.verify_ledger()
        assert len(reopened.entries) == len(store.entries)

    def test_file_is_encrypted_at_rest(self, tmp_path, clock):
        path = str(tmp_path / "vault.bin")
        store = PimStore(path, b"k" * 32)
        store.load_profile(dict(PROFILE))
        raw = (tmp_path / "vault.bin").read_bytes()
        for value in PROFILE.values():
            assert value.encode() not in raw

    def test_corrupt_store_is_fatal(self, tmp_path):
        path = tmp_path / "vault.bin"
        store = PimStore(str(path), b"k" * 32)
        store.load_profile(dict(PROFILE))
        raw = bytearray(path.read_bytes())
        raw[20] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FatalBootError):
            PimStore(str(path), b"k" * 32)

    def test_nonce_monotonicity_survives_restart(self, tmp_path, clock):
        path = str(tmp_path / "vault.bin")
        key = b"k" * 32
        store = PimStore(path, key)
        assert store.next_issue_nonce("app.a") == 1
        assert store.next_issue_nonce("app.a") == 2
        reopened = PimStore(path, key)
        assert reopened.next_issue_nonce("app.a") == 3
