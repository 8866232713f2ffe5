import hashlib

import pytest
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from udss.clock import LogicalClock
from udss.manifest import ManifestEntry, provision_manifest
from udss.pim import PimStore
from udss.schema import AccessTier, PiiField

STANDARD_APP = "tv.example.weather"
PREMIUM_APP = "tv.example.video"

PROFILE = {
    PiiField.FIRST_NAME: "Avery",
    PiiField.LAST_NAME: "Okafor",
    PiiField.EMAIL: "avery.okafor@example.com",
    PiiField.PHONE: "+1-555-0142",
    PiiField.STREET: "12 Harbor Lane",
    PiiField.CITY: "Springfield",
    PiiField.ZIP: "49007",
    PiiField.COUNTRY: "US",
    PiiField.GENDER: "nonbinary",
    PiiField.DATE_OF_BIRTH: "1987-04-12",
}


def fingerprint(public_key_bytes: bytes) -> str:
    return hashlib.sha256(public_key_bytes).hexdigest()


@pytest.fixture
def root_key():
    return Ed25519PrivateKey.generate()


@pytest.fixture
def app_keys():
    return {
        STANDARD_APP: X25519PrivateKey.generate(),
        PREMIUM_APP: X25519PrivateKey.generate(),
    }


@pytest.fixture
def entries(app_keys):
    def entry(app_id, tier):
        pub = app_keys[app_id].public_key().public_bytes_raw()
        return ManifestEntry(
            app_id=app_id,
            tier=tier,
            app_public_key=pub,
            cert_fingerprint=fingerprint(pub),
        )

    return [
        entry(STANDARD_APP, AccessTier.STANDARD),
        entry(PREMIUM_APP, AccessTier.PREMIUM),
    ]


@pytest.fixture
def signed_manifest(entries, root_key):
    return provision_manifest(entries, version=1, issued_at=1000, root_private_key=root_key)


@pytest.fixture
def clock():
    return LogicalClock(start=1000)


@pytest.fixture
def pim(clock):
    store = PimStore()
    store.load_profile(dict(PROFILE))
    return store


@pytest.fixture
def manifest_file(tmp_path, signed_manifest):
    path = tmp_path / "manifest.json"
    path.write_bytes(signed_manifest.to_bytes())
    return str(path)
