"""Process-private secure store simulation.

Stands in for hardware-backed key storage: a mode-restricted directory
holding the gateway's signing epoch, the vault encryption key, and the
operator-channel shared secret. Files are 0600; the directory is 0700.
"""

import base64
import json
import os
import secrets

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from .clock import Clock
from .envelope import GatewayKeyEpoch, new_epoch
from .errors import FatalBootError

EPOCH_FILE = "epoch.json"
EPOCH_PUBLIC_FILE = "epoch.pub.json"
STORE_KEY_FILE = "store.key"
OPERATOR_SECRET_FILE = "operator.secret"


class KeyStore:
    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, mode=0o700, exist_ok=True)

    def _path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    def _write_private(self, name: str, data: bytes) -> None:
        path = self._path(name)
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)

    # -- signing epoch ----------------------------------------------------

    def load_or_create_epoch(self, clock: Clock) -> GatewayKeyEpoch:
        path = self._path(EPOCH_FILE)
        if not os.path.exists(path):
            epoch = new_epoch(1, clock.now())
            self.save_epoch(epoch)
            return epoch
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            key = Ed25519PrivateKey.from_private_bytes(
                base64.b64decode(doc["signingKey"])
            )
            return GatewayKeyEpoch(
                epoch=doc["epoch"], signing_key=key, created_at=doc["createdAt"]
            )
        except Exception as exc:
            raise FatalBootError(f"gateway key store is corrupt: {exc}") from exc

    def save_epoch(self, epoch: GatewayKeyEpoch) -> None:
        doc = {
            "epoch": epoch.epoch,
            "createdAt": epoch.created_at,
            "signingKey": base64.b64encode(
                epoch.signing_key.private_bytes_raw()
            ).decode("ascii"),
        }
        self._write_private(EPOCH_FILE, json.dumps(doc).encode("utf-8"))
        # apps verify envelopes against the published epoch public key
        pub = {
            "epoch": epoch.epoch,
            "publicKey": base64.b64encode(
                epoch.public_key().public_bytes_raw()
            ).decode("ascii"),
        }
        with open(self._path(EPOCH_PUBLIC_FILE), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(pub))

    # -- vault encryption key ---------------------------------------------

    def load_or_create_store_key(self) -> bytes:
        path = self._path(STORE_KEY_FILE)
        if not os.path.exists(path):
            key = secrets.token_bytes(32)
            self._write_private(STORE_KEY_FILE, key)
            return key
        with open(path, "rb") as fh:
            key = fh.read()
        if len(key) != 32:
            raise FatalBootError("vault store key is corrupt")
        return key

    # -- operator channel secret -------------------------------------------

    def load_or_create_operator_secret(self) -> str:
        path = self._path(OPERATOR_SECRET_FILE)
        if not os.path.exists(path):
            secret = secrets.token_hex(32)
            self._write_private(OPERATOR_SECRET_FILE, secret.encode("ascii"))
            return secret
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().strip()
