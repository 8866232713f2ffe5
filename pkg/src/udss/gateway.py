"""Privacy Gateway: the trusted arbiter of the request-consent-fulfill loop.

Order of enforcement is fixed: manifest tier check, revocation gate,
contextual scope truncation, consent over the truncated set only, then
token issuance, vault extraction, and envelope sealing. Every request
leaves exactly one audit entry whatever its outcome, and no error path
carries PII.
"""

import os
import threading
from dataclasses import dataclass
from typing import Callable

from . import ledger as ledger_mod
from . import manifest as manifest_mod
from . import pim as pim_mod
from . import tokens
from .clock import Clock, SystemClock
from .envelope import (
    ENVELOPE_MAX_BYTES,
    FulfillmentEnvelope,
    GatewayKeyEpoch,
    envelope_size,
    new_epoch,
    rotate_keys,
    seal,
)
from .errors import (
    AuthorizationRevokedError,
    ConsentDeniedError,
    EmptyPayloadError,
    FatalBootError,
    PayloadTooLargeError,
    UdssError,
    UnknownAppError,
    wire_code,
)
from .keystore import KeyStore
from .manifest import TrustState, verify_at_boot
from .pim import PimStore
from .schema import RequestContext, ScopeSet, enforce_cse, scope_names
from .tokens import ScopeToken

#: Seconds a consent prompt stays answerable before the transaction
#: fails with ConsentDenied.
CONSENT_TIMEOUT_SECONDS = 120


@dataclass(frozen=True)
class IdentityRequest:
    app_id: str
    context: RequestContext
    requested_scopes: ScopeSet


@dataclass(frozen=True)
class ConsentDecision:
    approved: bool
    #: Echo of what was shown: always the CSE-truncated set.
    decided_scopes: ScopeSet


#: Consent agents receive (appId, context, truncated scopes, deadline)
#: and answer with a decision. Implementations: scripted agent
#: (harness), terminal prompt (CLI), dashboard bridge.
ConsentAgent = Callable[[str, RequestContext, ScopeSet, int], ConsentDecision]


class GatewayState:
    def __init__(
        self,
        trust: TrustState,
        epoch: GatewayKeyEpoch,
        pim: PimStore,
        clock: Clock,
        keystore: KeyStore | None = None,
    ):
        self.trust = trust
        self.epoch = epoch
        self.pim = pim
        self.clock = clock
        self.keystore = keystore
        #: Single logical serialization point: one transaction at a
        #: time reaches token issuance, mirroring the TEE arbiter.
        self.enforcement_lock = threading.RLock()

    def rotate(self) -> GatewayKeyEpoch:
        with self.enforcement_lock:
            self.epoch = rotate_keys(self.epoch, self.clock)
            if self.keystore is not None:
                self.keystore.save_epoch(self.epoch)
            return self.epoch


def boot(
    manifest_path: str,
    root_public_key,
    pim: PimStore,
    clock: Clock | None = None,
    keystore: KeyStore | None = None,
) -> GatewayState:
    """Establish trust state and signing epoch; refuse to serve without
    a manifest or with a corrupt key store."""
    clock = clock or SystemClock()
    if not os.path.exists(manifest_path):
        raise FatalBootError(f"manifest file not found: {manifest_path}")
    with open(manifest_path, "rb") as fh:
        document = fh.read()
    trust = verify_at_boot(document, root_public_key)
    if keystore is not None:
        epoch = keystore.load_or_create_epoch(clock)
    else:
        epoch = new_epoch(1, clock.now())
    state = GatewayState(trust, epoch, pim, clock, keystore)
    if trust.degraded:
        pim.append(
            clock.now(), "", None, [], [], ledger_mod.outcome_error(4007)
        )
    return state


def issue_token(state: GatewayState, app_id: str, scopes: ScopeSet) -> ScopeToken:
    """Mint a signed token over CSE output; the nonce counter persists
    in the vault so monotonicity survives restarts."""
    nonce = state.pim.next_issue_nonce(app_id)
    return tokens.issue(
        app_id=app_id,
        scopes=scopes,
        nonce=nonce,
        issued_at=state.clock.now(),
        key_epoch=state.epoch.epoch,
        signing_key=state.epoch.signing_key,
    )


def handle_request(
    state: GatewayState, request: IdentityRequest, consent: ConsentAgent
) -> FulfillmentEnvelope:
    """Run one identity transaction end to end.

    Raises a coded UdssError on any rejection; the caller (wire layer)
    translates it into an error frame that carries no PII.
    """
    with state.enforcement_lock:
        now = state.clock.now()
        requested = scope_names(request.requested_scopes)
        ctx = request.context.value

        def log(outcome: str, authorized: list[str] | None = None) -> None:
            state.pim.append(
                now, request.app_id, ctx, requested, authorized or [], outcome
            )

        try:
            tier = manifest_mod.lookup_tier(state.trust, request.app_id)
        except UnknownAppError:
            log(ledger_mod.outcome_error(4001))
            raise
        if state.pim.is_revoked(request.app_id):
            log(ledger_mod.outcome_error(4004))
            raise AuthorizationRevokedError(
                f"authorization revoked for {request.app_id!r}; re-consent required"
            )
        try:
            authorized = enforce_cse(tier, request.context, request.requested_scopes)
        except UdssError as exc:
            log(ledger_mod.outcome_error(wire_code(exc)))
            raise
        deadline = now + CONSENT_TIMEOUT_SECONDS
        decision = consent(request.app_id, request.context, authorized, deadline)
        if state.clock.now() > deadline or not decision.approved:
            log(ledger_mod.OUTCOME_DENIED, scope_names(authorized))
            raise ConsentDeniedError(
                f"consent not granted for {request.app_id!r}"
            )
        # Fulfillment is atomic against concurrent vault mutations
        # (profile edits, revocations land before or after, never
        # inside). The preflight guarantees seal succeeds, so the
        # transaction leaves exactly one audit entry.
        with state.pim.lock:
            candidate = {
                f: state.pim.profile[f] for f in authorized if f in state.pim.profile
            }
            if not candidate:
                log(ledger_mod.outcome_error(4000), scope_names(authorized))
                raise EmptyPayloadError(
                    "no authorized field has a profile value; nothing to fulfill"
                )
            size = envelope_size(candidate, request.app_id, state.epoch.epoch)
            if size >= ENVELOPE_MAX_BYTES:
                log(ledger_mod.outcome_error(4000), scope_names(authorized))
                raise PayloadTooLargeError(
                    f"fulfillment would serialize to {size} bytes"
                )
            token = issue_token(state, request.app_id, authorized)
            # extract appends the Granted entry for this presentation;
            # it re-checks revocation, covering a revoke that landed
            # during the consent wait.
            payload = pim_mod.extract(
                state.pim,
                token,
                state.clock,
                state.epoch.epoch,
                state.epoch.public_key(),
                context=ctx,
                requested_scopes=requested,
            )
            entry = manifest_mod.lookup_entry(state.trust, request.app_id)
            return seal(payload, entry, state.epoch)


def revoke_app(state: GatewayState, app_id: str):
    """Dashboard/CLI revocation; unknown apps are rejected, not stored."""
    manifest_mod.lookup_entry(state.trust, app_id)
    return state.pim.revoke(app_id, state.clock)


def re_consent_app(state: GatewayState, app_id: str) -> None:
    manifest_mod.lookup_entry(state.trust, app_id)
    state.pim.re_consent(app_id, state.clock)
