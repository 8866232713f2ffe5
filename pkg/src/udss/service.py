"""Local service endpoint for the identity-sharing API.

Listens on a stream socket (UNIX path or TCP pair). App connections
submit identity requests; a single authenticated operator connection
receives consent events and performs user actions (decide, revoke,
profile edits, ledger queries). The operator secret is generated at
boot and written mode-restricted; apps never see it, which is what
makes consent unspoofable here.

All identity transactions funnel through the gateway's enforcement
lock; ledger reads and consent decisions bypass it so a pending prompt
never blocks them.
"""

import logging
import os
import socket
import threading
import time

from . import gateway as gw
from . import wire
from .errors import ProtocolError, UdssError
from .gateway import ConsentDecision, GatewayState
from .schema import PiiField, RequestContext, parse_field, policy_table, scope_names

logger = logging.getLogger(__name__)

#: Real-time ceiling on a consent wait, independent of the injected
#: clock, so an abandoned prompt cannot wedge the enforcement queue.
REAL_CONSENT_WAIT_SECONDS = 120.0
_POLL_INTERVAL = 0.02

BindAddress = str | tuple[str, int]


class _PendingConsent:
    def __init__(self, transaction_id, app_id, context, scopes, deadline):
        self.transaction_id = transaction_id
        self.app_id = app_id
        self.context = context
        self.scopes = scopes
        self.deadline = deadline
        self.event = threading.Event()
        self.approved = False

    def to_event_message(self) -> dict:
        return {
            "messageType": wire.MSG_CONSENT_EVENT,
            "transactionId": self.transaction_id,
            "appId": self.app_id,
            "context": self.context.value,
            "truncatedScopes": scope_names(self.scopes),
            "deadline": self.deadline,
        }


class UdssService:
    """Socket front-end over a booted gateway."""

    def __init__(
        self,
        state: GatewayState,
        bind: BindAddress,
        operator_secret: str,
        consent_agent=None,
    ):
        self.state = state
        self.bind = bind
        self.operator_secret = operator_secret
        #: Optional scripted consent agent; when None, consent is
        #: bridged to the attached operator connection.
        self.consent_agent = consent_agent
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self._operator_lock = threading.Lock()
        self._operator_conn = None
        self._pending_lock = threading.Lock()
        self._pending: dict[str, _PendingConsent] = {}
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()

    # -- lifecycle -------------------------------------------------------

    def start(self) -> None:
        if isinstance(self.bind, str):
            if os.path.exists(self.bind):
                os.unlink(self.bind)
            listener = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            listener.bind(self.bind)
        else:
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind(self.bind)
        listener.listen(16)
        listener.settimeout(0.2)
        self._listener = listener
        thread = threading.Thread(target=self._accept_loop, daemon=True)
        thread.start()
        self._threads.append(thread)

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            self._listener.close()
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        if isinstance(self.bind, str) and os.path.exists(self.bind):
            os.unlink(self.bind)
        for thread in self._threads:
            thread.join(timeout=2)

    @property
    def address(self) -> BindAddress:
        if isinstance(self.bind, str):
            return self.bind
        assert self._listener is not None
        return self._listener.getsockname()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            thread = threading.Thread(
                target=self._serve_connection, args=(conn,), daemon=True
            )
            thread.start()
            self._threads.append(thread)

    # -- connection handling ----------------------------------------------

    def _serve_connection(self, conn: socket.socket) -> None:
        with self._conns_lock:
            self._conns.add(conn)
        reader = conn.makefile("rb")
        is_operator = False
        try:
            while not self._stop.is_set():
                try:
                    message = wire.read_frame(reader)
                except ProtocolError as exc:
                    self._send(conn, wire.error_frame(exc, None))
                    return
                except OSError:
                    return
                if message is None:
                    return
                message_type = message["messageType"]
                if message_type == wire.MSG_IDENTITY_REQUEST:
                    self._handle_identity(conn, message)
                elif message_type == wire.MSG_OPERATOR_ATTACH:
                    is_operator = self._handle_attach(conn, message)
                    if not is_operator:
                        return
                elif is_operator:
                    self._handle_operator_message(conn, message)
                else:
                    # apps have no handle to the consent surface
                    self._send(
                        conn,
                        wire.error_frame(
                            ProtocolError("operator channel requires attach"), None
                        ),
                    )
                    return
        finally:
            with self._conns_lock:
                self._conns.discard(conn)
            try:
                reader.close()
                conn.close()
            except OSError:
                pass
            if is_operator:
                self._detach_operator(conn)

    def _send(self, conn: socket.socket, message: dict) -> None:
        try:
            conn.sendall(wire.encode(message))
        except OSError:
            pass

    # -- app channel -------------------------------------------------------

    def _handle_identity(self, conn: socket.socket, message: dict) -> None:
        transaction_id = (
            message.get("transactionId")
            if isinstance(message.get("transactionId"), str)
            else None
        )
        try:
            parsed = wire.parse_identity_request(message)
        except UdssError as exc:
            self._send(conn, wire.error_frame(exc, transaction_id))
            return
        consent = self.consent_agent or self._operator_consent(parsed.transaction_id)
        try:
            envelope = gw.handle_request(self.state, parsed.request, consent)
        except UdssError as exc:
            self._send(conn, wire.error_frame(exc, parsed.transaction_id))
            return
        self._send(
            conn,
            {
                "messageType": wire.MSG_IDENTITY_FULFILLMENT,
                "transactionId": parsed.transaction_id,
                "envelope": envelope.to_document(),
            },
        )

    def _operator_consent(self, transaction_id: str):
        def consent(app_id, context, scopes, deadline) -> ConsentDecision:
            pending = _PendingConsent(transaction_id, app_id, context, scopes, deadline)
            with self._pending_lock:
                self._pending[transaction_id] = pending
            operator = self._operator_conn
            if operator is not None:
                self._send(operator, pending.to_event_message())
            started = time.monotonic()
            while (
                not pending.event.is_set()
                and self.state.clock.now() <= deadline
                and time.monotonic() - started < REAL_CONSENT_WAIT_SECONDS
                and not self._stop.is_set()
            ):
                pending.event.wait(_POLL_INTERVAL)
            with self._pending_lock:
                self._pending.pop(transaction_id, None)
            approved = pending.event.is_set() and pending.approved
            return ConsentDecision(approved=approved, decided_scopes=scopes)

        return consent

    # -- operator channel ---------------------------------------------------

    def _handle_attach(self, conn: socket.socket, message: dict) -> bool:
        secret = message.get("secret")
        if secret != self.operator_secret:
            logger.warning("operator attach rejected: bad secret")
            self._send(
                conn,
                {"messageType": wire.MSG_OPERATOR_DENIED, "reason": "bad secret"},
            )
            return False
        with self._operator_lock:
            if self._operator_conn is not None:
                logger.warning("operator attach rejected: surface already held")
                self._send(
                    conn,
                    {
                        "messageType": wire.MSG_OPERATOR_DENIED,
                        "reason": "consent surface already attached",
                    },
                )
                return False
            self._operator_conn = conn
        self._send(
            conn,
            {
                "messageType": wire.MSG_OPERATOR_ATTACHED,
                "trustMode": self.state.trust.mode.value,
            },
        )
        # deliver any prompt that was raised before the operator attached
        with self._pending_lock:
            pending = list(self._pending.values())
        for item in pending:
            self._send(conn, item.to_event_message())
        return True

    def _detach_operator(self, conn) -> None:
        with self._operator_lock:
            if self._operator_conn is conn:
                self._operator_conn = None

    def _handle_operator_message(self, conn: socket.socket, message: dict) -> None:
        message_type = message["messageType"]
        try:
            if message_type == wire.MSG_CONSENT_DECISION:
                self._operator_decide(conn, message)
            elif message_type == wire.MSG_LEDGER_EXPORT:
                self._send(
                    conn,
                    {
                        "messageType": wire.MSG_LEDGER_ENTRIES,
                        "entries": [
                            e.to_document() for e in self.state.pim.entries
                        ],
                        "chainHead": self.state.pim.chain_head,
                        "valid": self.state.pim.verify_ledger(),
                    },
                )
            elif message_type == wire.MSG_LEDGER_VERIFY:
                self._send(
                    conn,
                    {
                        "messageType": wire.MSG_LEDGER_STATUS,
                        "valid": self.state.pim.verify_ledger(),
                        "length": len(self.state.pim.entries),
                    },
                )
            elif message_type == wire.MSG_REVOKE_SET:
                # vault lock only: taking the enforcement lock here
                # would let a pending consent wait starve the operator
                # thread that must deliver the decision
                app_id = message.get("appId", "")
                active = bool(message.get("active"))
                if active:
                    gw.revoke_app(self.state, app_id)
                else:
                    gw.re_consent_app(self.state, app_id)
                self._send(
                    conn,
                    {
                        "messageType": wire.MSG_REVOKE_ACK,
                        "appId": app_id,
                        "active": active,
                    },
                )
            elif message_type == wire.MSG_APPS_LIST:
                apps = []
                for app_id, entry in sorted(self.state.trust.entries.items()):
                    apps.append(
                        {
                            "appId": app_id,
                            "tier": entry.tier.value,
                            "effectiveTier": (
                                "Standard"
                                if self.state.trust.degraded
                                else entry.tier.value
                            ),
                            "revoked": self.state.pim.is_revoked(app_id),
                        }
                    )
                self._send(
                    conn,
                    {
                        "messageType": wire.MSG_APPS_STATE,
                        "apps": apps,
                        "trustMode": self.state.trust.mode.value,
                    },
                )
            elif message_type == wire.MSG_PROFILE_GET:
                self._send(
                    conn,
                    {
                        "messageType": wire.MSG_PROFILE_STATE,
                        "values": {
                            f.value: v for f, v in self.state.pim.profile.items()
                        },
                    },
                )
            elif message_type == wire.MSG_PROFILE_SET:
                values = message.get("values", {})
                parsed = {parse_field(k): str(v) for k, v in values.items()}
                self.state.pim.load_profile(parsed)
                self._send(conn, {"messageType": wire.MSG_PROFILE_ACK})
            elif message_type == wire.MSG_PROFILE_PURGE:
                self.state.pim.purge(self.state.clock)
                self._send(conn, {"messageType": wire.MSG_PROFILE_ACK})
            elif message_type == wire.MSG_SCHEMA_TABLE:
                self._send(
                    conn,
                    {
                        "messageType": wire.MSG_SCHEMA_STATE,
                        "fields": policy_table(),
                    },
                )
            else:
                self._send(
                    conn,
                    wire.error_frame(
                        ProtocolError(f"unsupported operator op {message_type}"), None
                    ),
                )
        except UdssError as exc:
            self._send(conn, wire.error_frame(exc, None))
        except ValueError:
            self._send(
                conn, wire.error_frame(ProtocolError("invalid operator payload"), None)
            )

    def _operator_decide(self, conn: socket.socket, message: dict) -> None:
        transaction_id = message.get("transactionId")
        decision = message.get("decision")
        with self._pending_lock:
            pending = self._pending.get(transaction_id)
        if pending is None or self.state.clock.now() > pending.deadline:
            self._send(
                conn,
                {
                    "messageType": wire.MSG_CONSENT_ACK,
                    "transactionId": transaction_id,
                    "accepted": False,
                    "reason": "expired",
                },
            )
            return
        pending.approved = decision == "Approved"
        pending.event.set()
        self._send(
            conn,
            {
                "messageType": wire.MSG_CONSENT_ACK,
                "transactionId": transaction_id,
                "accepted": True,
            },
        )


# -- client helpers ---------------------------------------------------------


class WireClient:
    """Blocking frame client shared by apps, operators, and tests."""

    def __init__(self, address: BindAddress, timeout: float = 10.0):
        if isinstance(address, str):
            self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        else:
            self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.settimeout(timeout)
        self._sock.connect(address)
        self._reader = self._sock.makefile("rb")

    def send(self, message: dict) -> None:
        self._sock.sendall(wire.encode(message))

    def send_raw(self, data: bytes) -> None:
        self._sock.sendall(data)

    def read(self) -> dict | None:
        return wire.read_frame(self._reader)

    def read_raw_response(self) -> bytes:
        """One raw frame (header + body) for byte-level inspection."""
        header = self._reader.read(4)
        if not header or len(header) < 4:
            return header or b""
        (length,) = wire._HEADER.unpack(header)
        if length > wire.MAX_FRAME_BYTES:
            return header
        return header + self._reader.read(length)

    def request(self, message: dict) -> dict | None:
        self.send(message)
        return self.read()

    def close(self) -> None:
        try:
            self._reader.close()
            self._sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class AppClient(WireClient):
    def identity_request(
        self,
        app_id: str,
        context: RequestContext | str,
        scopes: list[str],
        transaction_id: str,
    ) -> dict | None:
        context_literal = (
            context.value if isinstance(context, RequestContext) else context
        )
        return self.request(
            {
                "messageType": wire.MSG_IDENTITY_REQUEST,
                "appId": app_id,
                "requestContext": context_literal,
                "requestedScopes": scopes,
                "transactionId": transaction_id,
            }
        )


class OperatorClient(WireClient):
    def attach(self, secret: str) -> dict | None:
        return self.request({"messageType": wire.MSG_OPERATOR_ATTACH, "secret": secret})

    def decide(self, transaction_id: str, approved: bool) -> None:
        self.send(
            {
                "messageType": wire.MSG_CONSENT_DECISION,
                "transactionId": transaction_id,
                "decision": "Approved" if approved else "Denied",
            }
        )


def open_profile_fields(values: dict) -> dict[PiiField, str]:
    return {parse_field(k): v for k, v in values.items()}


def serve(
    state: GatewayState,
    bind: BindAddress,
    operator_secret: str,
    consent_agent=None,
) -> UdssService:
    """Start a service over a booted gateway and return it."""
    service = UdssService(state, bind, operator_secret, consent_agent)
    service.start()
    return service
