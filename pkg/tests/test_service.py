import threading
import time

import pytest

from udss.envelope import envelope_from_document, open_envelope
from udss.gateway import ConsentDecision, boot
from udss.schema import PiiField
from udss.service import AppClient, OperatorClient, UdssService

from conftest import PREMIUM_APP, PROFILE, STANDARD_APP

SECRET = "test-operator-secret"
OVERREACH = ["email", "firstName", "lastName", "street", "dateOfBirth"]


def approve_all(app_id, ctx, scopes, deadline):
    return ConsentDecision(True, scopes)


@pytest.fixture
def state(manifest_file, root_key, pim, clock):
    return boot(manifest_file, root_key.public_key(), pim, clock)


@pytest.fixture
def scripted_service(state, tmp_path):
    service = UdssService(
        state, str(tmp_path / "udss.sock"), SECRET, consent_agent=approve_all
    )
    service.start()
    yield service
    service.stop()


@pytest.fixture
def operator_service(state, tmp_path):
    service = UdssService(state, str(tmp_path / "udss.sock"), SECRET)
    service.start()
    yield service
    service.stop()


class TestAppChannel:
    def test_request_yields_envelope(self, scripted_service, state, app_keys):
        with AppClient(scripted_service.address) as app:
            reply = app.identity_request(STANDARD_APP, "SIGN_IN", OVERREACH, "tx-1")
        assert reply["messageType"] == "identity.fulfillment"
        assert reply["transactionId"] == "tx-1"
        env = envelope_from_document(reply["envelope"])
        payload = open_envelope(env, app_keys[STANDARD_APP], state.epoch.public_key())
        assert payload == {PiiField.EMAIL: PROFILE[PiiField.EMAIL]}

    def test_unknown_app_gets_4001(self, scripted_service):
        with AppClient(scripted_service.address) as app:
            reply = app.identity_request("tv.nobody", "SIGN_IN", ["email"], "tx-2")
        assert reply == {
            "messageType": "error",
            "code": 4001,
            "name": "UnknownApp",
            "transactionId": "tx-2",
        }

    def test_wrong_case_field_gets_4002(self, scripted_service):
        with AppClient(scripted_service.address) as app:
            reply = app.identity_request(STANDARD_APP, "SIGN_IN", ["Email"], "tx-3")
        assert reply["code"] == 4002

    def test_malformed_frame_gets_protocol_error(self, scripted_service):
        with AppClient(scripted_service.address) as app:
            body = b"\x00\x01\x02"
            app.send_raw(len(body).to_bytes(4, "big") + body)
            reply = app.read()
        assert reply["messageType"] == "error"
        assert reply["code"] == 4000

    def test_fulfillment_frame_within_wire_bound(self, scripted_service, state):
        # full sign-up payload for a Premium app
        with AppClient(scripted_service.address) as app:
            app.send(
                {
                    "messageType": "identity.request",
                    "appId": PREMIUM_APP,
                    "requestContext": "SIGN_UP",
                    "requestedScopes": [f.value for f in PiiField],
                    "transactionId": "tx-4",
                }
            )
            raw = app.read_raw_response()
        assert len(raw) <= 1200 + 4

    def test_apps_cannot_reach_operator_ops(self, scripted_service):
        with AppClient(scripted_service.address) as app:
            reply = app.request({"messageType": "ledger.export"})
        assert reply["messageType"] == "error"


class TestOperatorChannel:
    def test_attach_with_bad_secret_rejected(self, operator_service):
        with OperatorClient(operator_service.address) as operator:
            reply = operator.attach("wrong")
        assert reply["messageType"] == "operator.attach.denied"

    def test_single_surface_mode(self, operator_service):
        first = OperatorClient(operator_service.address)
        assert first.attach(SECRET)["messageType"] == "operator.attached"
        second = OperatorClient(operator_service.address)
        assert second.attach(SECRET)["messageType"] == "operator.attach.denied"
        first.close()
        second.close()
        # detach frees the surface once the server notices the close
        for _ in range(50):
            third = OperatorClient(operator_service.address)
            reply = third.attach(SECRET)
            third.close()
            if reply["messageType"] == "operator.attached":
                break
            time.sleep(0.05)
        assert reply["messageType"] == "operator.attached"

    def test_live_consent_approval(self, operator_service, state, app_keys):
        operator = OperatorClient(operator_service.address)
        operator.attach(SECRET)

        replies = {}

        def run_app():
            with AppClient(operator_service.address) as app:
                replies["app"] = app.identity_request(
                    STANDARD_APP, "SIGN_IN", OVERREACH, "tx-9"
                )

        app_thread = threading.Thread(target=run_app)
        app_thread.start()
        event = operator.read()
        assert event["messageType"] == "consent.event"
        assert event["transactionId"] == "tx-9"
        assert event["truncatedScopes"] == ["email"]
        operator.decide("tx-9", approved=True)
        ack = operator.read()
        assert ack == {
            "messageType": "consent.ack",
            "transactionId": "tx-9",
            "accepted": True,
        }
        app_thread.join(timeout=5)
        reply = replies["app"]
        assert reply["messageType"] == "identity.fulfillment"
        env = envelope_from_document(reply["envelope"])
        assert open_envelope(env, app_keys[STANDARD_APP], state.epoch.public_key())
        operator.close()

    def test_live_consent_denial_is_4003(self, operator_service):
        operator = OperatorClient(operator_service.address)
        operator.attach(SECRET)
        replies = {}

        def run_app():
            with AppClient(operator_service.address) as app:
                replies["app"] = app.identity_request(
                    STANDARD_APP, "SIGN_IN", OVERREACH, "tx-10"
                )

        thread = threading.Thread(target=run_app)
        thread.start()
        operator.read()
        operator.decide("tx-10", approved=False)
        operator.read()
        thread.join(timeout=5)
        assert replies["app"]["code"] == 4003
        operator.close()

    def test_decision_after_deadline_rejected(self, operator_service, state, clock):
        operator = OperatorClient(operator_service.address)
        operator.attach(SECRET)
        replies = {}

        def run_app():
            with AppClient(operator_service.address) as app:
                replies["app"] = app.identity_request(
                    STANDARD_APP, "SIGN_IN", OVERREACH, "tx-11"
                )

        thread = threading.Thread(target=run_app)
        thread.start()
        event = operator.read()
        clock.advance(200)  # past the 120 s consent deadline
        operator.decide(event["transactionId"], approved=True)
        ack = operator.read()
        assert ack["accepted"] is False
        assert ack["reason"] == "expired"
        thread.join(timeout=5)
        assert replies["app"]["code"] == 4003
        operator.close()

    def test_concurrent_requests_serialized_consent(
        self, operator_service, state
    ):
        operator = OperatorClient(operator_service.address)
        operator.attach(SECRET)
        replies = {}

        def run_app(tx):
            with AppClient(operator_service.address) as app:
                replies[tx] = app.identity_request(
                    STANDARD_APP, "SIGN_IN", ["email"], tx
                )

        threads = [
            threading.Thread(target=run_app, args=(tx,)) for tx in ("tx-a", "tx-b")
        ]
        for t in threads:
            t.start()
        # consent events arrive one at a time; answer both
        for _ in range(2):
            event = operator.read()
            assert event["messageType"] == "consent.event"
            operator.decide(event["transactionId"], approved=True)
            ack = operator.read()
            assert ack["accepted"] is True
        for t in threads:
            t.join(timeout=5)
        assert replies["tx-a"]["messageType"] == "identity.fulfillment"
        assert replies["tx-b"]["messageType"] == "identity.fulfillment"
        assert replies["tx-a"]["transactionId"] == "tx-a"
        assert replies["tx-b"]["transactionId"] == "tx-b"
        operator.close()

    def test_revoke_toggle_via_operator(self, operator_service, scripted_consent=None):
        operator = OperatorClient(operator_service.address)
        operator.attach(SECRET)
        ack = operator.request(
            {"messageType": "revoke.set", "appId": STANDARD_APP, "active": True}
        )
        assert ack == {
            "messageType": "revoke.ack",
            "appId": STANDARD_APP,
            "active": True,
        }
        with AppClient(operator_service.address) as app:
            reply = app.identity_request(STANDARD_APP, "SIGN_IN", ["email"], "tx-12")
        assert reply["code"] == 4004
        # re-grant
        operator.request(
            {"messageType": "revoke.set", "appId": STANDARD_APP, "active": False}
        )
        apps_state = operator.request({"messageType": "apps.list"})
        row = next(
            a for a in apps_state["apps"] if a["appId"] == STANDARD_APP
        )
        assert row["revoked"] is False
        operator.close()

    def test_ledger_and_profile_and_schema_ops(self, operator_service, state):
        operator = OperatorClient(operator_service.address)
        operator.attach(SECRET)
        status = operator.request({"messageType": "ledger.verify"})
        assert status["valid"] is True
        exported = operator.request({"messageType": "ledger.export"})
        assert exported["chainHead"] == state.pim.chain_head
        profile = operator.request({"messageType": "profile.get"})
        assert profile["values"]["email"] == PROFILE[PiiField.EMAIL]
        schema_state = operator.request({"messageType": "schema.table"})
        assert len(schema_state["fields"]) == 10
        ack = operator.request(
            {"messageType": "profile.set", "values": {"city": "Lakeview"}}
        )
        assert ack["messageType"] == "profile.ack"
        assert state.pim.profile[PiiField.CITY] == "Lakeview"
        operator.request({"messageType": "profile.purge"})
        assert state.pim.profile == {}
        operator.close()

    def test_prompt_delivered_to_late_attaching_operator(self, operator_service):
        replies = {}

        def run_app():
            with AppClient(operator_service.address) as app:
                replies["app"] = app.identity_request(
                    STANDARD_APP, "SIGN_IN", ["email"], "tx-late"
                )

        thread = threading.Thread(target=run_app)
        thread.start()
        time.sleep(0.2)  # request is already waiting on consent
        operator = OperatorClient(operator_service.address)
        operator.attach(SECRET)
        event = operator.read()
        assert event["transactionId"] == "tx-late"
        operator.decide("tx-late", approved=True)
        thread.join(timeout=5)
        assert replies["app"]["messageType"] == "identity.fulfillment"
        operator.close()
