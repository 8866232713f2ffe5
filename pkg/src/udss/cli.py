"""Operator command line.

Subcommands map onto module operations: provision (manifest + keys),
serve (socket service), simulate (scenario runner), ledger verify /
export, revoke / re-consent, rotate-keys, bench, and consent-prompt
(terminal consent surface over the operator channel).
"""

import argparse
import base64
import hashlib
import json
import os
import sys

from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from . import gateway as gw
from .clock import SystemClock
from .errors import UdssError
from .harness import ScenarioScript, bench_overhead, builtin_scenarios, run_scenario, run_signup_mix
from .keystore import KeyStore
from .manifest import ManifestEntry, provision_manifest
from .pim import PimStore
from .schema import AccessTier
from .service import OperatorClient, UdssService

DEFAULT_SOCKET = os.environ.get("UDSS_SOCKET", "./udss.sock")


def _write_private(path: str, data: bytes) -> None:
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)


def _load_root_private(keys_dir: str) -> Ed25519PrivateKey:
    path = os.path.join(keys_dir, "root.key")
    if os.path.exists(path):
        with open(path, "rb") as fh:
            return Ed25519PrivateKey.from_private_bytes(base64.b64decode(fh.read()))
    key = Ed25519PrivateKey.generate()
    os.makedirs(keys_dir, mode=0o700, exist_ok=True)
    _write_private(path, base64.b64encode(key.private_bytes_raw()))
    with open(os.path.join(keys_dir, "root.pub"), "wb") as fh:
        fh.write(base64.b64encode(key.public_key().public_bytes_raw()))
    return key


def _load_root_public(keys_dir: str) -> Ed25519PublicKey:
    path = os.path.join(keys_dir, "root.pub")
    if not os.path.exists(path):
        raise SystemExit(f"root public key not found: {path} (run provision first)")
    with open(path, "rb") as fh:
        return Ed25519PublicKey.from_public_bytes(base64.b64decode(fh.read()))


def _app_key_path(keys_dir: str, app_id: str) -> str:
    return os.path.join(keys_dir, "apps", f"{app_id}.key")


def _load_or_create_app_key(keys_dir: str, app_id: str) -> X25519PrivateKey:
    path = _app_key_path(keys_dir, app_id)
    if os.path.exists(path):
        with open(path, "rb") as fh:
            return X25519PrivateKey.from_private_bytes(base64.b64decode(fh.read()))
    os.makedirs(os.path.dirname(path), mode=0o700, exist_ok=True)
    key = X25519PrivateKey.generate()
    _write_private(path, base64.b64encode(key.private_bytes_raw()))
    return key


def _manifest_version_path(keys_dir: str) -> str:
    return os.path.join(keys_dir, "manifest.version")


def cmd_provision(args) -> int:
    keys_dir = args.keys_dir
    root = _load_root_private(keys_dir)
    entries = []
    for spec in args.app:
        if ":" not in spec:
            raise SystemExit(f"--app expects appId:tier, got {spec!r}")
        app_id, tier_name = spec.rsplit(":", 1)
        try:
            tier = AccessTier(tier_name)
        except ValueError:
            raise SystemExit(f"unknown tier {tier_name!r} (Standard or Premium)")
        key = _load_or_create_app_key(keys_dir, app_id)
        pub = key.public_key().public_bytes_raw()
        entries.append(
            ManifestEntry(
                app_id=app_id,
                tier=tier,
                app_public_key=pub,
                cert_fingerprint=hashlib.sha256(pub).hexdigest(),
            )
        )
    version_path = _manifest_version_path(keys_dir)
    last_version = None
    if os.path.exists(version_path):
        last_version = int(open(version_path).read().strip())
    version = args.version if args.version else (last_version or 0) + 1
    try:
        manifest = provision_manifest(
            entries,
            version=version,
            issued_at=SystemClock().now(),
            root_private_key=root,
            last_issued_version=last_version,
        )
    except UdssError as exc:
        print(f"provisioning failed: {exc}", file=sys.stderr)
        return 1
    with open(args.manifest, "wb") as fh:
        fh.write(manifest.to_bytes())
    with open(version_path, "w") as fh:
        fh.write(str(version))
    print(f"manifest v{version} written to {args.manifest} ({len(entries)} apps)")
    print(f"root public key: {os.path.join(keys_dir, 'root.pub')}")
    print(f"app private keys under {os.path.join(keys_dir, 'apps')}/")
    return 0


def cmd_serve(args) -> int:
    keystore = KeyStore(args.keys_dir)
    clock = SystemClock()
    store_key = keystore.load_or_create_store_key()
    pim = PimStore(args.store, store_key)
    try:
        state = gw.boot(
            args.manifest, _load_root_public(args.keys_dir), pim, clock, keystore
        )
    except UdssError as exc:
        print(f"boot refused: {exc}", file=sys.stderr)
        return 1
    secret = keystore.load_or_create_operator_secret()
    service = UdssService(state, args.socket, secret)
    service.start()
    print(f"serving on {args.socket} (trust: {state.trust.mode.value})")
    print(f"operator secret file: {os.path.join(args.keys_dir, 'operator.secret')}")
    import threading

    stop = threading.Event()
    try:
        import signal

        signal.signal(signal.SIGINT, lambda *a: stop.set())
        signal.signal(signal.SIGTERM, lambda *a: stop.set())
    except ValueError:
        pass  # not the main thread (e.g. under test); rely on stop below
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


def _print_report(report, fmt: str) -> None:
    if fmt == "json":
        print(report.to_json())
    elif fmt == "csv":
        print("trial,fieldsExposed")
        for i, n in enumerate(report.per_trial_counts):
            print(f"{i},{n}")
    else:
        doc = report.to_document()
        print(f"scenario:  {doc['scenario']} [{doc['comparator']}]")
        print(f"workflow:  {doc['workflow']}")
        print(f"trials:    {doc['trials']}")
        print(
            f"mean PII fields exposed: {doc['meanFieldsExposed']} "
            f"({doc['meanFieldsExposedDecimal']})"
        )
        if doc["errorCounts"]:
            print(f"errors:    {doc['errorCounts']}")
        if doc["replayRejections"]:
            print(f"replays rejected: {doc['replayRejections']}")
        print(f"adversary-recovered fields: {doc['adversaryFields']}")


def cmd_simulate(args) -> int:
    if args.scenario == "signup-mix":
        reports = run_signup_mix()
        for name in ("UDSS", "Baseline"):
            _print_report(reports[name], args.format)
        return 0
    scenarios = builtin_scenarios()
    if args.scenario in scenarios:
        script = scenarios[args.scenario]
    elif os.path.exists(args.scenario):
        with open(args.scenario) as fh:
            script = ScenarioScript.from_document(json.load(fh))
    else:
        names = ", ".join(sorted(set(scenarios) | {"signup-mix"}))
        print(f"unknown scenario {args.scenario!r}; builtins: {names}", file=sys.stderr)
        return 1
    if args.trials:
        script = ScenarioScript(
            name=script.name,
            app_behaviors=script.app_behaviors,
            consent_policy=script.consent_policy,
            trials=args.trials,
            registry=script.registry,
        )
    targets = ["UDSS", "Baseline"] if args.target == "both" else [args.target]
    for target in targets:
        report, _ = run_scenario(script, target, seed=args.seed)
        _print_report(report, args.format)
    return 0


def _open_store(args) -> PimStore:
    keystore = KeyStore(args.keys_dir)
    return PimStore(args.store, keystore.load_or_create_store_key())


def cmd_ledger(args) -> int:
    store = _open_store(args)
    if args.ledger_command == "verify":
        ok = store.verify_ledger()
        print(f"ledger: {len(store.entries)} entries, chain {'valid' if ok else 'INVALID'}")
        return 0 if ok else 1
    print(store.export_ledger())
    return 0


def _store_gateway(args):
    store = _open_store(args)
    clock = SystemClock()
    state = gw.boot(args.manifest, _load_root_public(args.keys_dir), store, clock)
    return state


def cmd_revoke(args) -> int:
    try:
        state = _store_gateway(args)
        gw.revoke_app(state, args.app)
    except UdssError as exc:
        print(f"revoke failed: {exc}", file=sys.stderr)
        return 1
    print(f"revoked {args.app}; subsequent calls receive 4004 until re-consent")
    return 0


def cmd_re_consent(args) -> int:
    try:
        state = _store_gateway(args)
        gw.re_consent_app(state, args.app)
    except UdssError as exc:
        print(f"re-consent failed: {exc}", file=sys.stderr)
        return 1
    print(f"re-consent recorded for {args.app}; next request runs the full loop")
    return 0


def cmd_rotate_keys(args) -> int:
    from .envelope import rotate_keys

    keystore = KeyStore(args.keys_dir)
    clock = SystemClock()
    epoch = keystore.load_or_create_epoch(clock)
    rotated = rotate_keys(epoch, clock)
    keystore.save_epoch(rotated)
    print(f"signing epoch rotated: {epoch.epoch} -> {rotated.epoch}")
    return 0


def cmd_bench(args) -> int:
    report = bench_overhead(args.iterations)
    if args.format == "csv":
        print(report.to_csv())
    else:
        summary = report.summary()
        print(f"iterations: {summary['iterations']}")
        for column, mean in summary["means_ms"].items():
            sd = summary["stdev_ms"][column]
            print(f"{column:18s} mean {mean:8.3f} ms  sd {sd:7.3f} ms")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_csv())
        print(f"csv written to {args.out}", file=sys.stderr)
    return 0


def cmd_consent_prompt(args) -> int:
    if args.secret_file:
        secret = open(args.secret_file).read().strip()
    else:
        secret = open(os.path.join(args.keys_dir, "operator.secret")).read().strip()
    operator = OperatorClient(args.socket, timeout=3600)
    reply = operator.attach(secret)
    if reply is None or reply.get("messageType") != "operator.attached":
        print(f"attach rejected: {reply}", file=sys.stderr)
        return 1
    print(f"attached (trust: {reply.get('trustMode')}); waiting for consent events")
    try:
        while True:
            event = operator.read()
            if event is None:
                print("service closed the channel")
                return 0
            if event["messageType"] != "consent.event":
                continue
            print(
                f"\napp {event['appId']} requests {event['context']} with "
                f"fields: {', '.join(event['truncatedScopes'])}"
            )
            answer = input("approve? [y/N] ").strip().lower()
            operator.decide(event["transactionId"], approved=answer == "y")
            ack = operator.read()
            if ack and ack.get("accepted"):
                print("decision delivered")
            else:
                print(f"decision rejected: {ack}")
    except KeyboardInterrupt:
        return 0
    finally:
        operator.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="udss", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common_store(p):
        p.add_argument("--store", default="./udss-store.bin", help="vault store file")
        p.add_argument("--keys-dir", default="./udss-keys", help="secure store directory")

    p = sub.add_parser("provision", help="generate keys and sign a manifest")
    p.add_argument("--manifest", default="./manifest.json")
    p.add_argument("--keys-dir", default="./udss-keys")
    p.add_argument("--app", action="append", required=True, help="appId:tier (repeatable)")
    p.add_argument("--version", type=int, default=0, help="manifest version (default: bump)")
    p.set_defaults(func=cmd_provision)

    p = sub.add_parser("serve", help="run the gateway service")
    p.add_argument("--manifest", default="./manifest.json")
    common_store(p)
    p.add_argument("--socket", default=DEFAULT_SOCKET)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="run a scenario against UDSS and/or baseline")
    p.add_argument("--scenario", required=True, help="builtin name or JSON file")
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", choices=["UDSS", "Baseline", "both"], default="UDSS")
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ledger", help="audit ledger operations")
    p.add_argument("ledger_command", choices=["verify", "export"])
    common_store(p)
    p.set_defaults(func=cmd_ledger)

    p = sub.add_parser("revoke", help="revoke an app's authorization")
    p.add_argument("--app", required=True)
    p.add_argument("--manifest", default="./manifest.json")
    common_store(p)
    p.set_defaults(func=cmd_revoke)

    p = sub.add_parser("re-consent", help="clear a revocation")
    p.add_argument("--app", required=True)
    p.add_argument("--manifest", default="./manifest.json")
    common_store(p)
    p.set_defaults(func=cmd_re_consent)

    p = sub.add_parser("rotate-keys", help="advance the signing key epoch")
    p.add_argument("--keys-dir", default="./udss-keys")
    p.set_defaults(func=cmd_rotate_keys)

    p = sub.add_parser("bench", help="measure middleware overhead")
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--format", choices=["table", "csv"], default="table")
    p.add_argument("--out", default="", help="also write CSV here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("consent-prompt", help="terminal consent surface")
    p.add_argument("--socket", default=DEFAULT_SOCKET)
    p.add_argument("--keys-dir", default="./udss-keys")
    p.add_argument("--secret-file", default="")
    p.set_defaults(func=cmd_consent_prompt)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
