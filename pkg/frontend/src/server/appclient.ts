/**
 * Minimal app-side client used by the integration tests: sends
 * identity requests over the socket and opens fulfillment envelopes
 * with the app's provisioned X25519 key.
 *
 * Envelope layout: AES-256-GCM over a compact field encoding, session
 * key wrapped via ephemeral X25519 + HKDF-SHA256, Ed25519 gateway
 * signature over the canonical envelope body.
 */

import * as crypto from "node:crypto";
import * as net from "node:net";

import { canonicalJson, type Json } from "../shared/canonical.js";
import { encodeFrame, FrameDecoder } from "./wire.js";

const FIELD_ORDER = [
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
] as const;

const PKCS8_X25519_PREFIX = Buffer.from(
  "302e020100300506032b656e04220420",
  "hex",
);
const SPKI_X25519_PREFIX = Buffer.from("302a300506032b656e032100", "hex");
const SPKI_ED25519_PREFIX = Buffer.from("302a300506032b6570032100", "hex");
const WRAP_INFO = Buffer.from("udss-envelope-key-wrap-v1");
const WRAP_NONCE = Buffer.alloc(12);

export interface EnvelopeDoc {
  header: { appId: string; enc: string; keyEpoch: number; sig: string };
  wrappedKey: string;
  nonce: string;
  ciphertext: string;
  authTag: string;
  signature: string;
}

export function x25519PrivateFromRaw(raw: Buffer): crypto.KeyObject {
  return crypto.createPrivateKey({
    key: Buffer.concat([PKCS8_X25519_PREFIX, raw]),
    format: "der",
    type: "pkcs8",
  });
}

export function ed25519PublicFromRaw(raw: Buffer): crypto.KeyObject {
  return crypto.createPublicKey({
    key: Buffer.concat([SPKI_ED25519_PREFIX, raw]),
    format: "der",
    type: "spki",
  });
}

function unwrapSessionKey(
  wrapped: Buffer,
  appPrivateKey: crypto.KeyObject,
): Buffer {
  if (wrapped.length !== 32 + 48) {
    throw new Error("wrapped key has unexpected length");
  }
  const ephemeralPub = crypto.createPublicKey({
    key: Buffer.concat([SPKI_X25519_PREFIX, wrapped.subarray(0, 32)]),
    format: "der",
    type: "spki",
  });
  const shared = crypto.diffieHellman({
    privateKey: appPrivateKey,
    publicKey: ephemeralPub,
  });
  const wrapKey = Buffer.from(
    crypto.hkdfSync("sha256", shared, Buffer.alloc(0), WRAP_INFO, 32),
  );
  const blob = wrapped.subarray(32);
  const decipher = crypto.createDecipheriv("aes-256-gcm", wrapKey, WRAP_NONCE);
  decipher.setAuthTag(blob.subarray(blob.length - 16));
  return Buffer.concat([
    decipher.update(blob.subarray(0, blob.length - 16)),
    decipher.final(),
  ]);
}

function decodePayload(raw: Buffer): Record<string, string> {
  if (raw.length === 0 || raw[0] !== 1) {
    throw new Error("unknown payload encoding version");
  }
  const payload: Record<string, string> = {};
  let i = 1;
  while (i < raw.length) {
    const index = raw[i]!;
    const length = raw[i + 1]!;
    i += 2;
    const field = FIELD_ORDER[index];
    if (field === undefined || i + length > raw.length) {
      throw new Error("malformed payload encoding");
    }
    payload[field] = raw.subarray(i, i + length).toString("utf-8");
    i += length;
  }
  return payload;
}

export function openEnvelope(
  doc: EnvelopeDoc,
  appPrivateKeyRaw: Buffer,
  epochPublicKeyRaw?: Buffer,
): Record<string, string> {
  const appKey = x25519PrivateFromRaw(appPrivateKeyRaw);
  const sessionKey = unwrapSessionKey(
    Buffer.from(doc.wrappedKey, "base64"),
    appKey,
  );
  const header: Json = {
    appId: doc.header.appId,
    enc: doc.header.enc,
    keyEpoch: doc.header.keyEpoch,
    sig: doc.header.sig,
  };
  const decipher = crypto.createDecipheriv(
    "aes-256-gcm",
    sessionKey,
    Buffer.from(doc.nonce, "base64"),
  );
  decipher.setAAD(Buffer.from(canonicalJson(header), "utf-8"));
  decipher.setAuthTag(Buffer.from(doc.authTag, "base64"));
  const plaintext = Buffer.concat([
    decipher.update(Buffer.from(doc.ciphertext, "base64")),
    decipher.final(),
  ]);
  if (epochPublicKeyRaw) {
    const signed: Json = {
      authTag: doc.authTag,
      ciphertext: doc.ciphertext,
      header,
      nonce: doc.nonce,
      wrappedKey: doc.wrappedKey,
    };
    const valid = crypto.verify(
      null,
      Buffer.from(canonicalJson(signed), "utf-8"),
      ed25519PublicFromRaw(epochPublicKeyRaw),
      Buffer.from(doc.signature, "base64"),
    );
    if (!valid) {
      throw new Error("envelope signature does not verify");
    }
  }
  return decodePayload(plaintext);
}

/** One-shot request/response frame client. */
export class AppSocket {
  private socket: net.Socket;
  private decoder = new FrameDecoder();
  private queue: Record<string, unknown>[] = [];
  private waiter: ((m: Record<string, unknown>) => void) | null = null;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on("data", (chunk) => {
      for (const message of this.decoder.push(Buffer.from(chunk))) {
        if (this.waiter) {
          const resolve = this.waiter;
          this.waiter = null;
          resolve(message);
        } else {
          this.queue.push(message);
        }
      }
    });
  }

  static connect(socketPath: string): Promise<AppSocket> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection(socketPath);
      socket.once("connect", () => resolve(new AppSocket(socket)));
      socket.once("error", reject);
    });
  }

  read(timeoutMs = 10_000): Promise<Record<string, unknown>> {
    if (this.queue.length > 0) {
      return Promise.resolve(this.queue.shift()!);
    }
    return new Promise((resolve, reject) => {
      this.waiter = resolve;
      setTimeout(() => {
        if (this.waiter === resolve) {
          this.waiter = null;
          reject(new Error("timed out waiting for frame"));
        }
      }, timeoutMs);
    });
  }

  request(message: Record<string, Json>): Promise<Record<string, unknown>> {
    this.socket.write(encodeFrame(message));
    return this.read();
  }

  identityRequest(
    appId: string,
    requestContext: "SIGN_IN" | "SIGN_UP",
    requestedScopes: string[],
    transactionId: string,
  ): Promise<Record<string, unknown>> {
    return this.request({
      messageType: "identity.request",
      appId,
      requestContext,
      requestedScopes,
      transactionId,
    });
  }

  close(): void {
    this.socket.destroy();
  }
}
