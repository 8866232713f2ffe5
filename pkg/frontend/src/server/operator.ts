/**
 * Operator-channel client over the middleware's local socket.
 *
 * Holds the single consent surface: attaches with the boot secret,
 * receives consent events as they happen, and issues user actions
 * (decisions, revocation toggles, profile edits, ledger queries).
 * Operations are serialized so responses correlate to the one
 * outstanding request; consent events may interleave at any time and
 * are fanned out to listeners.
 */

import * as net from "node:net";
import { EventEmitter } from "node:events";

import { encodeFrame, FrameDecoder } from "./wire.js";
import type { Json } from "../shared/canonical.js";
import type { ConsentEventMsg } from "../shared/types.js";

export class OperatorError extends Error {}

export class OperatorChannel extends EventEmitter {
  private socket: net.Socket | null = null;
  private decoder = new FrameDecoder();
  private pending: ((message: Record<string, unknown>) => void) | null = null;
  private opQueue: Promise<unknown> = Promise.resolve();
  attached = false;
  trustMode: string | null = null;

  constructor(private socketPath: string) {
    super();
  }

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection(this.socketPath);
      socket.once("connect", () => {
        this.socket = socket;
        resolve();
      });
      socket.once("error", reject);
      socket.on("data", (chunk) => this.onData(Buffer.from(chunk)));
      socket.on("close", () => {
        this.attached = false;
        this.emit("closed");
      });
    });
  }

  private onData(chunk: Buffer): void {
    let messages: Record<string, unknown>[];
    try {
      messages = this.decoder.push(chunk);
    } catch (err) {
      this.emit("error", err);
      this.socket?.destroy();
      return;
    }
    for (const message of messages) {
      if (message.messageType === "consent.event") {
        this.emit("consent", message as unknown as ConsentEventMsg);
      } else if (this.pending) {
        const resolve = this.pending;
        this.pending = null;
        resolve(message);
      } else {
        // unsolicited non-event frame; surface for diagnostics
        this.emit("stray", message);
      }
    }
  }

  /** Send one operation and await its response frame. */
  private op(message: Record<string, Json>): Promise<Record<string, unknown>> {
    const run = () =>
      new Promise<Record<string, unknown>>((resolve, reject) => {
        if (!this.socket || this.socket.destroyed) {
          reject(new OperatorError("operator channel is not connected"));
          return;
        }
        this.pending = resolve;
        this.socket.write(encodeFrame(message));
        setTimeout(() => {
          if (this.pending === resolve) {
            this.pending = null;
            reject(new OperatorError("operator channel timed out"));
          }
        }, 10_000);
      });
    const next = this.opQueue.then(run, run);
    this.opQueue = next.catch(() => undefined);
    return next;
  }

  async attach(secret: string): Promise<void> {
    const reply = await this.op({ messageType: "operator.attach", secret });
    if (reply.messageType !== "operator.attached") {
      throw new OperatorError(
        `attach rejected: ${String(reply.reason ?? reply.messageType)}`,
      );
    }
    this.attached = true;
    this.trustMode = String(reply.trustMode ?? "");
  }

  async decide(
    transactionId: string,
    approved: boolean,
  ): Promise<{ accepted: boolean; reason?: string }> {
    const reply = await this.op({
      messageType: "consent.decision",
      transactionId,
      decision: approved ? "Approved" : "Denied",
    });
    return {
      accepted: Boolean(reply.accepted),
      reason: reply.reason ? String(reply.reason) : undefined,
    };
  }

  async setRevoked(appId: string, active: boolean): Promise<void> {
    const reply = await this.op({ messageType: "revoke.set", appId, active });
    if (reply.messageType === "error") {
      throw new OperatorError(`revoke failed: ${String(reply.name)}`);
    }
  }

  async apps(): Promise<Record<string, unknown>> {
    return this.op({ messageType: "apps.list" });
  }

  async schemaTable(): Promise<Record<string, unknown>> {
    return this.op({ messageType: "schema.table" });
  }

  async profile(): Promise<Record<string, unknown>> {
    return this.op({ messageType: "profile.get" });
  }

  async setProfile(values: Record<string, string>): Promise<void> {
    const reply = await this.op({ messageType: "profile.set", values });
    if (reply.messageType === "error") {
      throw new OperatorError(`profile update failed: ${String(reply.name)}`);
    }
  }

  async purge(): Promise<void> {
    await this.op({ messageType: "profile.purge" });
  }

  async ledger(): Promise<Record<string, unknown>> {
    return this.op({ messageType: "ledger.export" });
  }

  close(): void {
    this.socket?.destroy();
  }
}
