/**
 * Frame codec for the middleware socket: 4-byte big-endian length
 * prefix followed by canonical JSON. Node side only; the browser
 * never speaks frames directly.
 */

import { canonicalJson, type Json } from "../shared/canonical.js";

export const MAX_FRAME_BYTES = 64 * 1024;

export function encodeFrame(message: Record<string, Json>): Buffer {
  const body = Buffer.from(canonicalJson(message), "utf-8");
  if (body.length > MAX_FRAME_BYTES) {
    throw new Error(`frame body of ${body.length} bytes exceeds cap`);
  }
  const header = Buffer.alloc(4);
  header.writeUInt32BE(body.length, 0);
  return Buffer.concat([header, body]);
}

/** Incremental frame reader over a byte stream. */
export class FrameDecoder {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): Record<string, unknown>[] {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    const messages: Record<string, unknown>[] = [];
    for (;;) {
      if (this.buffer.length < 4) break;
      const length = this.buffer.readUInt32BE(0);
      if (length > MAX_FRAME_BYTES) {
        throw new Error(`declared frame length ${length} exceeds cap`);
      }
      if (this.buffer.length < 4 + length) break;
      const body = this.buffer.subarray(4, 4 + length);
      this.buffer = this.buffer.subarray(4 + length);
      const parsed = JSON.parse(body.toString("utf-8"));
      if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
        throw new Error("frame body must be a JSON object");
      }
      messages.push(parsed as Record<string, unknown>);
    }
    return messages;
  }
}
