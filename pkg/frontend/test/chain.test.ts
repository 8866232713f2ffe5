import { describe, expect, it } from "vitest";

import { entryHash, verifyChain } from "../src/shared/chain.js";
import type { AuditEntryDoc } from "../src/shared/types.js";
import fixtures from "./fixtures.json" with { type: "json" };

const chain = fixtures.chain as AuditEntryDoc[];
const head = fixtures.chainHead as string;

describe("audit chain verification", () => {
  it("verifies a chain produced by the middleware", async () => {
    const check = await verifyChain(chain, head);
    expect(check).toEqual({ valid: true, length: chain.length });
  });

  it("recomputes each entry hash identically", async () => {
    for (const entry of chain) {
      expect(await entryHash(entry)).toBe(entry.entryHash);
    }
  });

  it("detects an outcome flip", async () => {
    const tampered = chain.map((entry) => ({ ...entry }));
    tampered[2]!.outcome = tampered[2]!.outcome === "Granted" ? "Denied" : "Granted";
    const check = await verifyChain(tampered, head);
    expect(check.valid).toBe(false);
    expect(check.failedAt).toBe(2);
  });

  it("detects a middle deletion", async () => {
    const truncated = [...chain.slice(0, 3), ...chain.slice(4)];
    expect((await verifyChain(truncated, head)).valid).toBe(false);
  });

  it("detects tail truncation via the anchored head", async () => {
    const truncated = chain.slice(0, chain.length - 1);
    expect((await verifyChain(truncated)).valid).toBe(true);
    expect((await verifyChain(truncated, head)).valid).toBe(false);
  });

  it("detects reordering", async () => {
    const swapped = [...chain];
    [swapped[1], swapped[3]] = [swapped[3]!, swapped[1]!];
    expect((await verifyChain(swapped, head)).valid).toBe(false);
  });

  it("accepts the empty chain with the genesis head", async () => {
    expect((await verifyChain([], "0".repeat(64))).valid).toBe(true);
  });
});
