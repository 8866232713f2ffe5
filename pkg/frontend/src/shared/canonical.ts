/**
 * Canonical JSON: key-sorted, whitespace-free, UTF-8.
 *
 * Must produce byte-identical output to the middleware's serializer,
 * since ledger entry hashes are recomputed client-side over these
 * bytes. Keys in the schema are ASCII, so lexicographic sort agrees
 * across both implementations; all numbers crossing this boundary are
 * integers.
 */

export type Json =
  | null
  | boolean
  | number
  | string
  | Json[]
  | { [key: string]: Json };

export function canonicalJson(value: Json): string {
  if (value === null || typeof value !== "object") {
    if (typeof value === "number" && !Number.isInteger(value)) {
      throw new Error("canonical form only supports integers");
    }
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const keys = Object.keys(value).sort();
  const parts = keys.map(
    (key) => JSON.stringify(key) + ":" + canonicalJson(value[key]),
  );
  return "{" + parts.join(",") + "}";
}

export function canonicalBytes(value: Json): Uint8Array {
  return new TextEncoder().encode(canonicalJson(value));
}
