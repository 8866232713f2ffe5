/**
 * Client-side audit chain verification.
 *
 * Recomputes every entry hash over the canonical serialization of the
 * entry body (prevHash included, entryHash excluded) and walks the
 * links from the zero genesis hash. Works in both browsers and Node
 * via WebCrypto.
 */
import { canonicalBytes } from "./canonical.js";
export const GENESIS_HASH = "0".repeat(64);
async function sha256Hex(data) {
    const digest = await globalThis.crypto.subtle.digest("SHA-256", data);
    return Array.from(new Uint8Array(digest))
        .map((b) => b.toString(16).padStart(2, "0"))
        .join("");
}
export async function entryHash(entry) {
    const body = {
        absentScopes: entry.absentScopes,
        appId: entry.appId,
        authorizedScopes: entry.authorizedScopes,
        context: entry.context,
        outcome: entry.outcome,
        prevHash: entry.prevHash,
        requestedScopes: entry.requestedScopes,
        sequence: entry.sequence,
        timestamp: entry.timestamp,
    };
    return sha256Hex(canonicalBytes(body));
}
export async function verifyChain(entries, expectedHead) {
    let prev = GENESIS_HASH;
    for (let i = 0; i < entries.length; i++) {
        const entry = entries[i];
        if (entry.sequence !== i || entry.prevHash !== prev) {
            return { valid: false, length: entries.length, failedAt: i };
        }
        if ((await entryHash(entry)) !== entry.entryHash) {
            return { valid: false, length: entries.length, failedAt: i };
        }
        prev = entry.entryHash;
    }
    if (expectedHead !== undefined && prev !== expectedHead) {
        return { valid: false, length: entries.length, failedAt: entries.length };
    }
    return { valid: true, length: entries.length };
}
