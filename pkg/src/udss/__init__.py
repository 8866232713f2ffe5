"""UDSS: desk-scale privacy middleware for consumer-device PII sharing.

A policy-enforcing gateway mediates every identity request between
local applications and the PII vault: contextual scope enforcement
truncates requests before consent is shown, a signed partnership
manifest is the trust root for app tiers and keys, fulfillment travels
as an authenticated encrypted envelope, and every attempt lands in a
hash-chained audit ledger.
"""

__version__ = "0.1.0"
