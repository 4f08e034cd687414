"""Client-server certificate validation at desk scale.

A validation server discovers and validates certification paths under
client-supplied policy constraints and returns signed validation
certificates; a relying-party CLI builds requests and interprets the
responses; a test-PKI generator produces the deterministic fixtures the
whole stack is verified against.
"""

__version__ = "0.1.0"
