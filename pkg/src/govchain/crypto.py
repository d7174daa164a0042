"""Hashing, key pairs, signatures and addresses.

SHA-256 digests and Ed25519 signatures (PyNaCl). Everything here is an
immutable value; byte strings are rendered as lowercase hex wherever they
leave the process.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Annotated
from typing import Any

import structlog
from nacl.exceptions import BadSignatureError
from nacl.exceptions import CryptoError as NaclCryptoError
from nacl.signing import SigningKey
from nacl.signing import VerifyKey
from pydantic import StringConstraints

from govchain.exceptions import CryptoError

logger = structlog.get_logger()

HASH_SIZE = 32
ADDRESS_SIZE = 20
SIGNATURE_SIZE = 64

HexDigest = Annotated[str, StringConstraints(pattern=r"^[0-9a-f]{64}$")]
HexAddress = Annotated[str, StringConstraints(pattern=r"^[0-9a-f]{40}$")]
HexSignature = Annotated[str, StringConstraints(pattern=r"^[0-9a-f]{128}$")]
HexKey = Annotated[str, StringConstraints(pattern=r"^[0-9a-f]{64}$")]


class Digest(bytes):
    """Fixed-length SHA-256 output."""

    def __new__(cls, value: bytes) -> Digest:
        if len(value) != HASH_SIZE:
            msg = f"digest must be {HASH_SIZE} bytes, got {len(value)}"
            raise CryptoError(msg)
        return super().__new__(cls, value)

    @classmethod
    def from_hex(cls, value: str) -> Digest:
        try:
            return cls(bytes.fromhex(value))
        except ValueError as e:
            msg = f"invalid digest hex: {value!r}"
            raise CryptoError(msg) from e

    def __repr__(self) -> str:
        return f"Digest({self.hex()})"


def hash_bytes(data: bytes) -> Digest:
    """Map arbitrary-size data to a 32-byte digest."""
    return Digest(hashlib.sha256(data).digest())


def canonical_json(value: Any) -> bytes:
    """Deterministic JSON encoding used for every hashed structure."""
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=True
    ).encode("ascii")


def hash_object(value: Any) -> Digest:
    """Digest of the canonical JSON encoding of ``value``."""
    return hash_bytes(canonical_json(value))


@dataclasses.dataclass(frozen=True)
class KeyPair:
    """Ed25519 key pair; the private half never enters chain state."""

    public_key: bytes
    private_key: bytes = dataclasses.field(repr=False)

    @classmethod
    def from_seed(cls, seed: bytes) -> KeyPair:
        """Derive a key pair deterministically from arbitrary seed bytes."""
        signing_key = SigningKey(hash_bytes(seed))
        return cls(
            public_key=bytes(signing_key.verify_key),
            private_key=bytes(signing_key),
        )

    @property
    def address(self) -> str:
        return address_of(self.public_key)

    @property
    def public_hex(self) -> str:
        return self.public_key.hex()


def address_of(public_key: bytes) -> str:
    """Address = first 20 bytes of hash(public_key), hex encoded."""
    return hash_bytes(public_key)[:ADDRESS_SIZE].hex()


def sign(key: KeyPair, message: bytes) -> bytes:
    """Sign the SHA-256 digest of ``message``."""
    signing_key = SigningKey(key.private_key)
    return signing_key.sign(hash_bytes(message)).signature


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """Check ``signature`` over ``message``; malformed input yields False."""
    if len(public_key) != HASH_SIZE or len(signature) != SIGNATURE_SIZE:
        logger.debug(
            "signature rejected",
            reason="malformed",
            key_len=len(public_key),
            sig_len=len(signature),
        )
        return False
    try:
        VerifyKey(public_key).verify(hash_bytes(message), signature)
    except BadSignatureError:
        return False
    except (NaclCryptoError, ValueError, TypeError) as e:
        logger.debug("signature rejected", reason="malformed", error=str(e))
        return False
    return True


def verify_hex(public_key: str, message: bytes, signature: str) -> bool:
    """Hex-string variant of :func:`verify` used by ledger structures."""
    try:
        key_bytes = bytes.fromhex(public_key)
        sig_bytes = bytes.fromhex(signature)
    except ValueError:
        return False
    return verify(key_bytes, message, sig_bytes)


def derive_keypair(seed: int, name: str) -> KeyPair:
    """Deterministic scenario key for a named actor."""
    return KeyPair.from_seed(f"govchain:{seed}:{name}".encode())
