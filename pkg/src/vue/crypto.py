"""Cryptographic primitives used by the protocol.

Hashing, AES-GCM authenticated encryption, Ed25519 signatures and a GDH.2
group Diffie-Hellman exchange. Everything here is pure or takes caller
supplied randomness, so objects can be shared between threads freely.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

DIGEST_SIZE = 32
NONCE_SIZE = 12
DEFAULT_HASH = "sha256"

_SYM_KEY_LABEL = b"vue-enc"


class AuthFailure(Exception):
    """Raised when a ciphertext cannot be authenticated under the given key."""


def hash_data(data: bytes, algorithm: str = DEFAULT_HASH) -> bytes:
    """Return the 32-octet digest of ``data``.

    Any hashlib algorithm with a 32 byte output may be plugged in
    (``sha256``, ``sha3_256``, ``blake2s``).
    """
    h = hashlib.new(algorithm, bytes(data))
    out = h.digest()
    if len(out) != DIGEST_SIZE:
        raise ValueError(f"hash algorithm {algorithm!r} does not produce {DIGEST_SIZE} octets")
    return out


# ---------------------------------------------------------------------------
# Group parameters and keys
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupParams:
    p: int
    g: int
    q: int
    name: str = ""
    exponent_bits: int | None = None  # short exponents; None draws from the full [1, q-1]

    def __post_init__(self):
        if not 1 < self.g < self.p:
            raise ValueError("generator must satisfy 1 < g < p")
        if pow(self.g, self.q, self.p) != 1:
            raise ValueError("g^q mod p != 1")

    @property
    def element_size(self) -> int:
        return (self.p.bit_length() + 7) // 8

    def is_prime(self) -> bool:
        from sympy import isprime

        return bool(isprime(self.p))

    def random_exponent(self, rng: random.Random) -> int:
        if self.exponent_bits is not None and (1 << self.exponent_bits) < self.q:
            return rng.randrange(1, 1 << self.exponent_bits)
        return rng.randrange(1, self.q)


# RFC 3526 group 14 (2048-bit MODP). g = 2 generates the subgroup of order q.
_MODP2048_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
# 256-bit exponents follow the RFC 3526 sizing guidance for this group.
MODP_2048 = GroupParams(p=_MODP2048_P, g=2, q=(_MODP2048_P - 1) // 2, name="modp2048", exponent_bits=256)

# Safe prime just below 2^64; 4 is a quadratic residue so it generates the order-q subgroup.
TEST_64 = GroupParams(
    p=18446744073709550147, g=4, q=9223372036854775073, name="test64"
)

GROUPS = {"modp2048": MODP_2048, "test64": TEST_64}


@dataclass(frozen=True)
class GroupKey:
    """A negotiated group key in canonical encoding (fixed-width big-endian)."""

    encoded: bytes

    @classmethod
    def from_element(cls, value: int, params: GroupParams) -> "GroupKey":
        if not 0 < value < params.p:
            raise ValueError("value is not a group element")
        return cls(value.to_bytes(params.element_size, "big"))

    def element(self) -> int:
        return int.from_bytes(self.encoded, "big")


def derive_token(key: GroupKey, algorithm: str = DEFAULT_HASH) -> bytes:
    return hash_data(key.encoded, algorithm)


def derive_sym_key(key: GroupKey, algorithm: str = DEFAULT_HASH) -> bytes:
    # domain separated from derive_token
    return hash_data(_SYM_KEY_LABEL + key.encoded, algorithm)


# ---------------------------------------------------------------------------
# Authenticated encryption
# ---------------------------------------------------------------------------

def _nonce(rng: random.Random | None) -> bytes:
    if rng is None:
        return os.urandom(NONCE_SIZE)
    return rng.randbytes(NONCE_SIZE)


def encrypt(key: bytes, plaintext: bytes, rng: random.Random | None = None) -> bytes:
    """AES-256-GCM encryption. The returned ciphertext is ``nonce || body || tag``."""
    if len(key) != 32:
        raise ValueError("symmetric key must be 32 octets")
    nonce = _nonce(rng)
    return nonce + AESGCM(key).encrypt(nonce, bytes(plaintext), None)


def decrypt(key: bytes, ciphertext: bytes) -> bytes:
    if len(key) != 32:
        raise ValueError("symmetric key must be 32 octets")
    if len(ciphertext) < NONCE_SIZE + 16:
        raise AuthFailure("ciphertext too short")
    nonce, body = ciphertext[:NONCE_SIZE], ciphertext[NONCE_SIZE:]
    try:
        return AESGCM(key).decrypt(nonce, body, None)
    except InvalidTag as exc:
        raise AuthFailure("authentication failed") from exc


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SigningKeyPair:
    secret: Ed25519PrivateKey = field(repr=False)
    public: bytes

    @classmethod
    def generate(cls, rng: random.Random | None = None) -> "SigningKeyPair":
        if rng is None:
            sk = Ed25519PrivateKey.generate()
        else:
            sk = Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
        pk = sk.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        return cls(sk, pk)


def sign(keypair: SigningKeyPair, message: bytes) -> bytes:
    return keypair.secret.sign(bytes(message))


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, bytes(message))
    except (InvalidSignature, ValueError):
        return False
    return True


# ---------------------------------------------------------------------------
# GDH.2 group key agreement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GdhMessage:
    sender: int
    receiver: int | None  # None marks the final broadcast
    values: tuple[int, ...]


@dataclass
class GdhResult:
    key: GroupKey
    member_keys: list[GroupKey]
    transcript: list[GdhMessage]


def gdh_exchange(secrets: list[int], params: GroupParams) -> GdhResult:
    """Run the GDH.2 upflow/downflow schedule for members holding ``secrets``.

    Member i (0-based) receives i+1 intermediate values from its predecessor
    during the upflow; the last member broadcasts the n-1 partial keys and
    every member raises its own partial key to its secret. That is n-1
    unicast messages plus one broadcast.
    """
    n = len(secrets)
    if n < 2:
        raise ValueError("GDH needs at least two members")
    for x in secrets:
        if not 1 <= x < params.q:
            raise ValueError("secret exponent out of range [1, q-1]")
    p = params.p
    transcript: list[GdhMessage] = []

    # Upflow: after member i, ``partials[j]`` = g^(prod_{k<=i, k!=j} x_k) and
    # ``cumulative`` = g^(prod_{k<=i} x_k).
    partials = [params.g]
    cumulative = pow(params.g, secrets[0], p)
    transcript.append(GdhMessage(0, 1, (*partials, cumulative)))
    for i in range(1, n - 1):
        x = secrets[i]
        partials = [pow(v, x, p) for v in partials] + [cumulative]
        cumulative = pow(cumulative, x, p)
        transcript.append(GdhMessage(i, i + 1, (*partials, cumulative)))

    # Last member computes the key and broadcasts partial keys.
    last = secrets[-1]
    last_partial = cumulative
    shared = pow(cumulative, last, p)
    broadcast = tuple(pow(v, last, p) for v in partials)
    transcript.append(GdhMessage(n - 1, None, broadcast))

    member_values = [pow(broadcast[j], secrets[j], p) for j in range(n - 1)]
    member_values.append(pow(last_partial, last, p))
    member_keys = [GroupKey.from_element(v, params) for v in member_values]
    return GdhResult(GroupKey.from_element(shared, params), member_keys, transcript)
