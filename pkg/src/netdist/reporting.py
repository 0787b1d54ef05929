"""One-time-token case labeling.

Trusted authorities mint high-entropy tokens with no personal data attached;
a device redeems a token together with the symptom start date, which marks
the device's pseudonymous identifier as a positive case (or as a confirmed
contact, for the second token type). The redeemed token and the resulting
case record are stored with no association between them.
"""

from __future__ import annotations

import hashlib
import secrets
import threading
import uuid
from dataclasses import dataclass
from datetime import date

from .config import TokenConfig

POSITIVE = "POSITIVE"
CONTACT = "CONTACT"
REPORT_KINDS = (POSITIVE, CONTACT)

_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567"  # base32, friendly for hand entry


class UnauthorizedAuthority(PermissionError):
    def __init__(self, authority: str):
        self.authority = authority
        super().__init__(f"unauthorized-authority: {authority}")


class RedemptionRejected(ValueError):
    """Redemption failed; ``reason`` is one of unknown-token,
    already-consumed, expired, wrong-community-scope."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


def generate_token_string() -> str:
    """16 base32 characters grouped 4-4-4-4 (80 bits of entropy)."""
    raw = "".join(secrets.choice(_ALPHABET) for _ in range(16))
    return "-".join(raw[i:i + 4] for i in range(0, 16, 4))


def canonical_token(token: str) -> str:
    return token.replace("-", "").replace(" ", "").upper()


def token_digest(token: str) -> str:
    return hashlib.sha256(canonical_token(token).encode("ascii")).hexdigest()


@dataclass
class CaseToken:
    token: str
    kind: str
    authority: str
    issued_at: float
    expires_at: float
    consumed: bool = False


@dataclass(frozen=True)
class CaseReport:
    """A pseudonymous positive or confirmed-contact record.

    Carries no reference to the token that produced it. Contact reports have
    no symptom date; their chart lifetime anchors on ``reported_at`` instead.
    """

    case_id: str
    device: str
    kind: str
    reported_at: float
    symptom_start: date | None = None


@dataclass
class _StoredToken:
    kind: str
    authority: str
    issued_at: float
    expires_at: float
    consumed: bool = False


class TokenService:
    """Issues and redeems one-time tokens.

    Only token digests are stored server-side; redemption is single-winner
    per token even under concurrent attempts.
    """

    def __init__(self, config: TokenConfig):
        self.config = config
        self._tokens: dict[str, _StoredToken] = {}
        self._lock = threading.Lock()

    def authenticate(self, authority: str, secret: str) -> None:
        expected = self.config.authorities.get(authority)
        if expected is None or not secrets.compare_digest(str(expected), str(secret)):
            raise UnauthorizedAuthority(authority)

    def issue(self, authority: str, kind: str, count: int, now: float) -> list[CaseToken]:
        if kind not in REPORT_KINDS:
            raise ValueError(f"unknown token kind {kind!r}")
        if count < 0:
            raise ValueError("count must be >= 0")
        expires_at = now + self.config.validity_hours * 3600.0
        out = []
        for _ in range(count):
            token = generate_token_string()
            stored = _StoredToken(kind=kind, authority=authority,
                                  issued_at=now, expires_at=expires_at)
            with self._lock:
                self._tokens[token_digest(token)] = stored
            out.append(CaseToken(token=token, kind=kind, authority=authority,
                                 issued_at=now, expires_at=expires_at))
        return out

    def restore(self, digest: str, kind: str, authority: str,
                issued_at: float, expires_at: float, consumed: bool = False) -> None:
        """Re-admit a token row from the durable log (replay path)."""
        self._tokens[digest] = _StoredToken(kind=kind, authority=authority,
                                            issued_at=issued_at, expires_at=expires_at,
                                            consumed=consumed)

    def mark_consumed(self, digest: str) -> None:
        stored = self._tokens.get(digest)
        if stored is not None:
            stored.consumed = True

    def redeem(self, token: str, device: str, symptom_start: date | None,
               now: float, device_community: str | None = None) -> CaseReport:
        digest = token_digest(token)
        with self._lock:
            stored = self._tokens.get(digest)
            if stored is None:
                raise RedemptionRejected("unknown-token")
            if stored.consumed:
                raise RedemptionRejected("already-consumed")
            if now >= stored.expires_at:
                raise RedemptionRejected("expired")
            if device_community is not None and device_community != stored.authority:
                raise RedemptionRejected("wrong-community-scope")
            stored.consumed = True
        return CaseReport(
            case_id=str(uuid.uuid4()),
            device=device,
            kind=stored.kind,
            reported_at=now,
            symptom_start=symptom_start if stored.kind == POSITIVE else None,
        )

    def token_rows(self) -> list[dict]:
        """Digest-keyed metadata rows; nothing here names a device or case."""
        return [
            {"digest": d, "kind": s.kind, "authority": s.authority,
             "issued_at": s.issued_at, "expires_at": s.expires_at, "consumed": s.consumed}
            for d, s in sorted(self._tokens.items())
        ]


def amplification_probability(n_tokens: int, p_each: float) -> float:
    """Chance that at least one of ``n_tokens`` independent tokens is entered
    when each is entered with probability ``p_each``."""
    if n_tokens < 0:
        raise ValueError("n_tokens must be >= 0")
    if not 0.0 <= p_each <= 1.0:
        raise ValueError("p_each must be a probability")
    return 1.0 - (1.0 - p_each) ** n_tokens
