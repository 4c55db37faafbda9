"""Battery-module authentication: UID allow-list, then originality-signature check."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

from . import ecc
from .channel import Channel
from .frames import Command, RequestFrame
from .ntag import NtagDevice


class AuthOutcome(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED_UID = "rejected_uid"
    REJECTED_SIGNATURE = "rejected_signature"


class AuthPolicy(enum.Enum):
    WARN = "warn"
    SHUTDOWN = "shutdown"


class ActionTaken(enum.Enum):
    NONE = "none"
    WARNING_RAISED = "warning_raised"
    SYSTEM_SHUTDOWN = "system_shutdown"


class BadKeyFile(ValueError):
    pass


class AllowList:
    def __init__(self, uids=()):
        self._uids = frozenset(bytes(u) for u in uids)

    def __contains__(self, uid: bytes) -> bool:
        return bytes(uid) in self._uids

    def __iter__(self):
        return iter(sorted(self._uids))

    def __len__(self) -> int:
        return len(self._uids)


@dataclass(frozen=True)
class AuthResult:
    outcome: AuthOutcome
    action: ActionTaken

    @property
    def accepted(self) -> bool:
        return self.outcome is AuthOutcome.ACCEPTED


def authenticate_tag(
    channel: Channel,
    tag: NtagDevice,
    allow_list: AllowList,
    public_key,
    policy: AuthPolicy = AuthPolicy.SHUTDOWN,
) -> AuthResult:
    """Check ``tag`` against the allow-list, then fetch and verify its signature.

    The allow-list check is local and free; the signature round trip plus
    verification is booked as one ``authentication`` step on the channel clock.
    A :class:`~nfcbms.channel.Timeout` from the link propagates unchanged.
    """
    clock = channel.clock
    if tag.uid not in allow_list:
        outcome = AuthOutcome.REJECTED_UID
        if clock is not None:
            clock.advance("authentication", 0.0, component="ccb", outcome=outcome.value)
        return AuthResult(outcome, _action(policy))

    resp = channel.transceive(RequestFrame(Command.READ_SIGNATURE, uid=tag.uid), tag)
    ok = False
    if not resp.error and len(resp.payload) == 32:
        sig = ecc.Signature.from_bytes(resp.payload)
        ok = ecc.verify(public_key, tag.uid, sig)
    outcome = AuthOutcome.ACCEPTED if ok else AuthOutcome.REJECTED_SIGNATURE
    if clock is not None:
        clock.charge("authentication", component="ccb", outcome=outcome.value)
    return AuthResult(outcome, ActionTaken.NONE if ok else _action(policy))


def _action(policy: AuthPolicy) -> ActionTaken:
    return ActionTaken.SYSTEM_SHUTDOWN if policy is AuthPolicy.SHUTDOWN else ActionTaken.WARNING_RAISED


# -- key files ------------------------------------------------------------


def sign_uid(private_key: int, uid: bytes) -> bytes:
    """Manufacturing-side signature over a tag UID (32 bytes, r || s)."""
    return ecc.sign(private_key, uid).to_bytes()


def write_keyfile(path: str | Path, private_key: int | None = None, public_key=None) -> None:
    doc = {}
    if private_key is not None:
        doc["private"] = f"{private_key:032x}"
        public_key = public_key or ecc.public_key(private_key)
    if public_key is not None:
        doc["public"] = ecc.encode_point(public_key).hex()
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_private_key(path: str | Path) -> int:
    try:
        doc = json.loads(Path(path).read_text())
        d = int(doc["private"], 16)
        ecc.check_private_key(d)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise BadKeyFile(f"{path}: {exc}") from exc
    return d


def load_public_key(path: str | Path):
    try:
        doc = json.loads(Path(path).read_text())
        if "public" in doc:
            return ecc.decode_point(bytes.fromhex(doc["public"]))
        return ecc.public_key(int(doc["private"], 16))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise BadKeyFile(f"{path}: {exc}") from exc
