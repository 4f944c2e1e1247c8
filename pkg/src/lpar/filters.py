"""Utility text services: PII redaction, profanity filter, sentiment score.

All three are deliberately rule-based. Lexicons are plain UTF-8 files,
one entry per line; defaults ship in-module so the platform works with no
config at all.
"""

from __future__ import annotations

import re
from pathlib import Path

from .embed import tokenize

_EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}")
# 13 to 19 digits with optional single spaces or dashes between them.
_CARDLIKE_RE = re.compile(r"(?<![\dA-Za-z])(?:\d[ -]?){12,18}\d(?![\dA-Za-z])")
_PHONE_RE = re.compile(r"(?<![\dA-Za-z+])\+?(?:[ \-()]*\d){7,15}(?![\dA-Za-z])")
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


def luhn_valid(digits: str) -> bool:
    if not digits.isdigit():
        return False
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        if i % 2 == 1:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return total % 10 == 0


def pii_redact(text: str) -> tuple[str, list[str]]:
    """Replace emails, card numbers and phone numbers with redaction tags.

    Card beats phone on overlapping digit runs: a 13-19 digit run that
    passes the Luhn checksum is a card; one that fails it is redacted as a
    phone-pattern candidate instead of being left in place.
    """
    findings: list[str] = []

    def email_sub(match: re.Match) -> str:
        findings.append("email")
        return "[REDACTED:email]"

    def cardlike_sub(match: re.Match) -> str:
        digits = re.sub(r"[ -]", "", match.group(0))
        kind = "card" if luhn_valid(digits) else "phone"
        findings.append(kind)
        return f"[REDACTED:{kind}]"

    def phone_sub(match: re.Match) -> str:
        findings.append("phone")
        return "[REDACTED:phone]"

    redacted = _EMAIL_RE.sub(email_sub, text)
    redacted = _CARDLIKE_RE.sub(cardlike_sub, redacted)
    redacted = _PHONE_RE.sub(phone_sub, redacted)
    return redacted, findings


DEFAULT_PROFANITY = frozenset(
    """
    arse arsehole asshole bastard bitch bollocks bullshit crap damn dick
    dickhead douchebag fuck fucking jackass moron piss prick shit shitty
    twat wanker
    """.split()
)

DEFAULT_POSITIVE = frozenset(
    """
    amazing appreciate awesome best brilliant clear cool delightful easy
    excellent fantastic fast fine friendly glad good grateful great happy
    helpful impressive joy kind love lovely nice outstanding perfect pleasant
    pleased polite quick reliable satisfied smooth super superb thank thanks
    useful wonderful
    """.split()
)

DEFAULT_NEGATIVE = frozenset(
    """
    angry annoyed annoying awful bad broken complaint confused confusing
    disappointed disappointing dreadful fail failed failure frustrated
    frustrating furious garbage hate horrible hopeless issue issues nonsense
    poor problem problems ridiculous rubbish rude sad slow stupid terrible
    unacceptable unhappy unhelpful upset useless waste worst wrong
    """.split()
)

DEFAULT_HANDOVER_PHRASES = ("talk to a human", "speak to an agent")


def profanity_filter(text: str, words: frozenset[str] | set[str] = DEFAULT_PROFANITY) -> tuple[str, bool]:
    """Replace each listed token with asterisks of equal length."""
    flagged = False

    def sub(match: re.Match) -> str:
        nonlocal flagged
        token = match.group(0)
        if token.lower() in words:
            flagged = True
            return "*" * len(token)
        return token

    return _TOKEN_RE.sub(sub, text), flagged


def sentiment_score(
    text: str,
    positive: frozenset[str] | set[str] = DEFAULT_POSITIVE,
    negative: frozenset[str] | set[str] = DEFAULT_NEGATIVE,
) -> float:
    """(pos - neg) / max(1, pos + neg) over lexicon token counts."""
    tokens = tokenize(text)
    pos = sum(1 for t in tokens if t in positive)
    neg = sum(1 for t in tokens if t in negative)
    return (pos - neg) / max(1, pos + neg)


def load_lexicon(path: str | Path) -> frozenset[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(line.strip().lower() for line in lines if line.strip())


def load_phrase_list(path: str | Path) -> tuple[str, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return tuple(line.strip().lower() for line in lines if line.strip())
