"""Count profiles: the multiplicity summary that every test consumes.

A profile records the sample size n and the sparse map k -> m_k, where
m_k is the number of distinct items that occur exactly k times. Tests
depend on the sample only through this map, so ingestion is the single
place raw data is touched. The number of never-seen items is not
representable (the item space is treated as unbounded), hence no m_0.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

__all__ = [
    "CountProfile",
    "ingest_items",
    "profile_from_counts",
    "validate_profile",
    "profile_to_json",
    "profile_from_json",
]


@dataclass(frozen=True)
class CountProfile:
    """Immutable second-order summary of a sample.

    Attributes
    ----------
    n : int
        Total number of items.
    multiplicities : dict[int, int]
        Sparse map k -> m_k over k >= 1; zero entries are never stored.
    first_order : dict[int, int] | None
        Optional map label -> count for callers that kept labels.
        Carries no information the tests use beyond ``multiplicities``.
    """

    n: int
    multiplicities: Mapping[int, int]
    first_order: Mapping[int, int] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        ordered = dict(sorted(dict(self.multiplicities).items()))
        object.__setattr__(self, "multiplicities", ordered)
        if self.first_order is not None:
            object.__setattr__(self, "first_order", dict(self.first_order))

    @property
    def m_plus(self) -> int:
        """Number of distinct items observed, sum of all m_k."""
        return sum(self.multiplicities.values())

    def m(self, k: int) -> int:
        """m_k, zero when absent."""
        return self.multiplicities.get(k, 0)


def validate_profile(profile: CountProfile) -> str | None:
    """Check a profile's structural invariants.

    Returns the first violation as a human-readable string, or None if
    the profile is consistent. Checked: integral non-negative n,
    integral k >= 1 and m_k >= 1 entries, the identity sum k*m_k = n,
    and (when first_order is present) that its counts reproduce n and
    the multiplicities exactly.
    """
    if not isinstance(profile.n, int) or isinstance(profile.n, bool):
        return f"n must be an integer, got {profile.n!r}"
    if profile.n < 0:
        return f"n must be >= 0, got {profile.n}"
    for k, m in profile.multiplicities.items():
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            return f"multiplicity key must be an integer >= 1, got {k!r}"
        if not isinstance(m, int) or isinstance(m, bool) or m < 1:
            return f"m_{k} must be an integer >= 1, got {m!r}"
    total = sum(k * m for k, m in profile.multiplicities.items())
    if total != profile.n:
        return f"sum k*m_k = {total} does not match n = {profile.n}"
    if profile.first_order is not None:
        for label, count in profile.first_order.items():
            if not isinstance(count, int) or count < 1:
                return f"count for label {label!r} must be an integer >= 1"
        if sum(profile.first_order.values()) != profile.n:
            return "first_order counts do not sum to n"
        derived = Counter(profile.first_order.values())
        if dict(derived) != dict(profile.multiplicities):
            return "first_order inconsistent with multiplicities"
    return None


def _checked(profile: CountProfile) -> CountProfile:
    violation = validate_profile(profile)
    if violation is not None:
        raise ValueError(violation)
    return profile


def ingest_items(items: Iterable[bytes | str], hashed: bool = False) -> CountProfile:
    """Reduce a finite stream of items to a count profile.

    Each distinct byte string gets a dense integer label in order of
    first appearance and the per-label counts are folded into
    multiplicities. Strings are compared as their UTF-8 bytes.

    With ``hashed=True`` items are keyed by a 128-bit BLAKE2 digest
    instead of being kept verbatim. That caps memory per distinct item
    but a digest collision would silently merge two distinct items, so
    the exact mode is the default.
    """
    if hashed:
        warnings.warn(
            "hashed ingestion can merge distinct items on digest collision; "
            "counts are then slightly wrong with probability ~ d^2 / 2^128",
            stacklevel=2,
        )
    labels: dict[bytes, int] = {}
    counts: Counter[int] = Counter()
    n = 0
    for item in items:
        data = item.encode() if isinstance(item, str) else bytes(item)
        if hashed:
            data = hashlib.blake2b(data, digest_size=16).digest()
        label = labels.setdefault(data, len(labels) + 1)
        counts[label] += 1
        n += 1
    multiplicities = Counter(counts.values())
    return _checked(CountProfile(n, dict(multiplicities), dict(counts)))


def profile_from_counts(counts: Iterable[int]) -> CountProfile:
    """Build a profile from per-item occurrence counts.

    Entry point when only the counts n_x are known; labels 1..d are
    synthesized. Zero or negative counts are rejected, an item that was
    never seen has no count.
    """
    counts = list(counts)
    for c in counts:
        if not isinstance(c, int) or isinstance(c, bool) or c < 1:
            raise ValueError(f"counts must be integers >= 1, got {c!r}")
    first_order = {x + 1: c for x, c in enumerate(counts)}
    return _checked(CountProfile(sum(counts), dict(Counter(counts)), first_order))


def profile_to_json(profile: CountProfile, include_counts: bool = False) -> str:
    """Serialize to the flat document ``{"n": ..., "m": {"k": m_k}}``.

    ``include_counts=True`` adds a ``counts`` list when first-order
    counts are available.
    """
    doc: dict = {
        "n": profile.n,
        "m": {str(k): m for k, m in profile.multiplicities.items()},
    }
    if include_counts and profile.first_order is not None:
        doc["counts"] = sorted(profile.first_order.values(), reverse=True)
    return json.dumps(doc)


def profile_from_json(text: str) -> CountProfile:
    """Parse and validate a profile document.

    Raises ValueError with a description for anything malformed: bad
    JSON, missing fields, non-integer keys, or violated invariants
    (including a ``counts`` list inconsistent with ``n``/``m``).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("profile document must be a JSON object")
    if "n" not in doc or "m" not in doc:
        raise ValueError("profile document needs fields 'n' and 'm'")
    if not isinstance(doc["m"], dict):
        raise ValueError("'m' must be an object mapping k to m_k")
    multiplicities = {}
    for key, value in doc["m"].items():
        try:
            k = int(key)
        except (TypeError, ValueError):
            raise ValueError(f"multiplicity key {key!r} is not an integer") from None
        multiplicities[k] = value
    first_order = None
    if "counts" in doc:
        if not isinstance(doc["counts"], list):
            raise ValueError("'counts' must be a list of integers")
        for c in doc["counts"]:
            if not isinstance(c, int) or isinstance(c, bool) or c < 1:
                raise ValueError(f"counts must be integers >= 1, got {c!r}")
        first_order = {x + 1: c for x, c in enumerate(doc["counts"])}
    return _checked(CountProfile(doc["n"], multiplicities, first_order))
