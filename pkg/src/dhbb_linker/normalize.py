"""Search-key derivation for DHBB entry titles.

Turns a raw title into every form the linker may query with: canonical
Portuguese casing, the trailing acronym (if any), a diacritic-folded key,
and surname-based variants for person names. All functions are pure.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

# Lowercased inside titles unless they are the first word. A fixed heuristic
# list, not a full Portuguese orthography engine.
FUNCTION_WORDS = frozenset(
    "a as o os e da das de do dos em na nas no nos para por com".split()
)

# Connective particles inside person names ("Flecha de Lima").
NAME_PARTICLES = frozenset("de da do das dos e".split())

_ACRONYM_RE = re.compile(r"^(?P<base>.*\S)\s*\((?P<acronym>[^\s()]{2,})\)$")


class TooFewTokens(ValueError):
    """Person-name helper called with fewer than two non-particle tokens."""


@dataclass(frozen=True)
class TitleForms:
    """All derived search keys for one entry title."""

    original: str
    canonical: str
    base: str
    acronym: str | None
    folded: str
    variants: tuple[str, ...]


def extract_acronym(title: str) -> tuple[str, str | None]:
    """Split a trailing parenthesized acronym off a title.

    Only a final parenthesized token of at least two characters and no
    spaces counts, so "(CGTB)" and "(Conlutas)" qualify but a stray "(a)"
    does not. Returns (base, acronym) with acronym None when absent.
    """
    m = _ACRONYM_RE.match(title.strip())
    if m:
        return m.group("base"), m.group("acronym")
    return title, None


def _recase_word(word: str, first: bool) -> str:
    lowered = word.lower()
    if lowered in FUNCTION_WORDS and not first:
        return lowered
    # str.capitalize() titlecases the first character, which stays stable
    # even for expanding characters (ß -> Ss) on a second pass.
    return "-".join(seg.capitalize() for seg in lowered.split("-"))


def canonicalize(title: str) -> str:
    """Normalize a title to Portuguese title case with collapsed whitespace.

    All-caps DHBB titles like "PARTIDO DA CAUSA OPERARIA (PCO)" cannot match
    mixed-case Wikipedia titles, so purely upper- or lowercase words are
    recased (function words stay lowercase unless first). Words that already
    mix cases, contain no letters, or carry non-letter characters such as
    hyphens ("DOI-CODI") are preserved verbatim, as is the extracted acronym.
    Idempotent.
    """
    collapsed = " ".join(title.split())
    base, acronym = extract_acronym(collapsed)
    words = base.split()
    out = []
    for i, word in enumerate(words):
        has_upper = any(c.isupper() for c in word)
        has_lower = any(c.islower() for c in word)
        if has_upper and has_lower:
            out.append(word)  # already mixed case
        elif has_upper and word.isalpha():
            out.append(_recase_word(word, i == 0))
        elif has_lower:
            out.append(_recase_word(word, i == 0))
        else:
            out.append(word)  # digits, punctuation, uncased scripts
    result = " ".join(out)
    if acronym is not None:
        result = f"{result} ({acronym})"
    return result


def fold_diacritics(s: str) -> str:
    """Strip combining diacritics and lowercase; idempotent."""
    decomposed = unicodedata.normalize("NFD", s)
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    return stripped.lower()


def _is_particle(token: str) -> bool:
    return token.lower() in NAME_PARTICLES


def person_variants(full_name: str) -> list[str]:
    """Generate the name variants a person may be listed under.

    Portuguese surnames are used loosely ("Paulo Tarso Flecha de Lima" is
    entered in the DHBB as "Flecha de Lima"), so the list deliberately
    over-generates, in priority order:

    1. the full name;
    2. first name + final surname group, where the group is the last
       non-particle token plus any particles directly before it and the
       non-particle token those particles attach to;
    3. every contiguous tail of the token list that starts at a
       non-particle token and spans at least two tokens.

    Duplicates are dropped, order preserved. Raises TooFewTokens when the
    name has fewer than two non-particle tokens.
    """
    tokens = full_name.split()
    content = [t for t in tokens if not _is_particle(t)]
    if len(content) < 2:
        raise TooFewTokens(f"need at least two non-particle tokens: {full_name!r}")

    variants: list[str] = [" ".join(tokens)]

    # Final surname group.
    i = len(tokens) - 1
    while i >= 0 and _is_particle(tokens[i]):
        i -= 1
    group_start = i
    j = i - 1
    if j >= 0 and _is_particle(tokens[j]):
        while j >= 0 and _is_particle(tokens[j]):
            j -= 1
        if j >= 0:
            group_start = j
    if group_start > 0:
        variants.append(" ".join([tokens[0]] + tokens[group_start:]))

    # Contiguous tails.
    for start in range(1, len(tokens)):
        if _is_particle(tokens[start]):
            continue
        tail = tokens[start:]
        if len(tail) >= 2:
            variants.append(" ".join(tail))

    return list(dict.fromkeys(variants))


def _damerau_levenshtein(a: str, b: str) -> int:
    # Unrestricted Damerau-Levenshtein (adjacent transposition costs 1 and
    # may be combined with other edits), so the metric obeys the triangle
    # inequality, unlike the restricted "optimal string alignment" variant.
    inf = len(a) + len(b)
    last_row: dict[str, int] = {}
    h = [[inf] * (len(b) + 2) for _ in range(len(a) + 2)]
    for i in range(len(a) + 1):
        h[i + 1][1] = i
    for j in range(len(b) + 1):
        h[1][j + 1] = j
    for i in range(1, len(a) + 1):
        last_col = 0
        for j in range(1, len(b) + 1):
            k = last_row.get(b[j - 1], 0)
            l = last_col
            if a[i - 1] == b[j - 1]:
                cost = 0
                last_col = j
            else:
                cost = 1
            h[i + 1][j + 1] = min(
                h[i][j] + cost,  # substitution / match
                h[i + 1][j] + 1,  # insertion
                h[i][j + 1] + 1,  # deletion
                h[k][l] + (i - k - 1) + 1 + (j - l - 1),  # transposition
            )
        last_row[a[i - 1]] = i
    return h[len(a) + 1][len(b) + 1]


def bounded_edit_distance(a: str, b: str, max_edits: int) -> int | None:
    """Damerau-Levenshtein distance on diacritic-folded forms, or None.

    Returns the distance when it does not exceed max_edits, else None.
    A one-letter DHBB typo such as "Patrionovista" for "Patrianovista"
    comes back as 1.
    """
    if max_edits < 0:
        raise ValueError("max_edits must be >= 0")
    fa = fold_diacritics(a)
    fb = fold_diacritics(b)
    if abs(len(fa) - len(fb)) > max_edits:
        return None
    distance = _damerau_levenshtein(fa, fb)
    return distance if distance <= max_edits else None


def title_forms(title: str, biographical: bool = False) -> TitleForms:
    """Assemble every derived form for a title.

    Person-name variants are generated only for biographical entries and
    silently omitted when the name is too short to vary.
    """
    canonical = canonicalize(title)
    base, acronym = extract_acronym(canonical)
    variants: tuple[str, ...] = ()
    if biographical:
        try:
            variants = tuple(person_variants(canonical))
        except TooFewTokens:
            variants = ()
    return TitleForms(
        original=title,
        canonical=canonical,
        base=base,
        acronym=acronym,
        folded=fold_diacritics(canonical),
        variants=variants,
    )
