"""Suffix stripping for caption normalization.

Porter's algorithm (1980), with two deliberate departures that make related
surface forms collapse onto one stem: step 1b never restores a trailing "e"
after stripping "ed"/"ing", and step 5a drops a final "e" whenever the
remaining stem has measure >= 1.  Under these rules "driving" and "drive"
both reduce to "driv", and "riding"/"ride" both reduce to "rid", so a closed
stem lexicon matches every inflection with plain string equality.
"""

_VOWELS = frozenset("aeiou")

_STEP2 = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4 = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Count VC sequences in [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _is_consonant(stem, i)
        if not vowel and prev_vowel:
            m += 1
        prev_vowel = vowel
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def stem(word: str) -> str:
    """Return the stem of a lowercase word.  Total; never raises.

    The suffix-stripping pass is applied until it reaches a fixed point, so
    stem() is idempotent: every value it returns maps to itself.
    """
    w = word
    for _ in range(5):
        reduced = _strip_pass(w)
        if reduced == w:
            return w
        w = reduced
    return w


def _strip_pass(word: str) -> str:
    if len(word) <= 2:
        return word
    w = word

    # step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif not w.endswith("ss") and w.endswith("s"):
        w = w[:-1]

    # step 1b
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    else:
        stripped = None
        if w.endswith("ed") and _has_vowel(w[:-2]):
            stripped = w[:-2]
        elif w.endswith("ing") and _has_vowel(w[:-3]):
            stripped = w[:-3]
        if stripped is not None:
            w = stripped
            if w.endswith(("at", "bl", "iz")):
                w += "e"
            elif _ends_double_consonant(w) and w[-1] not in "lsz":
                w = w[:-1]
            # no cvc -> +"e" restoration: keeps "driving" at "driv"

    # step 1c
    if w.endswith("y") and _has_vowel(w[:-1]):
        w = w[:-1] + "i"

    # step 2
    if _measure(w) > 0:
        for suffix, repl in _STEP2:
            if w.endswith(suffix):
                candidate = w[: -len(suffix)]
                if _measure(candidate) > 0:
                    w = candidate + repl
                break

    # step 3
    for suffix, repl in _STEP3:
        if w.endswith(suffix):
            candidate = w[: -len(suffix)]
            if _measure(candidate) > 0:
                w = candidate + repl
            break

    # step 4
    for suffix in _STEP4:
        if w.endswith(suffix):
            candidate = w[: -len(suffix)]
            if _measure(candidate) > 1:
                if suffix == "ion" and not candidate.endswith(("s", "t")):
                    break
                w = candidate
            break

    # step 5a, relaxed: drop trailing "e" whenever measure allows
    if w.endswith("e") and _measure(w[:-1]) >= 1:
        w = w[:-1]

    # step 5b
    if w.endswith("ll") and _measure(w) > 1:
        w = w[:-1]

    return w
