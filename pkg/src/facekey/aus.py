"""The fixed set of facial action units the tracker reports."""

from __future__ import annotations

# AU ids reported by the upstream tracker, in ascending order.
AU_IDS: tuple[int, ...] = (1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 28, 45)

AU_ID_SET = frozenset(AU_IDS)

# FACS muscle-movement names, for UI labels and validation messages.
AU_NAMES: dict[int, str] = {
    1: "Inner brow raiser",
    2: "Outer brow raiser",
    4: "Brow lowerer",
    5: "Upper lid raiser",
    6: "Cheek raiser",
    7: "Lid tightener",
    9: "Nose wrinkler",
    10: "Upper lip raiser",
    12: "Lip corner puller",
    14: "Dimpler",
    15: "Lip corner depressor",
    17: "Chin raiser",
    20: "Lip stretcher",
    23: "Lip tightener",
    25: "Lips part",
    26: "Jaw drop",
    28: "Lip suck",
    45: "Blink",
}

# Blinking fires involuntarily, so AU45 is rejected as a rule condition.
BLINK_AU = 45

# Detected too similarly to other AUs to be reliable conditions; allowed with a warning.
UNRELIABLE_CONDITION_AUS = frozenset((14, 17, 20))

INTENSITY_MIN = 0.0
INTENSITY_MAX = 5.0
