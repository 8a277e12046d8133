// The tracker's fixed AU set; mirrors the engine's table.

export const AU_IDS = [1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 28, 45] as const;

export const AU_ID_SET = new Set<number>(AU_IDS);

export const AU_NAMES: Record<number, string> = {
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
};

export const BLINK_AU = 45;
export const UNRELIABLE_CONDITION_AUS = new Set([14, 17, 20]);
export const INTENSITY_MAX = 5.0;
