"""Regenerate src/minifab_bench/data/lot_configs.txt.

Draws 31 (pa, pb, tw) tuples from each total-lot band (small, medium, large)
among all tuples allowed by the MiniFab lot-size sets, after pinning a few
reference tuples. The draw is seeded, so the file is reproducible.
"""

import itertools
from pathlib import Path

import numpy as np

from minifab_bench.models import PA_PB_SIZES, TW_SIZES

BANDS = {"small": (54, 90), "medium": (93, 150), "large": (153, 207)}
PER_BAND = 31
SEED = 2024

# (pa, pb, tw) -> note
PINNED = {
    (12, 36, 12): "small reference",
    (36, 9, 9): "54-lot completion check",
    (12, 90, 18): "medium reference",
    (90, 24, 18): "reference with pa capped at 90 (total 132)",
    (90, 90, 12): "large reference (total 192)",
}

OUT = Path(__file__).resolve().parents[1] / "src" / "minifab_bench" / "data" / "lot_configs.txt"


def band_of(total):
    for name, (lo, hi) in BANDS.items():
        if lo <= total <= hi:
            return name
    return None


def main():
    rng = np.random.default_rng(SEED)
    candidates = {name: [] for name in BANDS}
    for t in itertools.product(PA_PB_SIZES, PA_PB_SIZES, TW_SIZES):
        band = band_of(sum(t))
        if band is not None and t not in PINNED:
            candidates[band].append(t)

    lines = [
        "# Canonical MiniFab lot configurations: one pa,pb,tw triple per line.",
        f"# {PER_BAND} tuples per total-lot band: "
        + ", ".join(f"{k} {lo}-{hi}" for k, (lo, hi) in BANDS.items()),
        f"# Generated by scripts/make_lot_configs.py (seed {SEED}); pinned tuples are annotated.",
    ]
    for name in BANDS:
        pinned = [t for t in PINNED if band_of(sum(t)) == name]
        pool = candidates[name]
        picks = rng.choice(len(pool), size=PER_BAND - len(pinned), replace=False)
        chosen = sorted(pinned + [pool[i] for i in picks], key=lambda t: (sum(t), t))
        lines.append(f"# {name}")
        for t in chosen:
            note = f"  # {PINNED[t]}" if t in PINNED else ""
            lines.append(f"{t[0]},{t[1]},{t[2]}{note}")
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
