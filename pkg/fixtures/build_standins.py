"""Rebuild the stand-in fixtures ``moorea.csv`` and ``portal.csv``.

These are NOT the LTER / Portal Project records. They are hand-built series
that follow the publicly described trajectories (see README.md in this
directory) so the empirical workflow can be exercised offline. Swap in the real
annual aggregates for any scientific use.
"""

from pathlib import Path

import numpy as np

HERE = Path(__file__).parent

# mean forereef 10 m coral cover (%), 18 annual points 2005-2023 without 2020
MOOREA_YEARS = [y for y in range(2005, 2024) if y != 2020]
MOOREA_COVER = [41, 44, 13, 8, 6, 5, 5, 8, 11, 28, 31, 44, 46, 47, 30, 33, 32, 34]

# C. penicillatus share of captures: two-level model, regime change in 1999
PORTAL_YEARS = list(range(1977, 2026))
PORTAL_SEED = 2


def portal_fraction() -> np.ndarray:
    rng = np.random.default_rng(PORTAL_SEED)
    level = np.where(np.array(PORTAL_YEARS) < 1999, 0.06, 0.30)
    return np.clip(np.round(level + rng.normal(0, 0.08, len(PORTAL_YEARS)), 3), 0, 1)


def write(path: Path, years, values) -> None:
    lines = ["time,value"] + [f"{t},{float(v)!r}" for t, v in zip(years, values)]
    path.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    write(HERE / "moorea.csv", MOOREA_YEARS, MOOREA_COVER)
    write(HERE / "portal.csv", PORTAL_YEARS, portal_fraction())
