"""Regenerate the bundled synthetic wholesale-customers-shaped CSV.

440 records, 8 columns (Channel is the class label). Annual spend columns are
log-normal with channel-dependent means, loosely following the public UCI
summary statistics. The values are synthetic.
"""
import csv
import sys
from pathlib import Path

import numpy as np

COLUMNS = ["Channel", "Region", "Fresh", "Milk", "Grocery", "Frozen",
           "Detergents_Paper", "Delicassen"]
# log-space (mean, sd) per spend column for channel 1 (horeca) and 2 (retail)
SPEND = {
    "Fresh": ((8.9, 1.4), (8.4, 1.5)),
    "Milk": ((7.9, 1.0), (9.1, 0.8)),
    "Grocery": ((8.1, 1.0), (9.6, 0.8)),
    "Frozen": ((7.6, 1.2), (6.9, 1.3)),
    "Detergents_Paper": ((6.2, 1.3), (8.6, 1.1)),
    "Delicassen": ((6.7, 1.2), (7.1, 1.1)),
}


def main(out):
    rng = np.random.default_rng(20210406)
    channel = np.array([1] * 298 + [2] * 142)
    rng.shuffle(channel)
    region = rng.choice([1, 2, 3], size=channel.size, p=[77 / 440, 47 / 440, 316 / 440])
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        cols = {}
        for name, params in SPEND.items():
            mu = np.where(channel == 1, params[0][0], params[1][0])
            sd = np.where(channel == 1, params[0][1], params[1][1])
            cols[name] = np.rint(np.exp(rng.normal(mu, sd))).astype(int)
        for i in range(channel.size):
            w.writerow([channel[i], region[i]] + [cols[c][i] for c in SPEND])


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src/privselect/data/wholesale_customers_synthetic.csv"
    main(sys.argv[1] if len(sys.argv) > 1 else default)
