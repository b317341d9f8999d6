"""Recovery error versus non-isometry for rotation plus smooth perturbation.

Extra arguments are passed to `isoica iso-ica`; results go to results/iso_ica by default.
"""

import sys

from isoica.cli import dispatch

if __name__ == "__main__":
    argv = sys.argv[1:]
    if "--out" not in argv:
        argv += ["--out", "results/iso_ica"]
    sys.exit(dispatch(["iso-ica"] + argv))
