"""Error versus perturbation size (random A, cubic perturbation, quartic FastICA).

Extra arguments are passed to `isoica scaling`; results go to results/eta_scaling by default.
"""

import sys

from isoica.cli import dispatch

if __name__ == "__main__":
    argv = sys.argv[1:]
    if "--out" not in argv:
        argv += ["--out", "results/eta_scaling"]
    sys.exit(dispatch(["scaling"] + argv))
