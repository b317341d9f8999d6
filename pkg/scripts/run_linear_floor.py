"""Unperturbed ICA at 1e6 samples: sampling floor of the pipeline.

Extra arguments are passed to `isoica ica`; results go to results/linear_floor by default.
"""

import sys

from isoica.cli import dispatch

if __name__ == "__main__":
    argv = sys.argv[1:]
    if "--out" not in argv:
        argv += ["--out", "results/linear_floor"]
    sys.exit(dispatch(["ica"] + argv))
