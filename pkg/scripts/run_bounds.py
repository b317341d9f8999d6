"""MCC lower-bound certificates on random instances.

Extra arguments are passed to `isoica verify-bounds`; results go to results/bounds by default.
"""

import sys

from isoica.cli import dispatch

if __name__ == "__main__":
    argv = sys.argv[1:]
    if "--out" not in argv:
        argv += ["--out", "results/bounds"]
    sys.exit(dispatch(["verify-bounds"] + argv))
