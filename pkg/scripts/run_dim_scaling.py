"""Non-isometry of random Gaussian Jacobians versus ambient dimension.

Extra arguments are passed to `isoica dim-scaling`; results go to results/dim_scaling by default.
"""

import sys

from isoica.cli import dispatch

if __name__ == "__main__":
    argv = sys.argv[1:]
    if "--out" not in argv:
        argv += ["--out", "results/dim_scaling"]
    sys.exit(dispatch(["dim-scaling"] + argv))
