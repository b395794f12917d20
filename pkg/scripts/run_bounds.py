#!/usr/bin/env python3
"""Bound-extraction chain for the GHz bulk-acoustic device.

Feeds the measured decay times (T1 = 85.8(15) us, T2 = 147.3(26) us) and the
ground-state ellipticity (epsilon = 0.020(5)) through both rate models and
prints the resulting upper bounds on kappa, tau_c, beta_bar, and l_k.
"""

import argparse
import sys

from decolab.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--json-out", default="bounds.json")
    parser.add_argument("--t1-us", type=float, default=85.8)
    parser.add_argument("--st1-us", type=float, default=1.5)
    parser.add_argument("--t2-us", type=float, default=147.3)
    parser.add_argument("--st2-us", type=float, default=2.6)
    parser.add_argument("--epsilon", type=float, default=0.020)
    parser.add_argument("--sigma-epsilon", type=float, default=0.005)
    args = parser.parse_args()

    return cli_main([
        "bounds",
        "--t1-us", str(args.t1_us), "--st1-us", str(args.st1_us),
        "--t2-us", str(args.t2_us), "--st2-us", str(args.st2_us),
        "--epsilon", str(args.epsilon),
        "--sigma-epsilon", str(args.sigma_epsilon),
        "--profile", "hbar-16ug",
        "--json-out", args.json_out,
    ])


if __name__ == "__main__":
    sys.exit(main())
