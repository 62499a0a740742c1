"""Run the full verification battery through the command-line interface.

Writes one report (plus runtime sidecar and CSV series) per experiment
into the output directory and prints each verdict. The default scale
matches the documented gates and takes tens of minutes; --quick shrinks
every run to smoke scale (~1 min total) for a wiring check.

    python3 scripts/run_experiments.py --out results/
    python3 scripts/run_experiments.py --out smoke/ --quick
"""

import argparse
import sys

from gibbsdyn.cli import main as cli_main

QUICK_OVERRIDES = {
    "invariance": [
        "experiment.ensemble_size=256", "experiment.ess_floor=50",
        "flow.T=0.5",
    ],
    "ergodicity": [
        "flow.T=400", "flow.h=0.02", "experiment.ensemble_size=4096",
        "experiment.ess_floor=64", "experiment.rel_tolerance=0.25",
    ],
    "linear": ["experiment.ensemble_size=256", "flow.T=2"],
    "decay": ["experiment.ensemble_size=32"],
    "nstability": [],
    "coupling": ["flow.T=10", "experiment.envelope_horizon=2"],
}

EXPERIMENTS = list(QUICK_OVERRIDES)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results", help="report directory")
    ap.add_argument("--seed", type=int, default=None, help="master seed")
    ap.add_argument("--quick", action="store_true", help="smoke scale")
    ap.add_argument(
        "--only", nargs="*", choices=EXPERIMENTS, default=None,
        help="subset of experiments to run",
    )
    args = ap.parse_args()

    worst = 0
    for name in args.only or EXPERIMENTS:
        argv = [name, "--out", args.out]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        if args.quick:
            for kv in QUICK_OVERRIDES[name]:
                argv += ["--set", kv]
        print(f"== {name} ==", flush=True)
        code = cli_main(argv)
        print(f"   exit {code}", flush=True)
        worst = max(worst, code) if code != 64 else 64
        if code == 64:
            break
    return worst


if __name__ == "__main__":
    sys.exit(main())
