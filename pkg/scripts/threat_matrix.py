"""Threat x countermeasure ablation grid.

Runs T1..T5 with all defenses on, then once per countermeasure switched off,
and prints which scenarios still meet their expected outcome.
"""

import argparse
import sys

from nfcbms.threats import ALL_COUNTERMEASURES, SCENARIOS, Countermeasure, run_all


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ids = sorted(SCENARIOS)
    print(f"{'disabled':<10}" + "".join(f"{t:>8}" for t in ids))
    ok = True
    for off in [None, *Countermeasure]:
        enabled = ALL_COUNTERMEASURES - ({off} if off else set())
        outcomes = {o.scenario.id: o for o in run_all(enabled, args.seed)}
        cells = []
        for t in ids:
            o = outcomes[t]
            cells.append(f"{('ok' if o.matched_expectation else o.result[:7]):>8}")
            depends = off is not None and off in SCENARIOS[t].countermeasures
            ok &= o.matched_expectation != depends
        print(f"{off.name if off else '-':<10}" + "".join(cells))
    print("ablation flips exactly the dependent scenarios" if ok else "UNEXPECTED ablation pattern")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
