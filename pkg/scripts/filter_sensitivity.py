"""Refit existing sweep samples under a grid of percentile-filter settings.

Reads <sweep>/<config>/samples.csv written by run_protocol_sweep.py and prints
v_f and empirical q_max per configuration for each (bins, percentile) pair.
Nothing is written; this only shows how sensitive the fits are to the filter.
"""

import argparse
from pathlib import Path

from uamflow.fd import FilterConfig, FitError, filter_and_fit
from uamflow.measure import read_samples


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("sweep")
    ap.add_argument("--bins", default="10,20,40")
    ap.add_argument("--percentiles", default="0,50,75,90")
    args = ap.parse_args(argv)

    dirs = sorted(p for p in Path(args.sweep).iterdir() if (p / "samples.csv").exists())
    samples = {d.name: read_samples(d / "samples.csv").nonzero() for d in dirs}
    for b in (int(x) for x in args.bins.split(",")):
        for p in (float(x) for x in args.percentiles.split(",")):
            cells = []
            for name, s in samples.items():
                try:
                    fit, _ = filter_and_fit(s.k, s.q, FilterConfig(b, p))
                    cells.append(f"{name}:{fit.v_f:.3f}/{fit.q_max_empirical:.3f}")
                except FitError:
                    cells.append(f"{name}:fail")
            print(f"B={b} p={p:g}  " + "  ".join(cells))


if __name__ == "__main__":
    main()
