#!/usr/bin/env python3
"""Regenerate the headline datasets with the shipped profiles.

Writes into ./figures_out (override with argv[1]):
  map_shallow.csv / map_bulk.csv   PL-ratio power maps (+ JSON sidecars)
  trace_enhance.csv                two-laser trace at 159 uW / 38 mW
  trace_suppress.csv               two-laser trace at 241 uW / 38 mW
  curve_ir_off.csv / curve_ir_25mw.csv / curve_bulk_ir_35mw.csv
                                   NV- fraction vs green power
  optimum_shallow.json             IR power maximizing the NV- fraction

Everything goes through the CLI, so this doubles as an end-to-end exercise
of the command surface.
"""

import json
import pathlib
import sys

from nvcharge.cli import main

OUT = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "figures_out")


def run(*argv):
    code = main(list(argv))
    if code != 0:
        raise SystemExit(code)


def main_script():
    OUT.mkdir(parents=True, exist_ok=True)

    for profile in ("shallow", "bulk"):
        d = OUT / f"map_{profile}"
        run("--profile", profile, "--out", str(d), "map")
        (OUT / f"map_{profile}.csv").write_bytes((d / "map.csv").read_bytes())

    for name, green_uw in (("trace_enhance", "159"), ("trace_suppress", "241")):
        d = OUT / name
        run("--out", str(d), "simulate", "--green-uw", green_uw,
            "--ir-mw", "38", "--ir-window", "10:60us", "--duration-us", "100")
        (OUT / f"{name}.csv").write_bytes((d / "trace.csv").read_bytes())

    curves = (("curve_ir_off", "shallow", "0"),
              ("curve_ir_25mw", "shallow", "25"),
              ("curve_bulk_ir_35mw", "bulk", "35"))
    for name, profile, ir_mw in curves:
        d = OUT / name
        run("--profile", profile, "--out", str(d), "curve", "--ir-mw", ir_mw)
        (OUT / f"{name}.csv").write_bytes((d / "curve.csv").read_bytes())

    d = OUT / "optimum"
    run("--out", str(d), "optimize", "--green-uw", "10")
    doc = json.loads((d / "optimize.json").read_text())
    (OUT / "optimum_shallow.json").write_text(json.dumps(doc, indent=2,
                                                         sort_keys=True) + "\n")
    print(f"wrote {OUT}/")


if __name__ == "__main__":
    main_script()
