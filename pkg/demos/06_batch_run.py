#!/usr/bin/env python3
"""Drive the batch front-end the way the `maqmsim` command does: load a
shipped config, run the full pipeline, print the report, then sweep one
parameter.  Equivalent shell commands are shown along the way."""

import json
from importlib import resources

from maqmsim import load_experiment_config, run_experiment, run_sweep
from maqmsim.cli import report_to_json, sweepable_paths

CONFIG_DIR = resources.files("maqmsim") / "configs"


def main():
    path = str(CONFIG_DIR / "qubit_default.json")
    print(f"# maqmsim run --config {path}")
    cfg = load_experiment_config(path)
    report = run_experiment(cfg)

    print(f"seed {report['seed']}, dimension {report['dimension']},"
          f" schedule valid: {report['schedule']['valid']}")
    for stage in ("maqm1_stage", "maqm2_stage"):
        block = report[stage]
        print(f"  {stage}: F = {block['fidelity']:.4f} +- {block['sigma']:.4f}"
              f"  (predicted {block['predicted_fidelity']:.4f})")
    print(f"  transmission fidelity between the two reconstructions:"
          f" {report['transmission_fidelity']:.4f}")

    # full report is deterministic JSON: same config bytes, same output bytes
    text = report_to_json(report)
    print(f"  serialized report: {len(text)} bytes,"
          f" sha256 of config embedded: {report['config_sha256'][:16]}...")

    print()
    print("# maqmsim sweep --config ... --param protocol.drift"
          " --values 0,0.5,1.0,1.5")
    doc = json.loads(open(path, "rb").read())
    doc["detection"]["heralds_per_setting"] = 4000   # keep the demo quick
    doc["estimation"]["n_resamples"] = 20
    rows = run_sweep(doc, "protocol.drift", [0.0, 0.5, 1.0, 1.5])
    print(f"  {'drift':>6}  {'source F':>9}  {'transfer F':>10}")
    for row in rows:
        print(f"  {row['value']:6.2f}  {row['maqm1_fidelity']:9.4f}"
              f"  {row['maqm2_fidelity']:10.4f}")
    print("  drift only touches the storage leg, so the source-stage")
    print("  fidelity holds still while the transfer stage decays")

    print()
    print("Sweepable parameters:")
    for name in sweepable_paths():
        print(f"  {name}")


if __name__ == "__main__":
    main()
