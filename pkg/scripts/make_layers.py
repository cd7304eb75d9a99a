#!/usr/bin/env python3
"""Generate a synthetic layer family plus a ready-to-run sweep config.

Writes layer<i>.npy / layer<i>.calib.npy pairs and a config.json wired to
them, so a full demo is:

    python3 scripts/make_layers.py --out demo
    saliq sweep --config demo/config.json --out demo/results
    saliq report --input demo/results/sweep.csv --out demo/results
"""

import argparse
import json
from pathlib import Path

from saliq import save_calibration, save_matrix, synthetic_outlier_layer


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo", help="output directory")
    parser.add_argument("--layers", type=int, default=4, help="number of layers")
    parser.add_argument("--dim", type=int, default=256, help="square layer dimension")
    parser.add_argument("--samples", type=int, default=128, help="calibration samples per layer")
    parser.add_argument("--seed", type=int, default=0, help="base seed")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    layer_paths = []
    for i in range(args.layers):
        w, x = synthetic_outlier_layer(
            args.dim, args.seed + i, samples=args.samples, name=f"layer{i}"
        )
        save_matrix(w, out / f"layer{i}.npy")
        save_calibration(x, out / f"layer{i}.calib.npy")
        layer_paths.append(str(out / f"layer{i}.npy"))

    config = {
        "layers": layer_paths,
        "methods": ["random", "awq", "spqr", "svd", "none"],
        "seed": args.seed,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote {args.layers} layers of {args.dim}x{args.dim} and {out / 'config.json'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
