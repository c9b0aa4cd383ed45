"""Loss-saturation curves for the toy JPQ and margin-MSE runs.

Writes each loss trace as CSV and, if matplotlib is installed, a PNG with the
raw loss and its 50-step moving average.

    python scripts/saturation_curve.py --out runs/ --seed 0
"""

import argparse
import json
from pathlib import Path

from lthkit.experiments import ToyConfig, flattening_ratio, jpq_toy_run, margin_mse_toy_run
from lthkit.lthtrain import moving_average, write_trace

WINDOW = 50


def plot(runs, path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping the plot (pip install 'artifact[plots]')")
        return
    fig, axes = plt.subplots(1, len(runs), figsize=(5 * len(runs), 3.5))
    for ax, (name, run) in zip(axes, runs.items()):
        losses = run.losses
        ma = moving_average(losses, WINDOW)
        ax.plot(losses, color="0.75", lw=0.8, label="loss")
        ax.plot(range(WINDOW - 1, len(losses)), ma, color="C0", label=f"{WINDOW}-step average")
        ax.set_title(name)
        ax.set_xlabel("step")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    print(f"wrote {path}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=500)
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ToyConfig(seed=args.seed, steps=args.steps)
    runs = {"jpq": jpq_toy_run(cfg), "margin-mse": margin_mse_toy_run(cfg)}
    summary = {}
    for name, run in runs.items():
        write_trace(run.result.trace, out / f"{name}_trace.csv")
        ma = moving_average(run.losses, WINDOW)
        summary[name] = run.metrics | {"flattening_ratio": flattening_ratio(ma)}
        print(name, json.dumps(summary[name]))
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    plot(runs, out / "saturation.png")


if __name__ == "__main__":
    main()
