"""shrinkflow-plot: render one diagnostic figure from a run directory."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, MissingArtifact, MissingColumn, PlotSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="shrinkflow-plot")
    parser.add_argument("--run", required=True, help="run directory")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--artifact", default="",
                        help="explicit artifact path inside the run dir")
    args = parser.parse_args(argv)
    spec = PlotSpec(run_dir=args.run, kind=args.kind, out_path=args.out,
                    artifact=args.artifact)
    try:
        info = render(spec)
    except (MissingArtifact, MissingColumn) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for key, val in info.items():
        print(f"{key}: {val}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
