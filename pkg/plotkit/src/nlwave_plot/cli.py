"""Command-line wrapper: one CSV in, one image out.

Exit codes follow the simulation CLI's contract: 0 on success, 1 when
the input fails validation (missing file, wrong header, empty data),
2 for numerical failure (no current kind computes enough to hit this).
"""

import argparse
import sys

from .render import KINDS, PlotDataError, PlotSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlwave-plot",
        description="Render one figure image from an nlwave CSV output.",
    )
    parser.add_argument("--kind", required=True, choices=sorted(KINDS),
                        help="which figure to draw")
    parser.add_argument("--in", required=True, dest="source", metavar="CSV",
                        help="input CSV path")
    parser.add_argument("--out", required=True, dest="target", metavar="IMG",
                        help="output image path (extension picks the format)")
    parser.add_argument("--title", default=None,
                        help="override the default chart title")
    args = parser.parse_args(argv)
    spec = PlotSpec(kind=args.kind, source=args.source, target=args.target,
                    title=args.title)
    try:
        render(spec)
    except PlotDataError as exc:
        print(f"nlwave-plot: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"nlwave-plot: cannot write {args.target}: {exc}",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
