"""CSV reading and the six figure kinds.

Every kind pins the exact header its input must carry, so a mismatched
file fails before any drawing happens. Rendering is deterministic for a
fixed input: fixed figure geometry, no timestamps, Agg backend.
"""

import csv
import math
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
# svg element ids are salted; fixing the salt keeps svg output stable
matplotlib.rcParams["svg.hashsalt"] = "nlwave-plot"

import matplotlib.pyplot as plt


class PlotDataError(Exception):
    """Input CSV is missing, malformed, or empty of plottable rows."""


# kind -> (accepted headers, default title, axis labels)
KINDS = {
    "spin": (
        (("t", "spin", "energy", "norm"),
         ("t", "spin", "energy", "norm", "detM")),
        "spin observable", ("t", "S"),
    ),
    "divergence": (
        (("t", "log_dev"),),
        "log deviation between twin trajectories", ("t", "log |dS|"),
    ),
    "maxdev": (
        (("t", "log_dev"),),
        "running max log deviation", ("t", "max log |dS|"),
    ),
    "detm": (
        (("t", "detM"),),
        "determinant along the trajectory", ("t", "det M"),
    ),
    "mlce": (
        (("t", "gamma"),),
        "exponent estimator series", ("t", "gamma"),
    ),
    "wscan": (
        (("w", "gamma_hat", "detM_sign"),),
        "tail exponent estimate vs coupling", ("w", "gamma_hat"),
    ),
}


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    source: str
    target: str
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotDataError(
                f"unknown kind {self.kind!r}; choose from "
                + ", ".join(sorted(KINDS)))


def read_table(path, kind: str) -> dict:
    """Columns of the CSV as float lists, keyed by header name.

    The header must match one of the kind's accepted forms exactly;
    "-inf"/"nan" cells parse to the corresponding floats.
    """
    accepted = KINDS[kind][0]
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise PlotDataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise PlotDataError(f"{path} is empty")
    header = tuple(rows[0])
    if header not in accepted:
        want = " or ".join(",".join(h) for h in accepted)
        raise PlotDataError(
            f"{path} header {','.join(header)!r} does not match "
            f"kind {kind!r} (wants {want})")
    table = {name: [] for name in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise PlotDataError(
                f"{path}:{lineno} has {len(row)} fields, header has "
                f"{len(header)}")
        for name, cell in zip(header, row):
            try:
                table[name].append(float(cell))
            except ValueError:
                raise PlotDataError(
                    f"{path}:{lineno} bad number {cell!r}") from None
    return table


def _running_max(values):
    out = []
    best = -math.inf
    for v in values:
        best = max(best, v)
        out.append(best)
    return out


def _finite_pairs(xs, ys):
    pairs = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def render(spec: PlotSpec) -> str:
    """Draw one chart from the CSV and write it to spec.target."""
    table = read_table(spec.source, spec.kind)
    _, default_title, (xlabel, ylabel) = KINDS[spec.kind]

    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=120)
    try:
        if spec.kind == "spin":
            xs, ys = table["t"], table["spin"]
            ax.plot(xs, ys, lw=0.8, color="tab:blue")
        elif spec.kind in ("divergence", "maxdev"):
            # early rows are round-off markers; the curve starts after them
            xs, ys = _finite_pairs(table["t"], table["log_dev"])
            if spec.kind == "maxdev":
                ys = _running_max(ys)
            ax.plot(xs, ys, lw=0.8, color="tab:blue")
        elif spec.kind == "detm":
            xs, ys = table["t"], table["detM"]
            ax.plot(xs, ys, lw=0.8, color="tab:blue")
            ax.axhline(0.0, color="0.4", lw=0.6)
        elif spec.kind == "mlce":
            xs, ys = table["t"], table["gamma"]
            ax.plot(xs, ys, lw=0.8, color="tab:blue")
            ax.axhline(0.0, color="0.4", lw=0.6)
        else:
            rows = [(w, g, s) for w, g, s in zip(
                table["w"], table["gamma_hat"], table["detM_sign"])
                if math.isfinite(g)]
            if not rows:
                raise PlotDataError(f"{spec.source} has no plottable rows")
            neg = [(w, g) for w, g, s in rows if s < 0.0]
            rest = [(w, g) for w, g, s in rows if s >= 0.0]
            ws = [r[0] for r in rows]
            if rest:
                ax.scatter(*zip(*rest), s=18, color="tab:blue",
                           label="det M >= 0")
            if neg:
                ax.scatter(*zip(*neg), s=18, color="tab:red",
                           label="det M < 0")
            ax.axhline(0.0, color="0.4", lw=0.6)
            ax.legend(loc="best")
            xs = ws
        if not xs:
            raise PlotDataError(f"{spec.source} has no plottable rows")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(spec.title if spec.title is not None else default_title)
        metadata = {"Date": None} if str(spec.target).endswith(".svg") else None
        fig.savefig(spec.target, metadata=metadata)
    except Exception:
        # half-written targets would look like valid outputs
        fig.clf()
        plt.close(fig)
        if os.path.exists(spec.target):
            os.remove(spec.target)
        raise
    plt.close(fig)
    return str(spec.target)
