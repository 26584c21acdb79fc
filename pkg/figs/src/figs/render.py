"""Render mesonbell scan CSVs into static figures.

Input is consumed purely through the documented CSV schemas:

    fig2:  theta_rad,r_qm,lrt_bound
    fig3:  delta_t_s,beta,criterion,p_s,stderr

with optional ``#``-prefixed metadata lines.  Every plotted artist carries a
stable ``gid`` (``series:*`` / ``refline:*``) that survives into the SVG
output, so tests and downstream tooling can verify the document structure
instead of comparing pixels or bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

FIG2_HEADER = ["theta_rad", "r_qm", "lrt_bound"]
FIG3_HEADER = ["delta_t_s", "beta", "criterion", "p_s", "stderr"]

KINDS = ("fig2", "fig3")
FORMATS = ("svg", "png")

P_THRESHOLD = 2.0 - math.sqrt(2.0)

_RC = {
    "svg.hashsalt": "figs",
    "svg.fonttype": "none",
    "path.simplify": False,
}


class SchemaMismatchError(ValueError):
    """The CSV header does not match the declared figure kind."""

    def __init__(self, expected: list[str], got: list[str]):
        missing = [c for c in expected if c not in got]
        extra = [c for c in got if c not in expected]
        super().__init__(
            f"header mismatch: expected {','.join(expected)}, got {','.join(got)}"
            + (f"; missing {missing}" if missing else "")
            + (f"; unexpected {extra}" if extra else "")
        )
        self.missing = missing
        self.extra = extra


@dataclass(frozen=True)
class FigureSpec:
    input_path: str
    kind: str
    output_path: str
    image_format: str = "svg"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.image_format not in FORMATS:
            raise ValueError(f"image_format must be one of {FORMATS}, got {self.image_format!r}")


def read_csv(path: str | Path, expected_header: list[str]) -> list[dict[str, str]]:
    """Rows of a mesonbell CSV, skipping metadata comments; header must match."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    if not lines:
        raise SchemaMismatchError(expected_header, [])
    header = lines[0].split(",")
    if header != expected_header:
        raise SchemaMismatchError(expected_header, header)
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            raise SchemaMismatchError(expected_header, parts)
        rows.append(dict(zip(header, parts)))
    if not rows:
        raise SchemaMismatchError(expected_header, header)
    return rows


def _render_fig2(rows: list[dict[str, str]], ax) -> None:
    theta = [float(r["theta_rad"]) for r in rows]
    r_qm = [float(r["r_qm"]) for r in rows]
    bound = [float(r["lrt_bound"]) for r in rows]
    line = ax.plot(theta, bound, "-", color="black", label="local-model bound")[0]
    line.set_gid("series:lrt_bound")
    line = ax.plot(theta, r_qm, ":", color="tab:blue", label="quantum prediction")[0]
    line.set_gid("series:r_qm")
    ref = ax.axhline(2.0, color="gray", linewidth=0.8)
    ref.set_gid("refline:classical-2")
    ref = ax.axhline(2.0 * math.sqrt(2.0), color="gray", linewidth=0.8, linestyle="--")
    ref.set_gid("refline:quantum-2sqrt2")
    ax.set_xlabel("theta (rad)")
    ax.set_ylabel("R")
    ax.legend(loc="lower right")


def _render_fig3(rows: list[dict[str, str]], ax) -> None:
    order: list[str] = []
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        key = r["beta"]
        if key not in series:
            order.append(key)
            series[key] = []
        series[key].append((float(r["delta_t_s"]), float(r["p_s"])))
    for key in order:
        pts = series[key]
        line = ax.plot([p[0] for p in pts], [p[1] for p in pts],
                       label=f"beta = {float(key):g}")[0]
        line.set_gid(f"series:beta={float(key):g}")
    ref = ax.axhline(P_THRESHOLD, color="gray", linewidth=0.8, linestyle="--")
    ref.set_gid("refline:p-threshold")
    ax.annotate(f"conclusive above {P_THRESHOLD:.4f}",
                xy=(0.02, P_THRESHOLD), xycoords=("axes fraction", "data"),
                ha="left", va="bottom", fontsize=8, color="gray")
    ax.set_xlabel("delta_t (s)")
    ax.set_ylabel("space-like fraction")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(loc="upper right")


def render(spec: FigureSpec) -> Path:
    """Render the CSV named by the spec; returns the written path."""
    expected = FIG2_HEADER if spec.kind == "fig2" else FIG3_HEADER
    rows = read_csv(spec.input_path, expected)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        try:
            if spec.kind == "fig2":
                _render_fig2(rows, ax)
            else:
                _render_fig3(rows, ax)
            out = Path(spec.output_path)
            fig.savefig(out, format=spec.image_format, metadata=_stable_metadata(spec))
        finally:
            plt.close(fig)
    return Path(spec.output_path)


def _stable_metadata(spec: FigureSpec) -> dict | None:
    # Drop the creation date so repeated renders are byte-stable.
    if spec.image_format == "svg":
        return {"Date": None}
    return None
