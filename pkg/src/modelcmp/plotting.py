"""SVG figures: critical-difference diagram, windowpane grid, posterior simplex.

Figures are built on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state), so renderers are safe to call from several threads. Output is
byte-stable: a fixed SVG hash salt, no date stamp, and text kept as
``<text>`` elements rather than glyph paths. Key artists carry ``gid``
attributes (rendered as ``<g id=...>``) so the SVG can be inspected.
"""

from __future__ import annotations

import io
import math

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Patch, Polygon, Rectangle
import numpy as np

from .decisions import NO_DECISION, ROPE, X_BETTER, Y_BETTER, DecisionMatrix

__all__ = [
    "VERDICT_STYLE",
    "CONDENSED_THRESHOLD",
    "cd_groups",
    "cd_diagram",
    "windowpane",
    "barycentric",
    "simplex_regions",
    "simplex_plot",
    "render_svg",
]

# Fixed palette (colour-blind safe) plus a glyph so verdicts read without colour.
VERDICT_STYLE = {
    X_BETTER: ("#1b7837", ">", "row model better"),
    Y_BETTER: ("#762a83", "<", "column model better"),
    ROPE: ("#4393c3", "=", "practically equivalent (ROPE)"),
    NO_DECISION: ("#e0e0e0", "?", "no decision"),
}
HIGHLIGHT = "#d6604d"
CONDENSED_THRESHOLD = 40

_RC = {
    "svg.hashsalt": "modelcmp",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "path.simplify": False,
}


def render_svg(fig: Figure) -> str:
    """Serialize ``fig`` to an SVG string, deterministically."""
    buf = io.StringIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def _new_figure(width: float, height: float) -> Figure:
    with matplotlib.rc_context(_RC):
        return Figure(figsize=(width, height))


# ---------------------------------------------------------------- CD diagram


def cd_groups(avg_ranks, cd: float) -> list[tuple[int, ...]]:
    """Maximal runs of models (on the sorted rank line) spanning at most ``cd``.

    Each group is returned as model indices in increasing average rank.
    Singletons are not groups. Ties in rank keep input order.
    """
    r = np.asarray(avg_ranks, dtype=float)
    order = np.argsort(r, kind="stable")
    s = r[order]
    k = len(s)
    groups = []
    last_end = -1
    for i in range(k):
        j = i
        while j + 1 < k and s[j + 1] - s[i] <= cd:
            j += 1
        # maximal iff it reaches further than the previous interval
        if j > i and j > last_end:
            groups.append(tuple(int(m) for m in order[i:j + 1]))
            last_end = j
    return groups


def _pack_rows(spans):
    """Greedy row assignment so bars in one row never overlap."""
    rows_end: list[float] = []
    rows = []
    for lo, hi in spans:
        for row, end in enumerate(rows_end):
            if lo > end:
                rows_end[row] = hi
                rows.append(row)
                break
        else:
            rows_end.append(hi)
            rows.append(len(rows_end) - 1)
    return rows


def cd_diagram(avg_ranks, cd: float, labels, title: str | None = None) -> str:
    """Critical-difference diagram as an SVG document.

    Models sit on a number line over [1, k]. Bold bars join every maximal
    group whose rank span is within ``cd``; the group holding the top-ranked
    model is highlighted. Up to 40 models use the classic two-sided elbow
    labels; beyond that labels are stacked in columns under the axis and
    keyed to the axis ticks by position number.
    """
    r = np.asarray(avg_ranks, dtype=float)
    labels = list(labels)
    k = len(r)
    if k != len(labels):
        raise ValueError("avg_ranks and labels differ in length")
    if not np.all(np.isfinite(r)):
        raise ValueError("average ranks must be finite")
    order = [int(m) for m in np.argsort(r, kind="stable")]
    groups = cd_groups(r, cd)
    best = order[0]
    spans = [(r[g[0]], r[g[-1]]) for g in groups]
    rows = _pack_rows(spans)
    n_rows = max(rows, default=-1) + 1
    condensed = k > CONDENSED_THRESHOLD

    width = 10.0 if condensed else 8.0
    lo, hi = 1.0, float(max(k, 2))
    if condensed:
        n_cols = 4
        per_col = math.ceil(k / n_cols)
        height = 1.6 + 0.12 * n_rows + 0.16 * per_col
    else:
        half = math.ceil(k / 2)
        height = 1.4 + 0.12 * n_rows + 0.22 * half
    fig = _new_figure(width, height)
    ax = fig.add_axes((0.0, 0.0, 1.0, 1.0))
    ax.set_axis_off()
    # data coords: x in inches, y in inches from the top (growing downward)
    ax.set_xlim(0, width)
    ax.set_ylim(height, 0)
    margin = 1.9 if not condensed else 0.5
    x0, x1 = margin, width - margin

    def xpos(rank):
        return x0 + (rank - lo) / (hi - lo) * (x1 - x0)

    axis_y = 0.75
    ax.plot([x0, x1], [axis_y, axis_y], color="black", lw=1.0, gid="cd-axis")
    step = 1 if k <= 20 else (5 if k <= 60 else 10)
    ticks = sorted(set([1, k] + list(range(step, k + 1, step))))
    for t in ticks:
        ax.plot([xpos(t), xpos(t)], [axis_y, axis_y - 0.08], color="black", lw=0.8)
        ax.text(xpos(t), axis_y - 0.12, str(t), ha="center", va="bottom", fontsize=8)

    # CD reference bar
    if cd > 0:
        cd_len = min(cd, hi - lo)
        ax.plot([xpos(lo), xpos(lo + cd_len)], [0.2, 0.2], color="black", lw=1.2, gid="cd-reference")
        ax.text(xpos(lo + cd_len / 2), 0.16, f"CD = {cd:.4g}", ha="center", va="bottom", fontsize=8)

    bar_top = axis_y + 0.14
    for g, row, (a, b) in zip(groups, rows, spans):
        y = bar_top + 0.12 * row
        top = best in g
        ax.plot([xpos(a) - 0.03, xpos(b) + 0.03], [y, y], color=HIGHLIGHT if top else "black",
                lw=3.0 if top else 2.2, solid_capstyle="butt",
                gid=f"cd-group-{'top-' if top else ''}{'-'.join(str(m) for m in g)}")
    below = bar_top + 0.12 * n_rows + 0.1

    if not condensed:
        half = math.ceil(k / 2)
        for pos, m in enumerate(order):
            left = pos < half
            line = pos if left else k - 1 - pos
            y = below + 0.22 * line
            xm = xpos(r[m])
            xe = x0 - 0.1 if left else x1 + 0.1
            ax.plot([xm, xm, xe], [axis_y, y, y], color="black", lw=0.7, gid=f"cd-model-{m}")
            ax.text(xe - 0.05 if left else xe + 0.05, y, f"{labels[m]} ({r[m]:.2f})",
                    ha="right" if left else "left", va="center", fontsize=8,
                    fontweight="bold" if m == best else "normal")
    else:
        for pos, m in enumerate(order):
            xm = xpos(r[m])
            ax.plot([xm, xm], [axis_y, axis_y + 0.07], color="black", lw=0.6, gid=f"cd-model-{m}")
        col_w = (width - 0.4) / n_cols
        for pos, m in enumerate(order):
            col, line = divmod(pos, per_col)
            ax.text(0.2 + col * col_w, below + 0.16 * line, f"{pos + 1}. {labels[m]} ({r[m]:.2f})",
                    ha="left", va="center", fontsize=6.5, fontweight="bold" if m == best else "normal")
        ax.text(x1, 0.2, "models listed below in rank order", ha="right", va="bottom", fontsize=6.5)
    if title:
        ax.text(width / 2, 0.05, title, ha="center", va="top", fontsize=10)
    return render_svg(fig)


# ---------------------------------------------------------------- windowpane


def windowpane(
    matrix: DecisionMatrix,
    ordering=None,
    title: str | None = None,
) -> str:
    """k-by-k verdict grid with models in the same order on both axes.

    ``ordering`` lists models best first; cell (row x, column y) is filled by
    the verdict for x against y and labelled with the row model's rank and
    the verdict glyph.
    """
    k = len(matrix.models)
    if any(len(row) != k for row in matrix.cells) or len(matrix.cells) != k:
        raise ValueError("decision matrix must be square")
    ordering = list(ordering) if ordering is not None else list(matrix.models)
    m = matrix.reordered(ordering)
    cell = 0.32 if k <= 20 else max(0.09, 7.0 / k)
    fs = max(2.5, min(7.0, cell * 22))
    label_w = 1.6
    width = label_w + k * cell + 0.3
    height = label_w + k * cell + 0.9
    fig = _new_figure(width, height)
    ax = fig.add_axes((0.0, 0.0, 1.0, 1.0))
    ax.set_axis_off()
    ax.set_xlim(0, width)
    ax.set_ylim(height, 0)
    gx, gy = label_w, label_w
    for i in range(k):
        for j in range(k):
            v = m.cells[i][j]
            fill, glyph, _ = VERDICT_STYLE[v]
            # add_artist skips per-patch autoscaling, which dominates at large k
            ax.add_artist(Rectangle((gx + j * cell, gy + i * cell), cell, cell, facecolor=fill,
                                   edgecolor="white", lw=0.4, gid=f"cell-{i}-{j}-{v}"))
            ax.text(gx + (j + 0.5) * cell, gy + (i + 0.5) * cell, f"{i + 1}{glyph}",
                    ha="center", va="center", fontsize=fs,
                    color="white" if v in (X_BETTER, Y_BETTER) else "black")
    for i, name in enumerate(m.models):
        ax.text(gx - 0.05, gy + (i + 0.5) * cell, f"{i + 1}. {name}", ha="right", va="center", fontsize=fs)
        ax.text(gx + (i + 0.5) * cell, gy - 0.05, f"{i + 1}. {name}", ha="left", va="bottom",
                rotation=90, rotation_mode="anchor", fontsize=fs)
    handles = [Patch(facecolor=VERDICT_STYLE[v][0], label=f"{VERDICT_STYLE[v][1]}  {VERDICT_STYLE[v][2]}")
               for v in (X_BETTER, Y_BETTER, ROPE, NO_DECISION)]
    legend = ax.legend(handles=handles, loc="lower left", bbox_to_anchor=(0.0, 0.0), ncol=2,
                       fontsize=7, frameon=False)
    legend.set_gid("windowpane-legend")
    if title:
        ax.text(width / 2, 0.1, title, ha="center", va="top", fontsize=10)
    return render_svg(fig)


# ---------------------------------------------------------------- simplex

# vertices: left = x better, top = ROPE, right = y better
SIMPLEX_VERTICES = np.array([[0.0, 0.0], [0.5, math.sqrt(3.0) / 2.0], [1.0, 0.0]])


def barycentric(points) -> np.ndarray:
    """Project (p_left, p_rope, p_right) triples onto the triangle plane."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if p.shape[-1] != 3:
        raise ValueError("points must be triples")
    if np.any(p < -1e-9) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("points must be probability triples summing to 1")
    return p @ SIMPLEX_VERTICES


def simplex_regions(points) -> np.ndarray:
    """Region index per point: 0 x better, 1 ROPE, 2 y better (largest component)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return np.argmax(p, axis=1)


def simplex_plot(
    points,
    labels: tuple[str, str] = ("x", "y"),
    rope: float | None = None,
    max_points: int = 10000,
    title: str | None = None,
) -> str:
    """Posterior triples projected onto a triangle with the three regions.

    Each triple is placed at its barycentric position; the boundaries split
    the triangle where the largest component changes. The share of points
    in each region is printed beside it. With more than ``max_points``
    triples an evenly spaced subset is drawn (shares use all of them).
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    xy = barycentric(p)
    region = simplex_regions(p)
    shares = np.bincount(region, minlength=3) / len(region)
    if len(xy) > max_points:
        keep = np.linspace(0, len(xy) - 1, max_points).round().astype(int)
        xy = xy[keep]
    fig = _new_figure(5.5, 5.2)
    ax = fig.add_axes((0.05, 0.05, 0.9, 0.85))
    ax.set_axis_off()
    ax.set_aspect("equal")
    ax.set_xlim(-0.15, 1.15)
    ax.set_ylim(-0.15, 1.0)
    v = SIMPLEX_VERTICES
    ax.add_patch(Polygon(v, closed=True, fill=False, edgecolor="black", lw=1.0, gid="simplex-triangle"))
    centroid = v.mean(axis=0)
    for a, b in ((0, 1), (1, 2), (0, 2)):
        mid = (v[a] + v[b]) / 2
        ax.plot([centroid[0], mid[0]], [centroid[1], mid[1]], color="grey", lw=0.8, ls="--",
                gid=f"simplex-boundary-{a}{b}")
    ax.scatter(xy[:, 0], xy[:, 1], s=2, c="#2166ac", alpha=0.3, linewidths=0, gid="simplex-points")
    x_lab, y_lab = labels
    rope_txt = f" (|d| <= {rope:g})" if rope is not None else ""
    ax.text(v[0, 0], v[0, 1] - 0.05, f"{x_lab} better", ha="center", va="top")
    ax.text(v[1, 0], v[1, 1] + 0.03, f"ROPE{rope_txt}", ha="center", va="bottom")
    ax.text(v[2, 0], v[2, 1] - 0.05, f"{y_lab} better", ha="center", va="top")
    anchors = [(v[0] * 2 + centroid) / 3, (v[1] * 2 + centroid) / 3, (v[2] * 2 + centroid) / 3]
    for idx, (a, share) in enumerate(zip(anchors, shares)):
        ax.text(a[0], a[1], f"{share:.3f}", ha="center", va="center", fontsize=10, fontweight="bold",
                gid=f"simplex-share-{idx}")
    if title:
        fig.text(0.5, 0.97, title, ha="center", va="top", fontsize=10)
    return render_svg(fig)
