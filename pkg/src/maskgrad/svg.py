"""Self-contained SVG emitters: line charts, heatmaps, stacked bars.

Pure string building with fixed number formatting, so identical inputs
always yield byte-identical files.
"""

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)

_HEADER = '<?xml version="1.0" encoding="UTF-8"?>\n'
_FONT = 'font-family="sans-serif"'


def _num(v):
    return f"{float(v):.2f}"


def _svg_open(width, height):
    return (
        _HEADER
        + f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        + f'viewBox="0 0 {width} {height}">\n'
        + f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
    )


def _text(x, y, content, size=11, anchor="start", extra=""):
    return (
        f'<text x="{_num(x)}" y="{_num(y)}" font-size="{size}" {_FONT} '
        f'text-anchor="{anchor}" {extra}>{content}</text>\n'
    )


def _heat_color(intensity):
    # white -> steel blue
    r = int(round(255 + (31 - 255) * intensity))
    g = int(round(255 + (119 - 255) * intensity))
    b = int(round(255 + (180 - 255) * intensity))
    return f"rgb({r},{g},{b})"


def line_chart(series, title="", x_label="", y_label="", width=640, height=400,
               y_min=0.0, y_max=1.0):
    """Line chart; ``series`` is a list of (label, [(x, y), ...]) pairs.

    An empty series list still renders the frame, axes and tick marks.
    """
    left, right, top, bottom = 60, 150, 40, 50
    plot_w = width - left - right
    plot_h = height - top - bottom
    xs = [p[0] for _, points in series for p in points]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return top + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h

    out = _svg_open(width, height)
    if title:
        out += _text(width / 2, 22, title, size=14, anchor="middle")
    out += (
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>\n'
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>\n'
    )
    n_yticks = 5
    for i in range(n_yticks + 1):
        y_val = y_min + (y_max - y_min) * i / n_yticks
        y = py(y_val)
        out += f'<line x1="{left - 4}" y1="{_num(y)}" x2="{left}" y2="{_num(y)}" stroke="black"/>\n'
        out += _text(left - 8, y + 4, f"{y_val:.2f}", size=10, anchor="end")
    x_ticks = sorted(set(xs)) if xs else [0, 1]
    stride = max(1, len(x_ticks) // 10)
    for x_val in x_ticks[::stride]:
        x = px(x_val)
        out += f'<line x1="{_num(x)}" y1="{top + plot_h}" x2="{_num(x)}" y2="{top + plot_h + 4}" stroke="black"/>\n'
        out += _text(x, top + plot_h + 16, f"{x_val:g}", size=10, anchor="middle")
    if x_label:
        out += _text(left + plot_w / 2, height - 12, x_label, size=12, anchor="middle")
    if y_label:
        out += _text(16, top + plot_h / 2, y_label, size=12, anchor="middle",
                     extra=f'transform="rotate(-90 16 {_num(top + plot_h / 2)})"')
    for si, (label, points) in enumerate(series):
        color = PALETTE[si % len(PALETTE)]
        coords = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in points)
        if coords:
            out += f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>\n'
        legend_y = top + 14 * si
        out += (
            f'<rect x="{left + plot_w + 12}" y="{legend_y}" width="10" height="10" fill="{color}"/>\n'
        )
        out += _text(left + plot_w + 26, legend_y + 9, label, size=10)
    return out + "</svg>\n"


def heatmap(matrix, row_labels, col_labels, title="", x_title="predicted",
            y_title="true", cell=34):
    """Square heatmap with per-cell counts; cells carry class="cell"."""
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    left, top = 110, 90
    width = left + cols * cell + 30
    height = top + rows * cell + 40
    flat_max = max((max(row) for row in matrix), default=0)
    out = _svg_open(width, height)
    if title:
        out += _text(width / 2, 22, title, size=14, anchor="middle")
    out += _text(left + cols * cell / 2, 44, x_title, size=12, anchor="middle")
    out += _text(20, top + rows * cell / 2, y_title, size=12, anchor="middle",
                 extra=f'transform="rotate(-90 20 {_num(top + rows * cell / 2)})"')
    for j, label in enumerate(col_labels):
        x = left + j * cell + cell / 2
        out += _text(x, top - 8, label, size=9, anchor="start",
                     extra=f'transform="rotate(-45 {_num(x)} {_num(top - 8)})"')
    for i, label in enumerate(row_labels):
        out += _text(left - 6, top + i * cell + cell / 2 + 3, label, size=9, anchor="end")
    for i in range(rows):
        for j in range(cols):
            value = matrix[i][j]
            intensity = (value / flat_max) if flat_max else 0.0
            x = left + j * cell
            y = top + i * cell
            out += (
                f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_heat_color(intensity)}" stroke="#cccccc"/>\n'
            )
            text_color = "white" if intensity > 0.6 else "black"
            out += _text(x + cell / 2, y + cell / 2 + 3, f"{value:g}", size=9,
                         anchor="middle", extra=f'fill="{text_color}"')
    return out + "</svg>\n"


def stacked_bars(bar_labels, segments, segment_labels, title="", x_label=""):
    """Horizontal stacked bars; ``segments[s][b]`` is segment s of bar b."""
    n_bars = len(bar_labels)
    bar_h, gap, left, top = 18, 6, 170, 60
    plot_w = 420
    width = left + plot_w + 160
    height = top + n_bars * (bar_h + gap) + 40
    totals = [sum(segments[s][b] for s in range(len(segments))) for b in range(n_bars)]
    scale = plot_w / max(totals) if n_bars and max(totals) > 0 else 0.0
    out = _svg_open(width, height)
    if title:
        out += _text(width / 2, 22, title, size=14, anchor="middle")
    if x_label:
        out += _text(left + plot_w / 2, height - 10, x_label, size=11, anchor="middle")
    for b in range(n_bars):
        y = top + b * (bar_h + gap)
        out += _text(left - 6, y + bar_h - 5, bar_labels[b], size=10, anchor="end")
        x = float(left)
        for s in range(len(segments)):
            seg_w = segments[s][b] * scale
            if seg_w > 0:
                out += (
                    f'<rect x="{_num(x)}" y="{y}" width="{_num(seg_w)}" height="{bar_h}" '
                    f'fill="{PALETTE[s % len(PALETTE)]}"/>\n'
                )
            x += seg_w
    for s, label in enumerate(segment_labels):
        y = top + 14 * s
        out += f'<rect x="{left + plot_w + 16}" y="{y}" width="10" height="10" fill="{PALETTE[s % len(PALETTE)]}"/>\n'
        out += _text(left + plot_w + 30, y + 9, label, size=10)
    return out + "</svg>\n"
