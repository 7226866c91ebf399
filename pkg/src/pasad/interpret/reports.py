"""CSV and SVG rendering of attribution reports and gate-weight traces.

SVGs are written directly (plain rect/line elements, fixed float
formatting) so outputs are byte-deterministic and the geometry can be
parsed back in tests.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..features import melspec
from ..nets.hyperlstm import GATES, GateWeights, gate_weight_change
from .shapley import ShapleyReport

GATE_CSV_COLUMNS = ("t", "delta_frobenius", "gate_i_norm", "gate_g_norm",
                    "gate_f_norm", "gate_o_norm")


def write_shap_csv(path, report: ShapleyReport) -> None:
    lines = ["band_index,hz_low,hz_high,shap_value"]
    for b, value in enumerate(report.values):
        lo = report.band_edges[b]
        hi = report.band_edges[b + 1]
        lines.append(f"{b},{lo!r},{hi!r},{value!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _gray(value: float, lo: float, hi: float) -> str:
    t = 0.0 if hi <= lo else (value - lo) / (hi - lo)
    level = int(round(255 * min(max(t, 0.0), 1.0)))
    return f"#{level:02x}{level:02x}{level:02x}"


def _svg_document(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def render_shap_svg(report: ShapleyReport, mel: np.ndarray) -> str:
    """Left panel: the window's mel heatmap; right panel: per-band bars.

    Bar rects carry id="bar-<band>" and widths proportional to the
    absolute attribution (positive bars orange, negative blue).
    """
    n_seg, n_mels, n_frames = mel.shape
    cols = n_seg * n_frames
    cell = 3
    heat_w, heat_h = cols * cell, n_mels * cell
    gap = 40
    bar_area = 260
    width = heat_w + gap + bar_area + 20
    height = heat_h + 40

    body = [f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    lo, hi = float(mel.min()), float(mel.max())
    for seg in range(n_seg):
        for fr in range(n_frames):
            x = (seg * n_frames + fr) * cell
            for band in range(n_mels):
                y = heat_h - (band + 1) * cell  # low frequencies at the bottom
                color = _gray(mel[seg, band, fr], lo, hi)
                body.append(f'<rect x="{x}" y="{y + 20}" width="{cell}" '
                            f'height="{cell}" fill="{color}"/>')

    values = report.values
    vmax = float(np.abs(values).max()) or 1.0
    band_h = heat_h / values.size
    x0 = heat_w + gap
    body.append(f'<line x1="{x0}" y1="20" x2="{x0}" y2="{heat_h + 20}" '
                f'stroke="black" stroke-width="1"/>')
    for b, value in enumerate(values):
        w = abs(value) / vmax * (bar_area - 10)
        y = heat_h - (b + 1) * band_h + 20
        fill = "#d95f02" if value >= 0 else "#1f78b4"
        body.append(f'<rect id="bar-{b}" x="{x0:.3f}" y="{y:.3f}" '
                    f'width="{w:.3f}" height="{band_h - 1:.3f}" fill="{fill}"/>')
    title = (f'window {report.subject_id}:{report.window_index} '
             f'class {report.predicted_class} f(x)={report.model_output:.4f} '
             f'base={report.base_value:.4f}')
    body.append(f'<text x="4" y="14" font-size="12" font-family="monospace">{title}</text>')
    return _svg_document(int(width), int(height), body)


def write_shap_svg(path, report: ShapleyReport, mel: np.ndarray) -> None:
    Path(path).write_text(render_shap_svg(report, mel))


def write_gates_csv(path, trace: list[GateWeights]) -> None:
    curve = gate_weight_change(trace)
    lines = [",".join(GATE_CSV_COLUMNS)]
    for t, rec in enumerate(trace):
        norms = [rec.gate_norm(g) for g in GATES]
        ordered = dict(zip(GATES, norms))
        row = [str(t), repr(float(curve[t]))]
        row += [repr(ordered[g]) for g in ("i", "g", "f", "o")]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def render_gates_svg(trace: list[GateWeights]) -> str:
    curve = gate_weight_change(trace)
    n = curve.size
    width, height = 460, 220
    pad = 30
    vmax = float(curve.max()) or 1.0
    body = [f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
            f'<line x1="{pad}" y1="{height - pad}" x2="{width - 10}" '
            f'y2="{height - pad}" stroke="black" stroke-width="1"/>']
    bar_w = (width - pad - 20) / n
    for t, value in enumerate(curve):
        h = value / vmax * (height - 2 * pad)
        x = pad + t * bar_w
        y = height - pad - h
        body.append(f'<rect id="gate-delta-{t}" x="{x:.3f}" y="{y:.3f}" '
                    f'width="{bar_w * 0.8:.3f}" height="{h:.3f}" fill="#4daf4a"/>')
    body.append('<text x="4" y="14" font-size="12" font-family="monospace">'
                'gate-weight change per timestep</text>')
    return _svg_document(width, height, body)


def write_gates_svg(path, trace: list[GateWeights]) -> None:
    Path(path).write_text(render_gates_svg(trace))
