"""Per-window timeline figures as standalone SVG.

Layout: one horizontal band with the ground-truth phases over the full
[-t_past, +t_future] axis, then up to three sampled future trajectories below
it (drawn only right of the now marker), a vertical marker at t = 0, and
second ticks on the axis. Pure string assembly — the files are small and the
tests parse them back as XML.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["emit_timeline", "PALETTE"]

PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d4a6c8",
    "#499894", "#fabfd2", "#79706e", "#d37295",
)

_PX = 12          # pixels per second
_BAND_H = 22      # bar height
_GAP = 8          # vertical gap between bars
_LEFT = 86        # left margin for row labels
_TOP = 26


def _runs(labels):
    """Contiguous (start, length, label) runs of a label sequence."""
    labels = np.asarray(labels)
    out = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append((start, i - start, int(labels[start])))
            start = i
    return out


def _color(phase: int) -> str:
    return PALETTE[phase % len(PALETTE)]


def emit_timeline(window, samples, path, phase_names=None, max_samples: int = 3,
                  seed: int = 0) -> None:
    """Write one window's figure to ``path``.

    ``samples`` is a [n_samples, t_future] label array; at most
    ``max_samples`` of its rows are drawn, chosen uniformly at random
    (seeded). The ground-truth band spans past and future; sample bars span
    exactly the future.
    """
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError(f"samples must be [n_samples, t_future], got {samples.shape}")
    t_past, t_future = window.t_past, window.t_future
    if samples.shape[1] != t_future:
        raise ValueError(
            f"samples cover {samples.shape[1]} seconds, window future is {t_future}")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    k = min(max_samples, samples.shape[0])
    chosen = np.sort(rng.choice(samples.shape[0], size=k, replace=False))

    def x(t: float) -> float:
        return _LEFT + (t + t_past) * _PX

    def name(p: int) -> str:
        if phase_names is not None and 0 <= p < len(phase_names):
            return escape(str(phase_names[p]))
        return f"phase {p}"

    rows = 1 + k
    width = x(t_future) + 16
    height = _TOP + rows * (_BAND_H + _GAP) + 34
    gt = np.concatenate([np.asarray(window.past_labels),
                         np.asarray(window.future_labels)])

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<title>window {escape(str(window.video_id))} @ t0={window.t0}</title>',
        '<style>text { font: 11px sans-serif; fill: #333; }</style>',
    ]

    def bar(row, t_start, n_seconds, phase, css):
        y = _TOP + row * (_BAND_H + _GAP)
        parts.append(
            f'<rect class="{css}" x="{x(t_start):.1f}" y="{y}" '
            f'width="{n_seconds * _PX:.1f}" height="{_BAND_H}" '
            f'fill="{_color(phase)}"><title>{name(phase)}</title></rect>')

    def row_label(row, text):
        y = _TOP + row * (_BAND_H + _GAP) + _BAND_H - 7
        parts.append(f'<text x="6" y="{y}">{escape(text)}</text>')

    row_label(0, "ground truth")
    for start, length, phase in _runs(gt):
        bar(0, start - t_past, length, phase, "gt-band-segment")
    for row, idx in enumerate(chosen, start=1):
        row_label(row, f"sample {int(idx)}")
        for start, length, phase in _runs(samples[idx]):
            bar(row, start, length, phase, "sample-segment")

    marker_bottom = _TOP + rows * (_BAND_H + _GAP) - _GAP + 6
    parts.append(
        f'<line class="now-marker" x1="{x(0):.1f}" y1="{_TOP - 8}" '
        f'x2="{x(0):.1f}" y2="{marker_bottom}" stroke="#00bcd4" stroke-width="2.5"/>')

    axis_y = marker_bottom + 14
    for t in (-t_past, 0, t_future):
        label = f"{t:+d}s" if t else "now"
        parts.append(f'<text class="axis-tick" x="{x(t) - 10:.1f}" y="{axis_y}">'
                     f'{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
