"""CSV and SVG writers for harness results.

CSV files are UTF-8 with a header row, ``.`` decimal separator and floats
printed with 17 significant digits.  Lines starting with ``#`` carry run
metadata.
"""

import csv
import math

import numpy as np

__all__ = [
    "fmt",
    "write_convergence_csv",
    "write_exp_moment_csv",
    "write_baseline_csv",
    "write_path_csv",
    "convergence_svg",
]

CONVERGENCE_COLUMNS = ["scheme", "model", "level", "h", "m_paths", "err_sup_l2", "err_T_l2"]


def fmt(value):
    """Float with 17 significant digits; integers and strings unchanged."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def _write_metadata(fh, metadata):
    for key, value in (metadata or {}).items():
        fh.write(f"# {key}={value}\n")


def write_convergence_csv(report, fh, metadata=None):
    """One row per level, then a footer row whose ``level`` column reads
    ``slope`` and whose error columns hold the fitted slopes."""
    _write_metadata(fh, metadata)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CONVERGENCE_COLUMNS)
    for level, h, e_sup, e_t in zip(report.levels, report.step_sizes,
                                    report.errors_sup, report.errors_terminal):
        writer.writerow([report.scheme, report.model, level, fmt(h), report.paths,
                         fmt(e_sup), fmt(e_t)])
    writer.writerow([report.scheme, report.model, "slope", "", report.paths,
                     fmt(report.fitted_slope_sup), fmt(report.fitted_slope_terminal)])


def write_exp_moment_csv(report, fh, t_final=1.0, metadata=None):
    _write_metadata(fh, metadata)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["level", "h", "m_paths", "estimate", "max_exponent", "clipped_paths"])
    for level, est, top, clipped in zip(report.levels, report.estimates,
                                        report.max_exponent, report.clipped):
        writer.writerow([level, fmt(t_final / 2**level), report.paths, fmt(est), fmt(top),
                         int(clipped)])


def write_baseline_csv(table, fh, t_final=1.0, metadata=None):
    _write_metadata(fh, metadata)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["level", "h", "m_paths", "em_second_moment", "em_overflows",
                     "tamed_second_moment", "tamed_overflows"])
    for i, level in enumerate(table.levels):
        writer.writerow([level, fmt(t_final / 2**level), table.paths,
                         fmt(table.em_second_moment[i]), int(table.em_overflows[i]),
                         fmt(table.tamed_second_moment[i]), int(table.tamed_overflows[i])])


def write_path_csv(result, fh, h, metadata=None):
    metadata = dict(metadata or {})
    metadata["tau_index"] = "none" if result.tau_index is None else result.tau_index
    _write_metadata(fh, metadata)
    writer = csv.writer(fh, lineterminator="\n")
    d = result.states.shape[-1]
    writer.writerow(["step", "t"] + [f"x{i + 1}" for i in range(d)])
    for k, state in enumerate(result.states):
        writer.writerow([k, fmt(k * h)] + [fmt(v) for v in state])


def convergence_svg(report, width=560, height=420):
    """Standalone log-log plot of error against step size, with guide lines
    of slope 0.5, 1 and 1.5 anchored at the coarsest sup error."""
    h = np.asarray(report.step_sizes, dtype=float)
    series = [("sup", np.asarray(report.errors_sup), "#1f77b4"),
              ("terminal", np.asarray(report.errors_terminal), "#d62728")]
    positive = np.concatenate([s[1][s[1] > 0] for s in series])
    margin = dict(left=70, right=20, top=30, bottom=50)
    pw = width - margin["left"] - margin["right"]
    ph = height - margin["top"] - margin["bottom"]

    lx = np.log10(h)
    x_lo, x_hi = lx.min() - 0.1, lx.max() + 0.1
    if positive.size:
        y_lo, y_hi = np.log10(positive.min()) - 0.3, np.log10(positive.max()) + 0.3
    else:
        y_lo, y_hi = -1.0, 0.0
    if x_hi - x_lo < 1e-9:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    def px(v):
        return margin["left"] + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return margin["top"] + (y_hi - v) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin["left"]}" y="{margin["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle">{report.scheme} on {report.model} '
        f'(M={report.paths}, ref level {report.ref_level})</text>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">step size h (log10)</text>',
        f'<text x="16" y="{height / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {height / 2})">RMS error (log10)</text>',
    ]
    for tick in range(math.ceil(y_lo), math.floor(y_hi) + 1):
        parts.append(f'<text x="{margin["left"] - 6}" y="{py(tick) + 4:.1f}" '
                     f'text-anchor="end">1e{tick}</text>')
    for level, v in zip(report.levels, lx):
        parts.append(f'<text x="{px(v):.1f}" y="{margin["top"] + ph + 16}" '
                     f'text-anchor="middle">2^-{level}</text>')

    if positive.size and report.errors_sup[0] > 0:
        anchor = np.log10(report.errors_sup[0])
        for slope, dash in ((0.5, "2,4"), (1.0, "6,4"), (1.5, "10,4")):
            y0 = anchor
            y1 = anchor + slope * (lx[-1] - lx[0])
            parts.append(f'<line x1="{px(lx[0]):.1f}" y1="{py(y0):.1f}" x2="{px(lx[-1]):.1f}" '
                         f'y2="{py(y1):.1f}" stroke="gray" stroke-dasharray="{dash}"/>')
            parts.append(f'<text x="{px(lx[-1]) + 2:.1f}" y="{py(y1):.1f}" fill="gray">'
                         f'{slope:g}</text>')

    for i, (label, errs, color) in enumerate(series):
        ok = errs > 0
        if not ok.any():
            continue
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(lx[ok], np.log10(errs[ok])))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in zip(lx[ok], np.log10(errs[ok])):
            parts.append(f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="3" fill="{color}"/>')
        slope = report.fitted_slope_sup if label == "sup" else report.fitted_slope_terminal
        parts.append(f'<text x="{margin["left"] + 10}" y="{margin["top"] + 18 + 16 * i}" '
                     f'fill="{color}">{label}: slope {slope:.3f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
