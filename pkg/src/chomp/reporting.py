"""Plain-text rendering of evaluation and simulation reports."""
from __future__ import annotations

from .io import CLASS_NAMES


def _pct(x) -> str:
    return f"{100 * x:5.1f}"


def _confusion_lines(cm) -> list[str]:
    width = max(len(c) for c in CLASS_NAMES)
    lines = [" " * (width + 2) + " ".join(f"{c:>{width}}" for c in CLASS_NAMES)]
    for name, row in zip(CLASS_NAMES, cm):
        lines.append(f"{name:>{width}}  " + " ".join(f"{int(v):>{width}}" for v in row))
    return lines


def render_protocol(name: str, rep: dict) -> list[str]:
    lines = [
        f"[{name}]",
        f"median F1 {_pct(rep['median_f1'])}  (Q1-Q3 {_pct(rep['q1']).strip()}-{_pct(rep['q3']).strip()})"
        f"  precision {_pct(rep['precision'])}  recall {_pct(rep['recall'])}",
        "folds:",
    ]
    for f in rep["folds"]:
        lines.append(f"  {f['fold']:<16} F1 {_pct(f['macro_f1'])}  n={f['n_test']}")
    lines.append("pooled confusion (rows true, cols predicted):")
    lines.extend("  " + ln for ln in _confusion_lines(rep["confusion"]))
    lines.extend(f"note: {n}" for n in rep.get("notes", []))
    return lines


def render_simulation(rep: dict) -> list[str]:
    cfg = rep["config"]
    lines = [
        f"[simulation] e={cfg['error_rate']} sigma={cfg['sigma']} N={cfg['n_draws']} "
        f"windows/min={cfg['windows_per_minute']} seed={cfg['seed']}",
        "   mu  minutes   mean   ci90_low  ci90_high  excludes_50",
    ]
    for c in rep["cells"]:
        lo, hi = c["ci90"]
        lines.append(f" {c['mu']:.2f}  {c['duration_min']:7g}  {c['mean']:.4f}  {lo:.4f}    {hi:.4f}     {c['excludes_50']}")
    diag = rep.get("diagnosis")
    if diag:
        for mu, d in diag["minimal_duration"].items():
            lines.append(f"mu={mu}: minimal detection duration {d if d is not None else 'none'} min")
        lines.extend(f"note: {n}" for n in diag["notes"])
    return lines


def render(report: dict) -> str:
    """Text form of a JSON report produced by the CLI (evaluation or simulation)."""
    if "cells" in report:
        lines = render_simulation(report)
    else:
        lines = [f"protocol: {report.get('protocol', '?')}"]
        for name, rep in report.get("results", {}).items():
            lines.extend(render_protocol(name, rep))
    return "\n".join(lines) + "\n"
