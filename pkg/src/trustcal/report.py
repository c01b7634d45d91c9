"""Render replay summaries as an aligned table, CSV, or JSON lines.

Every row carries the values as printed, and the T column is recomputed from
the printed G and g (two decimals), so ``T == |G - g|`` holds on the page.

CSV / JSON-lines columns:

    section   "baseline" or "indicator"
    label     opinion stream (o_1..o_m, o) or algorithm label
    n         number of trials
    G         maximum achievable total
    g         total reward (indicator: mean over runs)
    se        standard error over runs (indicator rows only)
    T         trust calibration distance |G - g|
    t, p      one-sample t-test of run totals against the team baseline
    runs      number of replay runs (indicator rows only)
"""

from __future__ import annotations

import csv
import io
import json
import math
from decimal import Decimal
from typing import Sequence

from trustcal.replay import ReplaySummary

COLUMNS = ("section", "label", "n", "G", "g", "se", "T", "t", "p", "runs")
FORMATS = ("table", "csv", "json-lines")


def _dec(value: float) -> Decimal:
    return Decimal(f"{value:.2f}")


def _num(value: float | None) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.6g}"


def header_fields(summary: ReplaySummary, algorithms: Sequence[ReplaySummary] = ()) -> dict:
    cfg = summary.config
    fields = {
        "dataset": summary.dataset,
        "runs": cfg.runs,
        "seed": cfg.base_seed,
        "reward": summary.info.reward.kind.value,
        "encoding": summary.info.encoding.value,
        "prng": "splitmix64-v1",
    }
    for s in algorithms or (summary,):
        for key, value in s.config.hyper.for_algorithm(s.algorithm).items():
            fields[key] = value
    return fields


def build_rows(summaries: Sequence[ReplaySummary]) -> list[dict]:
    """Baseline rows (taken from the first summary) then one row per algorithm."""
    first = summaries[0]
    G = _dec(first.G)
    rows = []
    for label, g, _ in first.baseline_rows():
        gd = _dec(g)
        rows.append({"section": "baseline", "label": label, "n": first.n, "G": G, "g": gd,
                     "se": None, "T": abs(G - gd), "t": None, "p": None, "runs": None})
    for s in summaries:
        if s.baselines != first.baselines:
            raise ValueError("summaries in one report must share the same dataset baselines")
        gd = _dec(s.mean)
        rows.append({"section": "indicator", "label": s.algorithm.label, "n": s.n, "G": G,
                     "g": gd, "se": None if math.isnan(s.se) else _dec(s.se),
                     "T": abs(G - gd), "t": s.t, "p": s.p, "runs": len(s.run_totals)})
    return rows


def _plain(row: dict) -> dict:
    out = {}
    for key in COLUMNS:
        v = row[key]
        if isinstance(v, Decimal):
            out[key] = f"{v:.2f}"
        elif isinstance(v, float):
            out[key] = _num(v)
        else:
            out[key] = "" if v is None else v
    return out


def render_table(summaries: Sequence[ReplaySummary]) -> str:
    first = summaries[0]
    rows = build_rows(summaries)
    head = " ".join(f"{k}={v}" for k, v in header_fields(first, summaries).items())
    lines = [f"# trustcal {head}"]

    def fmt(v):
        return "" if v is None else f"{v:,.2f}"

    width = max(28, *(len(r["label"]) + 10 for r in rows))
    lines.append(f"{'Trials [n]':<{width}}{first.n:>16,}")
    lines.append(f"{'Maximum [G]':<{width}}{fmt(_dec(first.G)):>16}")
    lines.append(f"{'':<{width}}{'g':>16}{'SE':>12}{'T':>16}{'t':>12}{'p':>12}")
    for r in rows:
        if r["section"] == "indicator" and r is rows[len(first.baseline_rows())]:
            lines.append("Indicator results (estimated o*, mean/SE over runs)")
        label = r["label"] + (" [g]" if r["section"] == "baseline" else "")
        t = "" if r["t"] is None else _num(r["t"])
        p = "" if r["p"] is None else _num(r["p"])
        lines.append(f"{label:<{width}}{fmt(r['g']):>16}{fmt(r['se']):>12}{fmt(r['T']):>16}{t:>12}{p:>12}")
    return "\n".join(lines) + "\n"


def render_csv(summaries: Sequence[ReplaySummary]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in build_rows(summaries):
        writer.writerow(_plain(row))
    return buf.getvalue()


def render_json_lines(summaries: Sequence[ReplaySummary]) -> str:
    lines = [json.dumps({"header": header_fields(summaries[0], summaries)})]
    for row in build_rows(summaries):
        lines.append(json.dumps(_plain(row)))
    return "\n".join(lines) + "\n"


def render(summaries: Sequence[ReplaySummary], fmt: str = "table") -> str:
    if fmt == "table":
        return render_table(summaries)
    if fmt == "csv":
        return render_csv(summaries)
    if fmt == "json-lines":
        return render_json_lines(summaries)
    raise ValueError(f"unknown output format {fmt!r} (expected one of {FORMATS})")


def render_baselines(baselines, info, fmt: str = "table") -> str:
    """Report of the logged opinion streams alone (no bandit runs)."""
    G = _dec(baselines.G)
    labels = [*info.opinion_labels(), "o"]
    rows = []
    for label, g in zip(labels, [*baselines.agents, baselines.team]):
        gd = _dec(g)
        rows.append({"section": "baseline", "label": label, "n": baselines.n, "G": G, "g": gd,
                     "se": None, "T": abs(G - gd), "t": None, "p": None, "runs": None})
    if fmt == "table":
        lines = [f"# trustcal baselines dataset={info.name} reward={info.reward.kind.value}",
                 f"{'Trials [n]':<28}{baselines.n:>16,}",
                 f"{'Maximum [G]':<28}{G:>16,.2f}",
                 f"{'':<28}{'g':>16}{'T':>16}"]
        lines += [f"{r['label'] + ' [g]':<28}{r['g']:>16,.2f}{r['T']:>16,.2f}" for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(_plain(row))
        return buf.getvalue()
    if fmt == "json-lines":
        head = {"header": {"dataset": info.name, "reward": info.reward.kind.value}}
        return "\n".join([json.dumps(head), *(json.dumps(_plain(r)) for r in rows)]) + "\n"
    raise ValueError(f"unknown output format {fmt!r} (expected one of {FORMATS})")

