"""Batch experiment harness: repeated randomized runs, aggregate statistics,
CSV/text reports, and SVG scene snapshots."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .bridge import Strategy, interleaved_plan
from .gtp import GtpStats
from .librarian import (
    BenchError,
    LibraryConfig,
    build_library,
    build_problem,
    build_scene,
    experiment_domain,
)
from .world import Scene

CSV_HEADER = ("task", "time", "succ_pct", "pts", "grasps", "orts", "calls")

#: a run counts as backtracking-heavy above this many combined backtracks
HEAVY_BACKTRACKS = 3


@dataclass
class TrialRecord:
    seed: int
    ok: bool
    plan_len: int
    htn_backtracks: int
    geo_alternatives: int
    wall_time: float
    gtp_rows: list[dict]


@dataclass
class BenchSummary:
    trials: list[TrialRecord]
    kind_rows: list[dict]

    @property
    def runs(self) -> int:
        return len(self.trials)

    @property
    def success_rate(self) -> float:
        if not self.trials:
            return 0.0
        return sum(t.ok for t in self.trials) / len(self.trials)

    @property
    def mean_backtracks(self) -> float:
        if not self.trials:
            return 0.0
        return sum(t.htn_backtracks + t.geo_alternatives for t in self.trials) / len(self.trials)

    @property
    def heavy_fraction(self) -> float:
        """Fraction of runs needing more than HEAVY_BACKTRACKS backtracks."""
        if not self.trials:
            return 0.0
        heavy = sum(
            1 for t in self.trials if t.htn_backtracks + t.geo_alternatives > HEAVY_BACKTRACKS
        )
        return heavy / len(self.trials)

    @property
    def mean_time(self) -> float:
        if not self.trials:
            return 0.0
        return sum(t.wall_time for t in self.trials) / len(self.trials)


def run_trial(seed: int, strategy: Strategy = Strategy(), credit: int = 3) -> TrialRecord:
    """One randomized reception run with the batch-experiment task set."""
    domain = experiment_domain()
    scene = build_scene("experiment-v", seed=seed)
    problem = build_problem(credit=credit)
    library = build_library(LibraryConfig(experiment=True))
    result = interleaved_plan(domain, problem, scene, library, strategy)
    return TrialRecord(
        seed=seed,
        ok=result.ok,
        plan_len=len(result.plan) if result.plan is not None else 0,
        htn_backtracks=result.stats.htn.backtracks,
        geo_alternatives=result.stats.geo_alternatives,
        wall_time=result.stats.wall_time,
        gtp_rows=result.stats.gtp.rows(),
    )


def run_trials(
    n: int, strategy: Strategy = Strategy(), seed0: int = 0, credit: int = 3
) -> BenchSummary:
    """``n`` deterministic trials over distinct seeds, merged per task kind."""
    if n < 1:
        raise BenchError("need at least one trial")
    trials = [run_trial(seed0 + i, strategy, credit) for i in range(n)]
    return BenchSummary(trials, _merge_rows(trials))


def _merge_rows(trials: list[TrialRecord]) -> list[dict]:
    """Attempt-weighted merge of the per-run geometric search statistics."""
    merged: dict[str, dict] = {}
    weights: dict[str, int] = {}
    for t in trials:
        for row in t.gtp_rows:
            k = row["task"]
            w = row.get("attempts", 1)
            agg = merged.setdefault(
                k, {"task": k, "time": 0.0, "succ_pct": 0.0, "pts": 0.0,
                    "grasps": 0.0, "orts": 0.0, "calls": 0.0},
            )
            for col in ("time", "succ_pct", "pts", "grasps", "orts", "calls"):
                agg[col] += row[col] * w
            weights[k] = weights.get(k, 0) + w
    for k, agg in merged.items():
        for col in ("time", "succ_pct", "pts", "grasps", "orts", "calls"):
            agg[col] /= max(weights[k], 1)
    return sorted(merged.values(), key=lambda r: r["task"])


def to_csv(summary: BenchSummary) -> str:
    """Per-kind rows under the fixed header, then backtracking pseudo-rows
    (same column count; only the first two cells carry data)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_HEADER)
    for row in summary.kind_rows:
        writer.writerow(
            [row["task"]] + [f"{row[c]:.4f}" for c in CSV_HEADER[1:]]
        )
    extras = (
        ("#runs", summary.runs),
        ("#success_rate", f"{summary.success_rate:.4f}"),
        ("#mean_backtracks", f"{summary.mean_backtracks:.4f}"),
        ("#heavy_backtrack_fraction", f"{summary.heavy_fraction:.4f}"),
        ("#mean_wall_time", f"{summary.mean_time:.4f}"),
    )
    for name, value in extras:
        writer.writerow([name, value] + [""] * (len(CSV_HEADER) - 2))
    return buf.getvalue()


def to_text(summary: BenchSummary) -> str:
    lines = [
        f"runs: {summary.runs}",
        f"success rate: {summary.success_rate:.2%}",
        f"mean backtracks per run: {summary.mean_backtracks:.2f}",
        f"runs with >{HEAVY_BACKTRACKS} backtracks: {summary.heavy_fraction:.2%}",
        f"mean wall time: {summary.mean_time:.3f}s",
        "",
        f"{'task':10s} {'time':>8s} {'succ%':>7s} {'pts':>6s} {'grasps':>7s} {'orts':>6s} {'calls':>6s}",
    ]
    for row in summary.kind_rows:
        lines.append(
            f"{row['task']:10s} {row['time']:8.4f} {row['succ_pct']:7.1f} "
            f"{row['pts']:6.1f} {row['grasps']:7.1f} {row['orts']:6.1f} {row['calls']:6.1f}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG snapshots (top-down)


_PALETTE = {
    "surface": "#d9c8a9",
    "object": "#6f9fd8",
    "agent": "#c0504d",
    "zone": "#9bbb59",
}


def scene_svg(scene: Scene, size: int = 640) -> str:
    """Top-down orthographic snapshot; darker fill means taller."""
    pts = [p for s in scene.surfaces for p in s.polygon]
    pts += [p for o in scene.objects for p in o.world_footprint()]
    pts += [a.base for a in scene.agents]
    pts += [p for z in scene.zones for p in z.polygon]
    minx = min(p[0] for p in pts) - 0.2
    maxx = max(p[0] for p in pts) + 0.2
    miny = min(p[1] for p in pts) - 0.2
    maxy = max(p[1] for p in pts) + 0.2
    span = max(maxx - minx, maxy - miny)
    scale = size / span

    def sx(x: float) -> float:
        return (x - minx) * scale

    def sy(y: float) -> float:
        return size - (y - miny) * scale

    def poly(polygon, fill, opacity=1.0, dash=False) -> str:
        path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in polygon)
        stroke = ' stroke="#333" stroke-width="1"'
        if dash:
            stroke += ' stroke-dasharray="4 3"'
        return f'<polygon points="{path}" fill="{fill}" fill-opacity="{opacity:.2f}"{stroke}/>'

    def label(x: float, y: float, text: str) -> str:
        return (
            f'<text x="{sx(x):.1f}" y="{sy(y):.1f}" font-size="11" '
            f'font-family="sans-serif" text-anchor="middle">{text}</text>'
        )

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="#fafafa"/>',
    ]
    for s in scene.surfaces:
        parts.append(poly(s.polygon, _PALETTE["surface"], 0.8))
        cx = sum(p[0] for p in s.polygon) / len(s.polygon)
        cy = sum(p[1] for p in s.polygon) / len(s.polygon)
        parts.append(label(cx, cy, s.name))
    for z in scene.zones:
        parts.append(poly(z.polygon, _PALETTE["zone"], 0.35, dash=True))
        cx = sum(p[0] for p in z.polygon) / len(z.polygon)
        cy = sum(p[1] for p in z.polygon) / len(z.polygon)
        parts.append(label(cx, cy, z.name))
    tallest = max((o.pose.z + o.height for o in scene.objects), default=1.0)
    for o in sorted(scene.objects, key=lambda o: o.pose.z):
        shade = 0.35 + 0.6 * (o.pose.z + o.height) / max(tallest, 1e-9)
        parts.append(poly(o.world_footprint(), _PALETTE["object"], min(shade, 1.0)))
        cx, cy, _ = o.center()
        parts.append(label(cx, cy, o.name))
    for a in scene.agents:
        r = 0.12 * scale
        parts.append(
            f'<circle cx="{sx(a.base[0]):.1f}" cy="{sy(a.base[1]):.1f}" r="{r:.1f}" '
            f'fill="{_PALETTE["agent"]}" fill-opacity="0.8" stroke="#333"/>'
        )
        parts.append(label(a.base[0], a.base[1] - 0.18, a.name))
    parts.append("</svg>")
    return "\n".join(parts)
