"""Report tables, plot-data series and rendered figures."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .analysis import AGGREGATES, PathAnalysis
from .config import ExperimentConfig
from .errors import CoverageError

NEGATIVITY_COLUMNS = [
    "pair",
    "zero_state", "zero_CI_low", "zero_CI_high",
    "largest", "largest_CI_low", "largest_CI_high",
    "mean", "mean_CI_low", "mean_CI_high",
]
WITNESS_COLUMNS = ["chain", "length", "value", "CI_low", "CI_high", "significant", "redundant"]
_CI_PREFIX = {"zero_state": "zero", "largest": "largest", "mean": "mean"}


def _f(v: float) -> str:
    return f"{v:.6f}"


def _csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def negativity_csv(result: PathAnalysis) -> str:
    rows = []
    for n in result.negativities:
        row = [n.pair]
        for a in AGGREGATES:
            lo, hi = n.ci[a]
            row += [_f(n.values[a]), _f(lo), _f(hi)]
        rows.append(row)
    return _csv(NEGATIVITY_COLUMNS, rows)


def witness_csv(result: PathAnalysis) -> str:
    rows = [
        [w.label, w.length, _f(w.value), _f(w.ci[0]), _f(w.ci[1]), str(w.significant).lower(), str(w.redundant).lower()]
        for w in result.witnesses
    ]
    return _csv(WITNESS_COLUMNS, rows)


def summary_dict(result: PathAnalysis, cfg: ExperimentConfig, datasets: list) -> dict:
    snap = cfg.snapshot()
    snap.pop("output_dir", None)
    sig = [w for w in result.witnesses if w.significant]
    return {
        "path": list(result.path),
        "fully_entangled": result.fully_entangled,
        "verdict_aggregate": result.verdict_aggregate,
        "bootstrap": {"resamples": result.bootstrap.resamples, "confidence": result.bootstrap.confidence,
                      "seed": result.bootstrap.seed},
        "pairs": [
            {
                "pair": n.pair,
                "aggregates": {a: {"value": n.values[a], "ci_low": n.ci[a][0], "ci_high": n.ci[a][1]} for a in AGGREGATES},
                "outcomes": [
                    {"neighbors": bits, "negativity": v, "probability": p, "ci_low": lo, "ci_high": hi}
                    for bits, v, p, lo, hi in n.outcomes
                ],
            }
            for n in result.negativities
        ],
        "stabilizers": [
            {"vertex": v, "value": s[0], "ci_low": s[1], "ci_high": s[2]} for v, s in result.stabilizers.items()
        ],
        "witness": {
            "chains": len(result.witnesses),
            "significant": [w.label for w in sig],
            "reduced": [w.label for w in sig if not w.redundant],
            "longest_significant": max((w.length for w in sig), default=0),
        },
        "datasets": datasets,
        "config": snap,
    }


def plot_series(result: PathAnalysis) -> dict[str, str]:
    """x/y/error tables, one file per figure panel."""
    out = {}
    for a in AGGREGATES:
        rows = []
        for x, n in enumerate(result.negativities):
            lo, hi = n.ci[a]
            v = n.values[a]
            rows.append([x, n.pair, _f(v), _f(v - lo), _f(hi - v)])
        out[f"negativity_{a}.csv"] = _csv(["x", "pair", "y", "err_low", "err_high"], rows)
    rows = [
        [n.pair, bits, _f(v), _f(p), _f(lo), _f(hi)]
        for n in result.negativities
        for bits, v, p, lo, hi in n.outcomes
    ]
    out["negativity_outcomes.csv"] = _csv(["pair", "neighbors", "negativity", "probability", "ci_low", "ci_high"], rows)
    header = ["x", "chain", "length", "y", "err_low", "err_high", "significant"]
    negative = [w for w in result.witnesses if w.value < 0.0]
    reduced = [w for w in result.witnesses if w.significant and not w.redundant]
    for name, ws in (("witness_all.csv", negative), ("witness_reduced.csv", reduced)):
        rows = [
            [x, w.label, w.length, _f(w.value), _f(w.value - w.ci[0]), _f(w.ci[1] - w.value), str(w.significant).lower()]
            for x, w in enumerate(ws)
        ]
        out[name] = _csv(header, rows)
    return out


def write_reports(result: PathAnalysis, cfg: ExperimentConfig, datasets: list, reports_dir: Path) -> dict:
    """Write every report file; returns ``{relative name: sha256}``."""
    from .pipeline import write_atomic

    reports_dir = Path(reports_dir)
    files = {
        "negativity.csv": negativity_csv(result),
        "witness.csv": witness_csv(result),
        "summary.json": json.dumps(summary_dict(result, cfg, datasets), indent=2) + "\n",
    }
    files.update({f"plotdata/{k}": v for k, v in plot_series(result).items()})
    return {name: write_atomic(reports_dir / name, text) for name, text in files.items()}


# -- rendering -----------------------------------------------------------------


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _nonneg(text: str) -> float:
    # a percentile interval need not contain the point estimate
    return max(0.0, float(text))


def render_figures(reports_dir: Path, figures_dir: Path) -> dict:
    """Render the negativity and witness figures from stored plot data."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.ticker import MaxNLocator

    from .pipeline import write_atomic

    reports_dir, figures_dir = Path(reports_dir), Path(figures_dir)
    plot_dir = reports_dir / "plotdata"
    if not plot_dir.is_dir():
        raise CoverageError(f"no plot data under {plot_dir}; run analyze first")
    done = {}

    def save(fig, name):
        buf = io.BytesIO()
        fig.savefig(buf, format="png", dpi=120, metadata={"Software": None})
        plt.close(fig)
        done[name] = write_atomic(figures_dir / name, buf.getvalue())

    titles = {"zero_state": "neighbours projected to |0...0>", "largest": "largest over outcomes",
              "mean": "mean over outcomes"}
    fig, axes = plt.subplots(3, 1, figsize=(9, 8), sharex=True)
    for ax, a in zip(axes, AGGREGATES):
        rows = _read_csv(plot_dir / f"negativity_{a}.csv")
        x = [int(r["x"]) for r in rows]
        y = [float(r["y"]) for r in rows]
        err = [[_nonneg(r["err_low"]) for r in rows], [_nonneg(r["err_high"]) for r in rows]]
        ax.bar(x, y, yerr=err, color="tab:blue", capsize=2)
        ax.set_ylim(0, 0.55)
        ax.set_ylabel("negativity")
        ax.set_title(titles[a], fontsize=9)
        ax.set_xticks(x, [r["pair"] for r in rows], rotation=60, fontsize=7)
    fig.tight_layout()
    save(fig, "negativity.png")

    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for ax, name, title in ((axes[0], "witness_all.csv", "negative witness values"),
                            (axes[1], "witness_reduced.csv", "significant, non-redundant")):
        rows = _read_csv(plot_dir / name)
        for r in rows:
            sig = r["significant"] == "true"
            ax.errorbar(int(r["length"]), float(r["y"]), yerr=[[_nonneg(r["err_low"])], [_nonneg(r["err_high"])]],
                        fmt="o" if sig else "x", color="tab:red" if sig else "tab:gray", ms=4, capsize=2)
        ax.axhline(0.0, color="black", lw=0.8)
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        ax.set_xlabel("chain length")
        ax.set_ylabel("witness value")
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    save(fig, "witness.png")
    return done


def format_table(reports_dir: Path) -> str:
    """Console rendering of the negativity table and verdict."""
    reports_dir = Path(reports_dir)
    rows = _read_csv(reports_dir / "negativity.csv")
    summary = json.loads((reports_dir / "summary.json").read_text())
    lines = [f"{'pair':>7}  {'zero state':>21}  {'largest':>21}  {'mean':>21}"]
    for r in rows:
        cells = [f"{float(r[a]):.3f} [{float(r[p + '_CI_low']):.3f}, {float(r[p + '_CI_high']):.3f}]".rjust(21)
                 for a, p in _CI_PREFIX.items()]
        lines.append(f"{r['pair']:>7}  " + "  ".join(cells))
    w = summary["witness"]
    lines.append("")
    lines.append(f"fully entangled ({summary['verdict_aggregate']} CI > 0): {summary['fully_entangled']}")
    lines.append(f"significant chains: {len(w['significant'])} of {w['chains']}; "
                 f"longest significant length: {w['longest_significant']}")
    lines.append("reduced set: " + (", ".join(w["reduced"]) or "none"))
    return "\n".join(lines)


def run_report(cfg: ExperimentConfig, out: Path) -> dict:
    import time

    from .pipeline import write_manifest

    t0 = time.perf_counter()
    out = Path(out)
    if not (out / "reports" / "summary.json").exists():
        raise CoverageError(f"no reports under {out / 'reports'}; run analyze first")
    figs = render_figures(out / "reports", out / "figures")
    write_manifest(out, cfg, "report", {f"figures/{k}": v for k, v in figs.items()}, time.perf_counter() - t0)
    return figs
