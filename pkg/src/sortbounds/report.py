"""Per-level statistics: CSV in the appendix-table shape plus a figure.

One row per comparison count 0..C with the backward table size and the
forward exploration tallies.  The figure is rendered beside the CSV so a
run leaves both the numbers and their picture in one place.
"""

from __future__ import annotations

from pathlib import Path

from .backward import BackwardAdvice
from .forward import SortabilityVerdict

CSV_HEADER = "level,backward,forward_total,forward_sortable"


def stats_rows(budget: int,
               advice: BackwardAdvice | None,
               verdict: SortabilityVerdict | None) -> list[tuple[int, int, int, int]]:
    rows = []
    for c in range(budget + 1):
        bk = advice.counts[c] if advice is not None else 0
        if verdict is not None:
            ft, fs = verdict.levels_explored[c]
        else:
            ft = fs = 0
        rows.append((c, bk, ft, fs))
    return rows


def write_stats_csv(path: str | Path, budget: int,
                    advice: BackwardAdvice | None,
                    verdict: SortabilityVerdict | None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for row in stats_rows(budget, advice, verdict):
        lines.append(",".join(str(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def render_figure(csv_path: str | Path) -> Path:
    """Draw the per-level counts next to the CSV they came from."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    csv_path = Path(csv_path)
    levels, backward, ftotal, fsort = [], [], [], []
    with open(csv_path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{csv_path}: unexpected header {header!r}")
        for line in fh:
            c, bk, ft, fs = (int(x) for x in line.split(","))
            levels.append(c)
            backward.append(bk)
            ftotal.append(ft)
            fsort.append(fs)

    fig, ax = plt.subplots(figsize=(7, 4.2))
    if any(backward):
        ax.plot(levels, backward, marker="s", ms=3, lw=1.2,
                label="backward stored", color="tab:red")
    if any(ftotal):
        ax.plot(levels, ftotal, marker="o", ms=3, lw=1.2,
                label="forward explored", color="tab:blue")
    if any(fsort) and fsort != ftotal:
        ax.plot(levels, fsort, marker=".", ms=3, lw=0.9, ls="--",
                label="forward sortable", color="tab:cyan")
    ax.set_xlabel("comparisons made")
    ax.set_ylabel("posets")
    if any(backward) or any(ftotal):
        ax.set_yscale("symlog")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.25, lw=0.5)
    fig.tight_layout()
    out = csv_path.with_suffix(".png")
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out
