"""CSV, PGM, and text-report emission.

Floats are written in their shortest round-tripping form, so parsing a
file and re-emitting it reproduces the bytes exactly, independent of
locale. PGM heatmaps are plain (P2) grayscale with the grid's U axis
running down the rows.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .discover import UNASSIGNED, DiscoveryResult, LossMap, ProbeRow
from .records import GroundStateRecord
from .sweep import SweepGrid


def format_float(x: float) -> str:
    return repr(float(x))


def _write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text)


def write_loss_map_csv(
    path: str | Path,
    grid: SweepGrid,
    loss_map: LossMap,
    labels: np.ndarray,
    iteration_of: np.ndarray,
) -> None:
    lines = ["U,V,loss,assigned_label,iteration"]
    for iu in range(grid.nu):
        for iv in range(grid.nv):
            p = grid.params_at(iu, iv)
            lines.append(
                f"{format_float(p.U)},{format_float(p.V)},"
                f"{format_float(loss_map.losses[iu, iv])},"
                f"{int(labels[iu, iv])},{int(iteration_of[iu, iv])}"
            )
    _write_text(path, "\n".join(lines) + "\n")


def write_labels_csv(
    path: str | Path,
    grid: SweepGrid,
    labels: np.ndarray,
    iteration_of: np.ndarray,
) -> None:
    lines = ["U,V,label,iteration"]
    for iu in range(grid.nu):
        for iv in range(grid.nv):
            p = grid.params_at(iu, iv)
            lines.append(
                f"{format_float(p.U)},{format_float(p.V)},"
                f"{int(labels[iu, iv])},{int(iteration_of[iu, iv])}"
            )
    _write_text(path, "\n".join(lines) + "\n")


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    """Plain grayscale heatmap, linearly rescaled to 0..255 per file."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi > lo:
        pixels = np.rint((v - lo) / (hi - lo) * 255.0).astype(np.int64)
    else:
        pixels = np.zeros_like(v, dtype=np.int64)
    rows, cols = v.shape
    lines = ["P2", f"{cols} {rows}", "255"]
    lines.extend(" ".join(str(int(x)) for x in row) for row in pixels)
    _write_text(path, "\n".join(lines) + "\n")


def write_observables_csv(
    path: str | Path,
    grid: SweepGrid,
    cache: dict[tuple[int, int], GroundStateRecord],
) -> None:
    lines = ["U,V,O_SF,O_DW,O_HI,S_entropy,S_structure,xi"]
    for iu in range(grid.nu):
        for iv in range(grid.nv):
            r = cache[(iu, iv)]
            lines.append(
                ",".join(
                    format_float(x)
                    for x in (
                        r.params.U,
                        r.params.V,
                        r.order_sf,
                        r.order_dw,
                        r.order_hi,
                        r.central_entropy,
                        r.structure,
                        r.xi,
                    )
                )
            )
    _write_text(path, "\n".join(lines) + "\n")


def write_fidelity_csv(path: str | Path, fidelity: np.ndarray) -> None:
    """Full overlap matrix; the adjacent-pair series gets its own column."""
    n = fidelity.shape[0]
    lines = ["i,j,F,off_diagonal"]
    for i in range(n):
        for j in range(n):
            extra = format_float(fidelity[i, j]) if j == i + 1 else ""
            lines.append(f"{i},{j},{format_float(fidelity[i, j])},{extra}")
    _write_text(path, "\n".join(lines) + "\n")


def _indicator_lines(
    grid: SweepGrid,
    labels: np.ndarray,
    cache: dict[tuple[int, int], GroundStateRecord],
    label: int,
) -> list[str]:
    members = [
        (iu, iv)
        for iu in range(grid.nu)
        for iv in range(grid.nv)
        if labels[iu, iv] == label
    ]
    if not members:
        return [f"phase {label}: no cells"]
    recs = [cache[c] for c in members]
    means = {
        "O_SF": np.mean([r.order_sf for r in recs]),
        "O_DW": np.mean([r.order_dw for r in recs]),
        "O_HI": np.mean([r.order_hi for r in recs]),
        "S_entropy": np.mean([r.central_entropy for r in recs]),
        "S_structure": np.mean([r.structure for r in recs]),
        "xi": np.mean([r.xi for r in recs]),
    }
    return [
        "  mean indicators: " + ", ".join(f"{k}={v:.4f}" for k, v in means.items())
    ]


def _probe_lines(probe: list[ProbeRow]) -> list[str]:
    lines = [
        "",
        "supersolid probe (correlators at largest trimmed separation):",
        "  U       V       O_SF      O_DW      S_struct  candidate",
    ]
    for row in probe:
        lines.append(
            f"  {row.U:<7.3f} {row.V:<7.3f} {row.order_sf:<9.4f} "
            f"{row.order_dw:<9.4f} {row.structure:<9.4f} "
            f"{'yes' if row.candidate else 'no'}"
        )
    flagged = sum(1 for r in probe if r.candidate)
    lines.append(f"  {flagged} candidate cells")
    return lines


def build_label_report(
    grid: SweepGrid,
    labels: np.ndarray,
    cache: dict[tuple[int, int], GroundStateRecord],
    probe: list[ProbeRow] | None = None,
) -> str:
    """Summary rebuilt from a labels file alone, without run internals."""
    lines = [
        f"labeling over {grid.nu}x{grid.nv} grid, "
        f"U in [{grid.u_min:g}, {grid.u_max:g}], V in [{grid.v_min:g}, {grid.v_max:g}]",
        f"unassigned cells: {int(np.sum(labels == UNASSIGNED))}",
        "",
    ]
    for label in sorted(set(labels[labels != UNASSIGNED].tolist())):
        count = int(np.sum(labels == label))
        lines.append(f"phase {label}: {count} cells")
        lines.extend(_indicator_lines(grid, labels, cache, label))
    if probe is not None:
        lines.extend(_probe_lines(probe))
    return "\n".join(lines) + "\n"


def build_report(
    grid: SweepGrid,
    result: DiscoveryResult,
    cache: dict[tuple[int, int], GroundStateRecord],
    probe: list[ProbeRow] | None = None,
) -> str:
    """Human-readable summary of one discovery run."""
    lines = [
        f"discovery over {grid.nu}x{grid.nv} grid, "
        f"U in [{grid.u_min:g}, {grid.u_max:g}], V in [{grid.v_min:g}, {grid.v_max:g}]",
        f"iterations run: {len(result.regions)}",
        f"unassigned cells: {int(np.sum(result.labels == UNASSIGNED))}",
        "",
    ]
    for it, region in enumerate(result.regions):
        ius = [c[0] for c in region]
        ivs = [c[1] for c in region]
        lo = grid.params_at(min(ius), min(ivs))
        hi = grid.params_at(max(ius), max(ivs))
        members = [
            (iu, iv)
            for iu in range(grid.nu)
            for iv in range(grid.nv)
            if result.labels[iu, iv] == it
        ]
        lines.append(f"phase {it}:")
        lines.append(
            f"  trained on {len(region)} cells, "
            f"U in [{lo.U:g}, {hi.U:g}], V in [{lo.V:g}, {hi.V:g}]"
        )
        lines.append(
            f"  threshold {result.thresholds[it]:.6e}, labeled {len(members)} cells"
        )
        if members:
            lines.extend(_indicator_lines(grid, result.labels, cache, it))
    if probe is not None:
        lines.extend(_probe_lines(probe))
    return "\n".join(lines) + "\n"
