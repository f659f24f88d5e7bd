"""Grid sweep over the (U, V) plane with a persistent record cache."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..dmrg import DmrgConfig, run_dmrg
from ..errors import DomainError, RecordError
from ..model import ModelParams
from .records import (
    GroundStateRecord,
    ManifestEntry,
    cell_filename,
    file_checksum,
    load_record,
    record_from_result,
    write_manifest,
    write_record,
)

MANIFEST_NAME = "manifest.txt"


@dataclass(frozen=True)
class SweepGrid:
    """Rectangular scan of the interaction plane.

    ``model`` is the per-cell template; its U and V entries are replaced
    by the cell values. Each cell runs at fixed particle number
    ``n_particles`` (unit filling when omitted) and gets its own noise
    stream via the cell indices, so results do not depend on execution
    order.
    """

    u_min: float
    u_max: float
    v_min: float
    v_max: float
    nu: int
    nv: int
    model: ModelParams = field(default_factory=lambda: ModelParams(L=32, n_max=3))
    dmrg: DmrgConfig = field(default_factory=DmrgConfig)
    n_particles: int | None = None

    def __post_init__(self) -> None:
        if self.nu < 2 or self.nv < 2:
            raise DomainError("a sweep grid needs at least 2 points per axis")
        if not (self.u_max > self.u_min and self.v_max > self.v_min):
            raise DomainError("grid parameter ranges must be non-degenerate")

    @property
    def u_values(self) -> np.ndarray:
        return np.linspace(self.u_min, self.u_max, self.nu)

    @property
    def v_values(self) -> np.ndarray:
        return np.linspace(self.v_min, self.v_max, self.nv)

    @property
    def filling_count(self) -> int:
        return self.model.L if self.n_particles is None else self.n_particles

    def cells(self) -> list[tuple[int, int]]:
        return [(iu, iv) for iu in range(self.nu) for iv in range(self.nv)]

    def params_at(self, iu: int, iv: int) -> ModelParams:
        return replace(
            self.model,
            U=float(self.u_values[iu]),
            V=float(self.v_values[iv]),
        )


def _cell_config(grid: SweepGrid, iu: int, iv: int) -> DmrgConfig:
    return replace(grid.dmrg, seed_context=grid.dmrg.seed_context + (iu, iv))


def _record_matches(rec: GroundStateRecord, grid: SweepGrid, iu: int, iv: int) -> bool:
    return rec.params == grid.params_at(iu, iv) and rec.n_particles == grid.filling_count


def _compute_cell(args: tuple[SweepGrid, int, int, str]) -> tuple[int, int, str, bool, float]:
    grid, iu, iv, store = args
    params = grid.params_at(iu, iv)
    result = run_dmrg(params, _cell_config(grid, iu, iv), n_particles=grid.filling_count)
    record = record_from_result(params, grid.filling_count, result)
    checksum = write_record(Path(store) / cell_filename(iu, iv), record)
    return iu, iv, checksum, record.converged, record.energy


def sweep_groundstates(
    grid: SweepGrid,
    store: str | Path,
    jobs: int = 1,
    log=None,
) -> list[ManifestEntry]:
    """Fill the cache for every grid cell, skipping valid existing records.

    A record is reused only when it verifies and was produced with the
    same parameters and filling; corrupted or stale files are recomputed
    in place. Returns the manifest entries (also written to the store)
    in row-major cell order.
    """
    say = log if log is not None else (lambda s: None)
    store = Path(store)
    store.mkdir(parents=True, exist_ok=True)

    entries: dict[tuple[int, int], ManifestEntry] = {}
    todo: list[tuple[SweepGrid, int, int, str]] = []
    cached = 0
    for iu, iv in grid.cells():
        path = store / cell_filename(iu, iv)
        if path.exists():
            try:
                rec = load_record(path)
            except RecordError:
                rec = None
            if rec is not None and _record_matches(rec, grid, iu, iv):
                entries[(iu, iv)] = ManifestEntry(
                    iu, iv, rec.params.U, rec.params.V,
                    file_checksum(path), rec.converged,
                )
                cached += 1
                continue
        todo.append((grid, iu, iv, str(store)))

    if jobs > 1 and todo:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_compute_cell, todo))
    else:
        results = []
        for item in todo:
            results.append(_compute_cell(item))
            iu, iv, _, conv, energy = results[-1]
            p = grid.params_at(iu, iv)
            flag = "" if conv else "  NOT CONVERGED"
            say(f"cell ({iu},{iv}) U={p.U:g} V={p.V:g} E={energy:.9f}{flag}")

    for iu, iv, checksum, conv, energy in results:
        p = grid.params_at(iu, iv)
        entries[(iu, iv)] = ManifestEntry(iu, iv, p.U, p.V, checksum, conv)
        if jobs > 1:
            flag = "" if conv else "  NOT CONVERGED"
            say(f"cell ({iu},{iv}) U={p.U:g} V={p.V:g} E={energy:.9f}{flag}")

    say(f"{len(results)} computed, {cached} cached")
    ordered = [entries[c] for c in grid.cells()]
    write_manifest(store / MANIFEST_NAME, ordered)
    return ordered
