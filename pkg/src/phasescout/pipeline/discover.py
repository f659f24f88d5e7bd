"""Unsupervised phase discovery by reconstruction-loss anomaly detection.

The loop trains a detector on a small region assumed homogeneous, scores
every grid cell by reconstruction loss, labels the cells the detector
finds unremarkable, and retrains on the most coherent block of anomalies.
No order parameter enters the loop; those are computed independently and
only consulted in reports.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..ae import Autoencoder, TrainConfig, TrainResult, train
from ..dmrg import DmrgConfig, run_dmrg
from ..errors import ConvergenceError, DomainError, IncompleteCacheError, RecordError
from ..model import BosonOps, ModelParams, structure_factor
from .inputs import extract_input, input_shape
from .records import GroundStateRecord, cell_filename, load_record
from .sweep import SweepGrid

UNASSIGNED = -1

Cell = tuple[int, int]
Cache = dict[Cell, GroundStateRecord]


def missing_cells(store: str | Path, grid: SweepGrid) -> list[Cell]:
    """Cells whose record is absent, unreadable, or from other parameters."""
    store = Path(store)
    missing = []
    for iu, iv in grid.cells():
        path = store / cell_filename(iu, iv)
        try:
            rec = load_record(path)
        except RecordError:
            missing.append((iu, iv))
            continue
        if rec.params != grid.params_at(iu, iv) or rec.n_particles != grid.filling_count:
            missing.append((iu, iv))
    return missing


def load_cache(store: str | Path, grid: SweepGrid) -> Cache:
    """All records of a completed sweep, keyed by cell indices."""
    gaps = missing_cells(store, grid)
    if gaps:
        raise IncompleteCacheError(gaps)
    store = Path(store)
    return {
        (iu, iv): load_record(store / cell_filename(iu, iv))
        for iu, iv in grid.cells()
    }


@dataclass
class LossMap:
    """Per-cell reconstruction losses of one scoring pass."""

    losses: np.ndarray
    kind: str
    train_mask: np.ndarray

    @property
    def train_losses(self) -> np.ndarray:
        return self.losses[self.train_mask]


@dataclass
class RegionProposal:
    """Next training region: cells of the winning anomaly box."""

    cells: list[Cell]
    box: tuple[int, int, int, int] | None
    threshold: float
    n_components: int


@dataclass
class DiscoveryResult:
    """Labels, provenance, and every intermediate loss map of one run."""

    labels: np.ndarray
    iteration_of: np.ndarray
    loss_maps: list[LossMap]
    regions: list[list[Cell]]
    thresholds: list[float]
    train_results: list[TrainResult]


def anomaly_threshold(train_losses: np.ndarray) -> float:
    """Training-region median plus three median absolute deviations."""
    med = float(np.median(train_losses))
    mad = float(np.median(np.abs(train_losses - med)))
    return med + 3.0 * mad


def train_region(
    cache: Cache,
    cells: list[Cell],
    kind: str,
    chi_max: int,
    cfg: TrainConfig | None = None,
    filters: int = 64,
) -> tuple[Autoencoder, TrainResult]:
    """Train a fresh detector on the converged records of one region."""
    if not cells:
        raise DomainError("training region is empty")
    if cfg is None:
        cfg = TrainConfig()
    records = [cache[c] for c in cells]
    usable = [r for r in records if r.converged]
    if not usable:
        raise DomainError("training region contains only non-converged records")
    data = [extract_input(r, kind, chi_max) for r in usable]
    channels, *spatial = data[0].shape
    model = Autoencoder(channels, tuple(spatial), filters=filters, seed=cfg.seed)
    result = train(model, data, cfg)
    return model, result


def evaluate_loss_map(
    model: Autoencoder,
    cache: Cache,
    kind: str,
    grid: SweepGrid,
    train_cells: list[Cell] | None = None,
) -> LossMap:
    """Reconstruction loss of every cell, training region included."""
    chi_max = grid.dmrg.chi_max
    d = grid.model.n_max + 1
    expected = input_shape(kind, chi_max, d, grid.model.L)
    if model.input_shape != expected:
        raise DomainError(
            f"model expects input shape {model.input_shape}, kind {kind!r} "
            f"produces {expected}"
        )
    losses = np.zeros((grid.nu, grid.nv))
    for (iu, iv), rec in cache.items():
        losses[iu, iv] = model.sample_loss(extract_input(rec, kind, chi_max))
    mask = np.zeros((grid.nu, grid.nv), dtype=bool)
    for iu, iv in train_cells or []:
        mask[iu, iv] = True
    return LossMap(losses=losses, kind=kind, train_mask=mask)


def _components(mask: np.ndarray) -> list[list[Cell]]:
    """4-connected components of a boolean grid, in row-major discovery order."""
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    nu, nv = mask.shape
    for iu in range(nu):
        for iv in range(nv):
            if not mask[iu, iv] or seen[iu, iv]:
                continue
            queue = [(iu, iv)]
            seen[iu, iv] = True
            comp = []
            while queue:
                a, b = queue.pop()
                comp.append((a, b))
                for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    x, y = a + da, b + db
                    if 0 <= x < nu and 0 <= y < nv and mask[x, y] and not seen[x, y]:
                        seen[x, y] = True
                        queue.append((x, y))
            comps.append(sorted(comp))
    return comps


def propose_region(loss_map: LossMap, labels: np.ndarray) -> RegionProposal:
    """Bounding box of the most coherent block of unassigned anomalies.

    Components are ranked by size over loss variance, preferring large
    homogeneous plateaus over small spikes. The winner's bounding box
    loses a one-cell margin on each side to stay clear of the boundary
    rise, unless that would empty it. Already-labeled cells never enter
    the proposal, so each cell is trained on (and labeled by) at most
    one iteration.
    """
    if not loss_map.train_mask.any():
        raise DomainError("loss map carries no training region for the threshold")
    threshold = anomaly_threshold(loss_map.train_losses)
    mask = (loss_map.losses > threshold) & (labels == UNASSIGNED)
    comps = _components(mask)
    if not comps:
        return RegionProposal([], None, threshold, 0)

    def score(comp: list[Cell]) -> float:
        vals = np.array([loss_map.losses[c] for c in comp])
        return len(comp) / (float(np.var(vals)) + 1e-30)

    best = max(comps, key=score)
    ius = [c[0] for c in best]
    ivs = [c[1] for c in best]
    box = (min(ius), max(ius), min(ivs), max(ivs))
    shrunk = (box[0] + 1, box[1] - 1, box[2] + 1, box[3] - 1)
    if shrunk[0] > shrunk[1] or shrunk[2] > shrunk[3]:
        shrunk = box
    cells = [
        (iu, iv)
        for iu in range(shrunk[0], shrunk[1] + 1)
        for iv in range(shrunk[2], shrunk[3] + 1)
        if labels[iu, iv] == UNASSIGNED
    ]
    if not cells:
        return RegionProposal([], None, threshold, len(comps))
    return RegionProposal(cells, shrunk, threshold, len(comps))


def origin_block(grid: SweepGrid, size: int = 3) -> list[Cell]:
    """The seed training region: a small block at the grid origin."""
    return [
        (iu, iv)
        for iu in range(min(size, grid.nu))
        for iv in range(min(size, grid.nv))
    ]


def discover_phases(
    cache: Cache,
    grid: SweepGrid,
    kind: str,
    cfg: TrainConfig | None = None,
    filters: int = 64,
    max_iterations: int = 10,
    log=None,
) -> DiscoveryResult:
    """Iterate train / score / label / propose until no anomalies remain.

    Every training cell is labeled with its iteration, so the unassigned
    set shrinks each round and the loop always terminates. A proposal
    identical to an earlier training region means the labeling stalled;
    that aborts with a diagnostic instead of looping.
    """
    if max_iterations < 1:
        raise DomainError("at least one discovery iteration is required")
    say = log if log is not None else (lambda s: None)
    labels = np.full((grid.nu, grid.nv), UNASSIGNED, dtype=np.int64)
    iteration_of = np.full((grid.nu, grid.nv), UNASSIGNED, dtype=np.int64)
    loss_maps: list[LossMap] = []
    regions: list[list[Cell]] = []
    thresholds: list[float] = []
    train_results: list[TrainResult] = []

    region = origin_block(grid)
    for it in range(max_iterations):
        say(f"iteration {it}: training on {len(region)} cells")
        model, result = train_region(cache, region, kind, grid.dmrg.chi_max, cfg, filters)
        lm = evaluate_loss_map(model, cache, kind, grid, train_cells=region)
        threshold = anomaly_threshold(lm.train_losses)

        newly = 0
        for iu in range(grid.nu):
            for iv in range(grid.nv):
                if labels[iu, iv] != UNASSIGNED:
                    continue
                if lm.losses[iu, iv] <= threshold or (iu, iv) in set(region):
                    labels[iu, iv] = it
                    iteration_of[iu, iv] = it
                    newly += 1
        say(
            f"iteration {it}: threshold {threshold:.3e}, labeled {newly} cells, "
            f"{int(np.sum(labels == UNASSIGNED))} unassigned"
        )

        loss_maps.append(lm)
        regions.append(list(region))
        thresholds.append(threshold)
        train_results.append(result)

        proposal = propose_region(lm, labels)
        if not proposal.cells:
            say(f"iteration {it}: no anomalous region left, stopping")
            break
        if any(set(proposal.cells) == set(prev) for prev in regions):
            raise ConvergenceError(
                f"iteration {it} proposed a region already trained on "
                f"(box {proposal.box}); labeling is not advancing"
            )
        region = proposal.cells

    return DiscoveryResult(
        labels=labels,
        iteration_of=iteration_of,
        loss_maps=loss_maps,
        regions=regions,
        thresholds=thresholds,
        train_results=train_results,
    )


# ----------------------------------------------------------------------
# supersolid indicators, read straight off the cached records
# ----------------------------------------------------------------------


@dataclass
class ProbeRow:
    iu: int
    iv: int
    U: float
    V: float
    order_sf: float
    order_dw: float
    structure: float
    candidate: bool


def supersolid_probe(
    cache: Cache,
    cells: list[Cell],
    sf_min: float = 0.2,
    dw_min: float = 0.2,
    structure_min: float = 0.05,
) -> list[ProbeRow]:
    """Flag cells where superfluid and solid order coexist.

    Coexistence is judged from the long-range correlator values at the
    largest margin-trimmed separation (the open-chain stand-in for r = L):
    the averaged forms keep a short-distance floor in every phase, while
    the far values vanish exponentially in the insulators. The magnitude
    of C_DW is used because the boundary pins which sublattice carries
    the density wave and with it the sign at odd separations. A candidate
    must clear all three floors at once.
    """
    rows = []
    for iu, iv in cells:
        rec = cache[(iu, iv)]
        margin = rec.margin
        far_col = rec.params.L - 1 - margin
        far_sf = float(rec.corr_sf[margin, far_col])
        far_dw = abs(float(rec.corr_dw[margin, far_col]))
        rows.append(
            ProbeRow(
                iu=iu,
                iv=iv,
                U=rec.params.U,
                V=rec.params.V,
                order_sf=far_sf,
                order_dw=far_dw,
                structure=rec.structure,
                candidate=(
                    far_sf >= sf_min
                    and far_dw >= dw_min
                    and rec.structure >= structure_min
                ),
            )
        )
    return rows


@dataclass
class HoleRow:
    holes: int
    n_particles: int
    energy: float
    structure: float
    converged: bool


def hole_study(
    params: ModelParams,
    config: DmrgConfig | None = None,
    max_holes: int = 4,
) -> list[HoleRow]:
    """Structure factor of the doped chain as particles are removed.

    Runs the ground state at N = L - h for h = 0..max_holes and reports
    the density-wave peak, tracking how solid order melts with doping.
    """
    if config is None:
        config = DmrgConfig()
    if not 0 <= max_holes < params.L:
        raise DomainError("hole count must stay below the chain length")
    ops = BosonOps(params.n_max)
    rows = []
    for h in range(max_holes + 1):
        cfg = replace(config, seed_context=config.seed_context + (200 + h,))
        res = run_dmrg(params, cfg, n_particles=params.L - h)
        density = np.array(
            [res.state.expect_local(i, ops.number) for i in range(params.L)]
        )
        peak, _ = structure_factor(density)
        rows.append(
            HoleRow(
                holes=h,
                n_particles=params.L - h,
                energy=res.energy,
                structure=peak,
                converged=res.report.converged,
            )
        )
    return rows
