"""Parameter scans built on repeated ground-state searches."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dmrg import DmrgConfig, DmrgResult, run_dmrg
from .errors import DomainError
from .model import ModelParams, correlator_matrix
from .mps import overlap

AXES = ("U", "V")


@dataclass
class ChargeGapResult:
    """E(N+1) + E(N-1) - 2 E(N) and the three sector energies behind it."""

    gap: float
    e_zero: float
    e_plus: float
    e_minus: float
    all_converged: bool


def charge_gap(
    params: ModelParams,
    config: DmrgConfig | None = None,
    n_particles: int | None = None,
) -> ChargeGapResult:
    """Charge gap at filling ``n_particles`` (defaults to one boson a site)."""
    if config is None:
        config = DmrgConfig()
    n0 = params.L if n_particles is None else n_particles
    if n0 < 1 or n0 + 1 > params.L * params.n_max:
        raise DomainError("neighboring sectors do not both exist at this filling")
    runs: dict[int, DmrgResult] = {}
    for offset in (0, +1, -1):
        cfg = replace(config, seed_context=config.seed_context + (100 + offset,))
        runs[offset] = run_dmrg(params, cfg, n_particles=n0 + offset)
    gap = runs[+1].energy + runs[-1].energy - 2.0 * runs[0].energy
    return ChargeGapResult(
        gap=gap,
        e_zero=runs[0].energy,
        e_plus=runs[+1].energy,
        e_minus=runs[-1].energy,
        all_converged=all(r.report.converged for r in runs.values()),
    )


@dataclass
class FidelityScan:
    """Pairwise ground-state overlaps along a one-parameter cut.

    ``fidelity[i, j]`` is |<psi(values[i]) | psi(values[j])>|; the diagonal
    is one up to roundoff. The per-point density-wave and string order
    parameters ride along so overlap drops can be placed against the
    conventional transition markers from the same states. They are the
    long-range correlator values at the largest margin-trimmed separation
    (the open-chain stand-in for evaluation at r = L), which change sign
    or cross at the onsets; the double-sum averages blur those markers.
    """

    axis: str
    values: np.ndarray
    fixed: float
    fidelity: np.ndarray
    energies: np.ndarray
    all_converged: bool
    order_dw: np.ndarray = None
    order_hi: np.ndarray = None

    def adjacent(self) -> np.ndarray:
        """The first off-diagonal, fidelity between neighboring points."""
        return np.array(
            [self.fidelity[i, i + 1] for i in range(len(self.values) - 1)]
        )


def fidelity_cut(
    params: ModelParams,
    axis: str,
    values: np.ndarray,
    config: DmrgConfig | None = None,
) -> FidelityScan:
    """Ground states along a U or V cut and their overlap matrix."""
    axis = axis.upper()
    if axis not in AXES:
        raise DomainError(f"axis must be one of {AXES}, got {axis!r}")
    if config is None:
        config = DmrgConfig()
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise DomainError("a cut needs at least two parameter values")

    states = []
    energies = []
    order_dw = []
    order_hi = []
    converged = True
    margin = params.L // 8
    for k, v in enumerate(values):
        p = replace(params, **{axis: float(v)})
        cfg = replace(
            config, seed_context=config.seed_context + (AXES.index(axis), k)
        )
        res = run_dmrg(p, cfg)
        states.append(res.state)
        energies.append(res.energy)
        far = params.L - 1 - margin
        order_dw.append(correlator_matrix(res.state, "dw")[margin, far])
        order_hi.append(correlator_matrix(res.state, "hi")[margin, far])
        converged = converged and res.report.converged

    npts = values.size
    fid = np.eye(npts)
    for i in range(npts):
        for j in range(i + 1, npts):
            fid[i, j] = fid[j, i] = abs(overlap(states[i], states[j]))
    fixed_axis = "V" if axis == "U" else "U"
    return FidelityScan(
        axis=axis,
        values=values,
        fixed=getattr(params, fixed_axis),
        fidelity=fid,
        energies=np.asarray(energies),
        all_converged=converged,
        order_dw=np.asarray(order_dw),
        order_hi=np.asarray(order_hi),
    )
