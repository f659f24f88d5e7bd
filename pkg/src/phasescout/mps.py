"""Matrix product states on a finite chain, stored in Vidal form.

A state of L sites is a list of site tensors Gamma (legs: left virtual,
physical, right virtual) interleaved with L+1 bond weight vectors Lambda,
where Lambda[0] and Lambda[L] are the trivial boundary weights. Bond b sits
between sites b-1 and b, and its weights are the Schmidt coefficients of the
cut when the state is canonical. Virtual legs carry the cumulative particle
number of everything to their left, so the final boundary leg pins the total
particle number of the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStateError, DomainError
from .symmetry import (
    BlockTensor,
    ChargeLeg,
    SplitResult,
    split_svd,
    tensordot,
)

BondWeights = list[np.ndarray]  # one descending-value array per bond sector


@dataclass
class SchmidtSpectrum:
    """Flat view of one bond: Schmidt values descending with their charges."""

    values: np.ndarray
    charges: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.charges = np.asarray(self.charges, dtype=np.int64)
        if self.values.shape != self.charges.shape or self.values.ndim != 1:
            raise DomainError("values and charges must be matching 1d arrays")
        if np.any(self.values < 0.0):
            raise DomainError("Schmidt values must be non-negative")
        if np.any(np.diff(self.values) > 1e-12):
            raise DomainError("Schmidt values must be sorted in descending order")


def entanglement_entropy(spectrum: SchmidtSpectrum) -> float:
    """Base-2 von Neumann entropy of a Schmidt spectrum.

    Zero values contribute nothing; a two-value spectrum (1/sqrt2, 1/sqrt2)
    gives exactly 1.0.
    """
    p = spectrum.values.astype(np.float64) ** 2
    p = p[p > 0.0]
    if p.size == 0:
        raise DegenerateStateError("spectrum carries no weight")
    return float(-np.sum(p * np.log2(p)))


@dataclass
class MPSState:
    """Finite-chain MPS in Vidal form with conserved particle number."""

    gammas: list[BlockTensor]
    lambdas: list[BondWeights]
    chi_max: int

    def __post_init__(self) -> None:
        if len(self.lambdas) != len(self.gammas) + 1:
            raise DomainError("need exactly one more bond than sites")
        if self.chi_max < 1:
            raise DomainError("chi_max must be at least 1")

    @property
    def length(self) -> int:
        return len(self.gammas)

    @property
    def phys_dim(self) -> int:
        return self.gammas[0].legs[1].dim

    @property
    def total_particles(self) -> int:
        """Total charge carried by the final virtual leg."""
        leg = self.gammas[-1].legs[2]
        if leg.nsectors != 1:
            raise DomainError("right boundary leg must hold a single charge")
        return int(leg.charges[0])

    def bond_leg(self, bond: int) -> ChargeLeg:
        """The charge layout of bond ``bond`` as seen from its left tensor."""
        if bond == 0:
            return self.gammas[0].legs[0].dual()
        return self.gammas[bond - 1].legs[2]

    def bond_dim(self, bond: int) -> int:
        return self.bond_leg(bond).dim

    # ------------------------------------------------------------------
    # spectra and derived site tensors
    # ------------------------------------------------------------------

    def schmidt_spectrum(self, bond: int) -> SchmidtSpectrum:
        if not 0 <= bond <= self.length:
            raise DomainError(f"bond {bond} outside 0..{self.length}")
        leg = self.bond_leg(bond)
        lams = self.lambdas[bond]
        if len(lams) != leg.nsectors:
            raise DomainError(f"bond {bond} weights do not match its leg")
        values = []
        charges = []
        for q, arr in zip(leg.charges, lams):
            values.append(np.asarray(arr, dtype=np.float64))
            charges.append(np.full(len(arr), q, dtype=np.int64))
        v = np.concatenate(values)
        c = np.concatenate(charges)
        order = np.argsort(-v, kind="stable")
        return SchmidtSpectrum(v[order], c[order])

    def theta(self, site: int) -> BlockTensor:
        """Single-site tensor with both neighboring bond weights absorbed."""
        g = self.gammas[site]
        return g.scale_axis(0, self.lambdas[site]).scale_axis(
            2, self.lambdas[site + 1]
        )

    def theta_dense(self, site: int) -> np.ndarray:
        return self.theta(site).to_dense()

    def b_tensor(self, site: int) -> BlockTensor:
        """Right-normalized view: Gamma with the right bond weight absorbed."""
        return self.gammas[site].scale_axis(2, self.lambdas[site + 1])

    def a_tensor(self, site: int) -> BlockTensor:
        """Left-normalized view: Gamma with the left bond weight absorbed."""
        return self.gammas[site].scale_axis(0, self.lambdas[site])

    # ------------------------------------------------------------------
    # expectations
    # ------------------------------------------------------------------

    def expect_local(self, site: int, op: np.ndarray) -> float:
        """<psi| op_site |psi> for a dense single-site operator."""
        th = self.theta_dense(site)
        return float(np.einsum("asb,st,atb->", th, op, th, optimize=True))

    def correlate_pair(
        self,
        i: int,
        j: int,
        op_a: np.ndarray,
        op_b: np.ndarray,
        string_op: np.ndarray | None = None,
    ) -> float:
        """<psi| op_a(i) [prod string_op(l), i<l<j] op_b(j) |psi> for i < j.

        ``string_op`` acts on every site strictly between the two endpoints;
        omit it for a plain two-point function.
        """
        if not 0 <= i < j < self.length:
            raise DomainError(f"need 0 <= i < j < L, got i={i} j={j}")
        th = self.theta_dense(i)
        env = np.einsum("asb,st,atc->bc", th, op_a, th, optimize=True)
        for site in range(i + 1, j):
            b = self.b_tensor(site).to_dense()
            if string_op is None:
                env = np.einsum("bc,bsx,csy->xy", env, b, b, optimize=True)
            else:
                env = np.einsum(
                    "bc,bsx,st,cty->xy", env, b, string_op, b, optimize=True
                )
        b = self.b_tensor(j).to_dense()
        return float(np.einsum("bc,bsx,st,ctx->", env, b, op_b, b, optimize=True))

    def norm(self) -> float:
        return float(np.sqrt(max(overlap(self, self), 0.0)))

    def to_dense_vector(self) -> np.ndarray:
        """Full state vector, physical index of site 0 slowest. Small L only."""
        dim = self.phys_dim**self.length
        if dim > 4_000_000:
            raise DomainError(f"refusing to densify a {dim}-dimensional state")
        acc = self.theta_dense(0)  # (vl, p, vr)
        acc = acc.reshape(acc.shape[0] * acc.shape[1], acc.shape[2])
        for site in range(1, self.length):
            b = self.b_tensor(site).to_dense()
            acc = np.tensordot(acc, b, axes=([1], [0]))
            acc = acc.reshape(acc.shape[0] * acc.shape[1], acc.shape[2])
        return acc.reshape(-1)


def product_state(occupations: list[int], d: int, chi_max: int) -> MPSState:
    """Normalized bond-dimension-1 state |n_0 n_1 ... n_{L-1}>."""
    if not occupations:
        raise DomainError("need at least one site")
    if any(not 0 <= n < d for n in occupations):
        raise DomainError(f"occupations must lie in 0..{d - 1}")
    phys = ChargeLeg(tuple(range(d)), (1,) * d, +1)
    gammas = []
    lambdas: list[BondWeights] = [[np.ones(1)]]
    cum = 0
    for n in occupations:
        left = ChargeLeg((cum,), (1,), +1)
        cum += n
        right = ChargeLeg((cum,), (1,), -1)
        g = BlockTensor([left, phys, right], 0)
        g.set_block((0, n, 0), np.ones((1, 1, 1)))
        gammas.append(g)
        lambdas.append([np.ones(1)])
    return MPSState(gammas, lambdas, chi_max)


def overlap(a: MPSState, b: MPSState) -> float:
    """<a|b> for two real states on the same chain."""
    if a.length != b.length or a.phys_dim != b.phys_dim:
        raise DomainError("states live on different chains")
    env = np.ones((1, 1))
    for site in range(a.length):
        ta = (a.theta(site) if site == 0 else a.b_tensor(site)).to_dense()
        tb = (b.theta(site) if site == 0 else b.b_tensor(site)).to_dense()
        env = np.einsum("xy,xsa,ysb->ab", env, ta, tb, optimize=True)
    return float(env[0, 0])


def canonicalize(
    state: MPSState,
    chi_max: int | None = None,
    sv_min: float = 1e-12,
) -> MPSState:
    """Return an equivalent normalized state in canonical Vidal form.

    Works in two passes: a right-to-left orthogonalization that makes every
    site right-isometric, then a left-to-right sweep of charge-resolved SVDs
    that extracts the true Schmidt weights bond by bond (truncating to
    ``chi_max`` with the ``sv_min`` floor) and stores Gamma tensors with the
    left bond weights divided back out. The returned state has norm one; a
    zero-norm input raises DegenerateStateError.
    """
    L = state.length
    cap = state.chi_max if chi_max is None else chi_max

    # Pass 1: right to left. work[i] become right-isometric except work[0],
    # which carries the whole norm.
    work = [state.b_tensor(i) for i in range(L)]
    for i in range(L - 1, 0, -1):
        try:
            res = split_svd(work[i], 1, rel_floor=1e-14)
        except Exception as exc:  # zero tensor means zero state
            raise DegenerateStateError("state has zero norm") from exc
        work[i] = res.right
        carry = res.left.scale_axis(1, res.weights)
        work[i - 1] = tensordot(work[i - 1], carry, axes=([2], [0]))

    # Pass 2: left to right, extracting Schmidt weights.
    gammas: list[BlockTensor] = []
    lambdas: list[BondWeights] = [[np.ones(1)]]
    theta = work[0]
    for i in range(L):
        if i == L - 1:
            nrm = theta.norm()
            if nrm <= 0.0:
                raise DegenerateStateError("state has zero norm")
            gam = theta.scale(1.0 / nrm)
            gam = _divide_axis(gam, 0, lambdas[i])
            gammas.append(gam)
            lambdas.append([np.ones(1)])
            break
        res = split_svd(theta, 2, chi_max=cap, sv_min=sv_min, rel_floor=1e-14)
        gam = _divide_axis(res.left, 0, lambdas[i])
        gammas.append(gam)
        lambdas.append(res.weights)
        carry = _scale_left(res.right, res.weights)
        theta = tensordot(carry, work[i + 1], axes=([1], [0]))
    return MPSState(gammas, lambdas, state.chi_max if chi_max is None else cap)


def _divide_axis(t: BlockTensor, axis: int, weights: BondWeights) -> BlockTensor:
    """Divide along a bond axis by per-sector weights (inverse of absorb)."""
    inv = [1.0 / np.asarray(w, dtype=np.float64) for w in weights]
    return t.scale_axis(axis, inv)


def _scale_left(t: BlockTensor, weights: BondWeights) -> BlockTensor:
    return t.scale_axis(0, weights)


def split_theta(
    theta: BlockTensor,
    chi_max: int,
    sv_min: float = 1e-12,
) -> SplitResult:
    """Truncated charge-resolved SVD of a two-site wavefunction.

    Thin wrapper fixing the cut after the first two legs (left virtual and
    first physical), which is the split every two-site update needs.
    """
    return split_svd(theta, 2, chi_max=chi_max, sv_min=sv_min)
