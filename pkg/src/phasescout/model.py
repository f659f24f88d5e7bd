"""Extended Bose-Hubbard chain: Hamiltonian, correlators, observables.

The model is a softcore boson chain with open boundaries,

    H = -t sum_i (b+_i b_{i+1} + h.c.)
        + (U/2) sum_i n_i (n_i - 1)
        + V sum_i n_i n_{i+1},

with at most ``n_max`` bosons per site. All measurement code in this module
works on canonical Vidal-form states and returns plain floats and arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse.linalg

from .errors import DomainError
from .mps import MPSState, entanglement_entropy

MPO_WIDTH = 5
# Charge carried down each MPO virtual channel: the two hopping channels
# transport one boson between neighboring sites, everything else is neutral.
MPO_CHANNEL_CHARGES = (0, +1, -1, 0, 0)


@dataclass(frozen=True)
class ModelParams:
    """Couplings and geometry of one chain."""

    t: float = 1.0
    U: float = 0.0
    V: float = 0.0
    L: int = 32
    n_max: int = 3

    def __post_init__(self) -> None:
        if self.L < 2:
            raise DomainError("chain needs at least two sites")
        if self.n_max < 1:
            raise DomainError("n_max must be at least 1")

    @property
    def d(self) -> int:
        return self.n_max + 1


class BosonOps:
    """Dense single-site operators for a cutoff of ``n_max`` bosons."""

    def __init__(self, n_max: int) -> None:
        if n_max < 1:
            raise DomainError("n_max must be at least 1")
        d = n_max + 1
        self.d = d
        self.ident = np.eye(d)
        self.annihilate = np.diag(np.sqrt(np.arange(1.0, d)), 1)
        self.create = self.annihilate.T.copy()
        self.number = np.diag(np.arange(float(d)))

    def delta_n(self, filling: float) -> np.ndarray:
        """n - filling, the density fluctuation operator."""
        return self.number - filling * self.ident

    def string_phase(self, filling: float) -> np.ndarray:
        """exp(-i pi (n - filling)) as a real matrix; integer filling only."""
        if abs(filling - round(filling)) > 1e-12:
            raise DomainError(
                "the string operator is only real at integer filling, "
                f"got filling {filling}"
            )
        dn = np.arange(self.d) - round(filling)
        return np.diag(np.cos(np.pi * dn))


@dataclass
class Mpo:
    """Dense matrix product operator, one (Dl, d, d, Dr) tensor per site."""

    tensors: list[np.ndarray]
    channel_charges: tuple[int, ...] = MPO_CHANNEL_CHARGES

    @property
    def length(self) -> int:
        return len(self.tensors)


def build_mpo(params: ModelParams) -> Mpo:
    """Bond-dimension-5 MPO for the Hamiltonian on ``params.L`` sites.

    Bulk layout (rows act left, columns right):

        [ I   b+   b    n   h ]
        [ .   .    .    .  -t b  ]
        [ .   .    .    .  -t b+ ]
        [ .   .    .    .   V n  ]
        [ .   .    .    .   I    ]

    with the on-site term h = (U/2) n (n - 1). The first site keeps only the
    top row, the last site only the right column.
    """
    ops = BosonOps(params.n_max)
    d = params.d
    h_loc = 0.5 * params.U * ops.number @ (ops.number - ops.ident)

    w = np.zeros((MPO_WIDTH, d, d, MPO_WIDTH))
    w[0, :, :, 0] = ops.ident
    w[0, :, :, 1] = ops.create
    w[0, :, :, 2] = ops.annihilate
    w[0, :, :, 3] = ops.number
    w[0, :, :, 4] = h_loc
    w[1, :, :, 4] = -params.t * ops.annihilate
    w[2, :, :, 4] = -params.t * ops.create
    w[3, :, :, 4] = params.V * ops.number
    w[4, :, :, 4] = ops.ident

    first = np.ascontiguousarray(w[:1])
    last = np.ascontiguousarray(w[:, :, :, 4:])
    tensors = [first] + [w.copy() for _ in range(params.L - 2)] + [last]
    return Mpo(tensors)


def mpo_expectation(state: MPSState, mpo: Mpo) -> float:
    """<psi| H |psi> by a single left-to-right environment sweep."""
    if mpo.length != state.length:
        raise DomainError("operator and state have different lengths")
    env = np.ones((1, 1, 1))  # (ket, channel, bra)
    for site in range(state.length):
        tens = state.theta(site) if site == 0 else state.b_tensor(site)
        t = tens.to_dense()
        w = mpo.tensors[site]  # (w, s_bra, s_ket, w')
        x = np.tensordot(env, t, axes=([0], [0]))       # (w, bra, s, r)
        x = np.tensordot(x, w, axes=([0, 2], [0, 2]))   # (bra, r, s', w')
        env = np.tensordot(x, t, axes=([0, 2], [0, 1]))  # (ket r, w', bra r')
    return float(env[0, 0, 0])


# ----------------------------------------------------------------------
# correlation matrices and order parameters
# ----------------------------------------------------------------------

CORRELATOR_KINDS = ("sf", "dw", "hi")


def correlator_matrix(state: MPSState, kind: str, filling: float | None = None) -> np.ndarray:
    """Full symmetric L x L correlation matrix of one kind.

    kinds: ``sf`` is <b+_i b_j>, ``dw`` is <dn_i (-1)^{|i-j|} dn_j>, and
    ``hi`` is the string correlator <dn_i exp(-i pi sum_{i<=l<j} dn_l) dn_j>
    whose phase string covers the left endpoint but not the right one. All
    diagonals are the coincident limit of the formula: <n_i> for ``sf`` and
    <dn_i^2> for the other two (the string over an empty range is one).
    """
    kind = kind.lower()
    if kind not in CORRELATOR_KINDS:
        raise DomainError(f"unknown correlator kind {kind!r}")
    L = state.length
    ops = BosonOps(state.phys_dim - 1)
    if filling is None:
        filling = state.total_particles / L

    if kind == "sf":
        op_a, op_b, string = ops.create, ops.annihilate, None
        diag_op = ops.number
    else:
        dn = ops.delta_n(filling)
        diag_op = dn @ dn
        if kind == "dw":
            op_a, op_b, string = dn, dn, None
        else:
            phase = ops.string_phase(filling)
            op_a, op_b, string = dn @ phase, dn, phase

    out = np.zeros((L, L))
    for i in range(L):
        out[i, i] = state.expect_local(i, diag_op)
        row = _row_correlations(state, i, op_a, op_b, string)
        if kind == "dw":
            signs = np.array([(-1.0) ** (j - i) for j in range(i + 1, L)])
            row = row * signs
        out[i, i + 1 :] = row
        out[i + 1 :, i] = row
    return out


def _row_correlations(
    state: MPSState,
    i: int,
    op_a: np.ndarray,
    op_b: np.ndarray,
    string_op: np.ndarray | None,
) -> np.ndarray:
    """All <op_a(i) ... op_b(j)> for j > i with one environment sweep."""
    L = state.length
    th = state.theta_dense(i)
    env = np.einsum("asb,st,atc->bc", th, op_a, th, optimize=True)
    out = np.zeros(L - i - 1)
    for j in range(i + 1, L):
        b = state.b_tensor(j).to_dense()
        out[j - i - 1] = float(
            np.einsum("bc,bsr,st,ctr->", env, b, op_b, b, optimize=True)
        )
        if j < L - 1:
            if string_op is None:
                env = np.einsum("bc,bsx,csy->xy", env, b, b, optimize=True)
            else:
                env = np.einsum(
                    "bc,bsx,st,cty->xy", env, b, string_op, b, optimize=True
                )
    return out


def order_parameter(corr: np.ndarray) -> float:
    """Plain double average of a correlation matrix, sum_{ij} C_ij / L^2."""
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise DomainError("correlation matrix must be square")
    return float(np.sum(corr) / corr.size)


def trim_margin(corr: np.ndarray, margin: int) -> np.ndarray:
    """Drop ``margin`` rows and columns from each edge of a square matrix."""
    L = corr.shape[0]
    if margin < 0 or 2 * margin >= L:
        raise DomainError(f"margin {margin} leaves no interior of a {L}-site chain")
    if margin == 0:
        return corr
    return corr[margin : L - margin, margin : L - margin]


def structure_factor(density: np.ndarray) -> tuple[float, float]:
    """Peak of |n~(k)|^2 over nonzero momenta, with the peak momentum.

    n~(k) = sum_j n_j exp(-i k j) / L on the discrete grid k = 2 pi m / L.
    A perfect two-site density wave gives exactly 1.0 at k = pi; a uniform
    profile gives 0.0.
    """
    density = np.asarray(density, dtype=np.float64)
    L = density.size
    if L < 2:
        raise DomainError("need at least two sites for a structure factor")
    amps = np.fft.fft(density) / L
    power = np.abs(amps) ** 2
    m = int(np.argmax(power[1:])) + 1
    return float(power[m]), float(2.0 * np.pi * m / L)


@dataclass
class CorrelationLengthResult:
    """Correlation length from the transfer spectrum of a central window."""

    xi: float
    mu2: float
    window: int


def correlation_length(state: MPSState, window: int = 8) -> CorrelationLengthResult:
    """Estimate the correlation length from a window transfer map.

    The map acts on bond matrices M -> sum_s B M B^T composed over ``window``
    central sites of right-normalized tensors. Its leading eigenvalue is one
    by canonicality; the second, mu2 = exp(-window / xi), sets the length.
    The eigenproblem needs equal bond dimensions at both window ends, so the
    window shrinks (staying centered) until they match; states with trivial
    bonds, or no matching window of two or more sites, report xi = 0.
    """
    L = state.length
    if not 2 <= window <= L:
        raise DomainError(f"window {window} does not fit a {L}-site chain")
    start = None
    while window >= 2:
        cand = (L - window) // 2
        if state.bond_dim(cand) == state.bond_dim(cand + window):
            start = cand
            break
        window -= 1
    if start is None:
        return CorrelationLengthResult(0.0, 0.0, window)
    tensors = [state.b_tensor(s).to_dense() for s in range(start, start + window)]
    chi = tensors[0].shape[0]
    if chi < 2:
        return CorrelationLengthResult(0.0, 0.0, window)

    def apply(vec: np.ndarray) -> np.ndarray:
        m = vec.reshape(chi, chi)
        for b in tensors:
            m = np.einsum("ab,asx,bsy->xy", m, b, b, optimize=True)
        return m.reshape(-1)

    n = chi * chi
    if n <= 400:
        mat = np.empty((n, n))
        basis = np.eye(n)
        for k in range(n):
            mat[:, k] = apply(basis[k])
        evals = np.linalg.eigvals(mat)
    else:
        op = scipy.sparse.linalg.LinearOperator((n, n), matvec=apply)
        evals = scipy.sparse.linalg.eigs(
            op, k=2, which="LM", return_eigenvectors=False, maxiter=2000
        )
    mags = np.sort(np.abs(evals))[::-1]
    if mags[0] <= 0.0:
        return CorrelationLengthResult(0.0, 0.0, window)
    mu2 = float(mags[1] / mags[0]) if mags.size > 1 else 0.0
    mu2 = min(max(mu2, 0.0), 1.0 - 1e-15)
    xi = 0.0 if mu2 == 0.0 else float(-window / np.log(mu2))
    return CorrelationLengthResult(xi, mu2, window)


# ----------------------------------------------------------------------
# bundled measurement of everything the pipeline consumes
# ----------------------------------------------------------------------


@dataclass
class ObservableSet:
    """All scalar and profile observables of one converged ground state.

    Order parameters average the correlation matrices with ``margin`` sites
    cut from each open edge (default L // 8) to suppress boundary effects;
    the full matrices are kept alongside.
    """

    params: ModelParams
    margin: int
    order_sf: float
    order_dw: float
    order_hi: float
    density: np.ndarray
    entropy_profile: np.ndarray
    central_entropy: float
    structure_factor: float
    k_star: float
    xi: float
    corr_sf: np.ndarray = field(repr=False, default=None)
    corr_dw: np.ndarray = field(repr=False, default=None)
    corr_hi: np.ndarray = field(repr=False, default=None)


def compute_observables(
    state: MPSState,
    params: ModelParams,
    margin: int | None = None,
    xi_window: int = 8,
) -> ObservableSet:
    """Measure the full observable bundle on a canonical state."""
    L = state.length
    if params.L != L:
        raise DomainError("params and state disagree on the chain length")
    if margin is None:
        margin = L // 8
    ops = BosonOps(params.n_max)

    density = np.array([state.expect_local(i, ops.number) for i in range(L)])
    entropies = np.array(
        [entanglement_entropy(state.schmidt_spectrum(b)) for b in range(L + 1)]
    )
    corr = {k: correlator_matrix(state, k) for k in CORRELATOR_KINDS}
    orders = {k: order_parameter(trim_margin(corr[k], margin)) for k in CORRELATOR_KINDS}
    sf_peak, k_star = structure_factor(density)
    xi = correlation_length(state, window=min(xi_window, L)).xi

    return ObservableSet(
        params=params,
        margin=margin,
        order_sf=orders["sf"],
        order_dw=orders["dw"],
        order_hi=orders["hi"],
        density=density,
        entropy_profile=entropies,
        central_entropy=float(entropies[L // 2]),
        structure_factor=sf_peak,
        k_star=k_star,
        xi=xi,
        corr_sf=corr["sf"],
        corr_dw=corr["dw"],
        corr_hi=corr["hi"],
    )
