"""Sector-restricted exact diagonalization, used as an independent oracle.

Everything here works on the explicit occupation basis of a fixed particle
number, so it shares no code path with the tensor-network engine. Intended
for small chains only; the basis is capped at 200000 states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import DomainError
from .model import ModelParams

DIM_CAP = 200_000


def sector_basis(L: int, N: int, n_max: int) -> np.ndarray:
    """All occupation vectors of length L with sum N and entries <= n_max.

    Returned as an int8 array of shape (dim, L) in lexicographic order.
    """
    if N < 0 or N > L * n_max:
        raise DomainError(f"no states with {N} particles on {L} sites")
    rows: list[list[int]] = []

    def grow(prefix: list[int], left: int) -> None:
        sites_left = L - len(prefix)
        if sites_left == 0:
            if left == 0:
                rows.append(prefix.copy())
            return
        lo = max(0, left - (sites_left - 1) * n_max)
        hi = min(n_max, left)
        for n in range(lo, hi + 1):
            prefix.append(n)
            grow(prefix, left - n)
            prefix.pop()
        if len(rows) > DIM_CAP:
            raise DomainError(f"sector dimension exceeds the cap of {DIM_CAP}")

    grow([], N)
    return np.array(rows, dtype=np.int8)


def _index_map(basis: np.ndarray, n_max: int) -> dict[int, int]:
    keys = _encode(basis, n_max)
    return {int(k): i for i, k in enumerate(keys)}


def _encode(occ: np.ndarray, n_max: int) -> np.ndarray:
    weights = (n_max + 1) ** np.arange(occ.shape[-1], dtype=np.int64)
    return occ.astype(np.int64) @ weights


def ed_hamiltonian(params: ModelParams, N: int) -> tuple[scipy.sparse.csr_matrix, np.ndarray]:
    """Sparse Hamiltonian in the N-particle sector, plus its basis."""
    basis = sector_basis(params.L, N, params.n_max)
    dim = basis.shape[0]
    lookup = _index_map(basis, params.n_max)

    occ = basis.astype(np.float64)
    diag = 0.5 * params.U * np.sum(occ * (occ - 1.0), axis=1)
    diag += params.V * np.sum(occ[:, :-1] * occ[:, 1:], axis=1)

    rows = list(range(dim))
    cols = list(range(dim))
    vals = list(diag)
    if params.t != 0.0:
        for s in range(dim):
            state = basis[s]
            for i in range(params.L - 1):
                # b+_i b_{i+1} moves one boson left; the transpose is added
                # by symmetrization below.
                if state[i + 1] >= 1 and state[i] < params.n_max:
                    new = state.copy()
                    new[i] += 1
                    new[i + 1] -= 1
                    tgt = lookup[int(_encode(new, params.n_max))]
                    amp = -params.t * np.sqrt(
                        (state[i] + 1.0) * float(state[i + 1])
                    )
                    rows.append(tgt)
                    cols.append(s)
                    vals.append(amp)
                    rows.append(s)
                    cols.append(tgt)
                    vals.append(amp)
    h = scipy.sparse.coo_matrix(
        (vals, (rows, cols)), shape=(dim, dim), dtype=np.float64
    ).tocsr()
    return h, basis


@dataclass
class EDResult:
    """Ground state of one charge sector from exact diagonalization."""

    energy: float
    vector: np.ndarray
    basis: np.ndarray
    params: ModelParams
    n_particles: int


def ed_ground_state(params: ModelParams, N: int) -> EDResult:
    """Lowest eigenpair of the sector Hamiltonian.

    Dense diagonalization below dimension 400, Lanczos above; the start
    vector is fixed so repeated runs agree bitwise.
    """
    h, basis = ed_hamiltonian(params, N)
    dim = h.shape[0]
    if dim <= 400:
        evals, evecs = np.linalg.eigh(h.toarray())
        energy, vec = float(evals[0]), evecs[:, 0]
    else:
        v0 = np.full(dim, 1.0 / np.sqrt(dim))
        evals, evecs = scipy.sparse.linalg.eigsh(h, k=1, which="SA", v0=v0)
        energy, vec = float(evals[0]), evecs[:, 0]
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    return EDResult(energy, vec, basis, params, N)


def ed_density(res: EDResult) -> np.ndarray:
    """<n_i> site by site."""
    weights = res.vector**2
    return weights @ res.basis.astype(np.float64)


def ed_correlator(res: EDResult, kind: str) -> np.ndarray:
    """L x L correlation matrix, same conventions as the MPS measurements."""
    kind = kind.lower()
    occ = res.basis.astype(np.float64)
    dim, L = occ.shape
    w = res.vector**2
    filling = res.n_particles / L
    dn = occ - filling

    if kind == "dw":
        out = np.empty((L, L))
        for i in range(L):
            for j in range(L):
                sign = (-1.0) ** abs(i - j)
                out[i, j] = sign * np.sum(w * dn[:, i] * dn[:, j])
            out[i, i] = np.sum(w * dn[:, i] ** 2)
        return out

    if kind == "hi":
        if abs(filling - round(filling)) > 1e-12:
            raise DomainError("string correlator needs integer filling")
        phase = np.cos(np.pi * dn)
        out = np.empty((L, L))
        for i in range(L):
            for j in range(L):
                a, b = min(i, j), max(i, j)
                if a == b:
                    out[i, j] = np.sum(w * dn[:, i] ** 2)
                    continue
                string = np.prod(phase[:, a:b], axis=1)
                out[i, j] = np.sum(w * dn[:, a] * string * dn[:, b])
        return out

    if kind == "sf":
        lookup = _index_map(res.basis, res.params.n_max)
        n_max = res.params.n_max
        out = np.zeros((L, L))
        for i in range(L):
            out[i, i] = float(np.sum(w * occ[:, i]))
        for i in range(L):
            for j in range(L):
                if i == j:
                    continue
                acc = 0.0
                for s in range(dim):
                    ni, nj = res.basis[s, i], res.basis[s, j]
                    if nj >= 1 and ni < n_max:
                        new = res.basis[s].copy()
                        new[i] += 1
                        new[j] -= 1
                        tgt = lookup[int(_encode(new, n_max))]
                        acc += (
                            res.vector[tgt]
                            * res.vector[s]
                            * np.sqrt((ni + 1.0) * float(nj))
                        )
                out[i, j] = acc
        return out

    raise DomainError(f"unknown correlator kind {kind!r}")


def ed_matrix_element(res: EDResult, vector: np.ndarray) -> float:
    """<v| H |v> for an arbitrary dense sector vector (oracle helper)."""
    h, _ = ed_hamiltonian(res.params, res.n_particles)
    return float(vector @ (h @ vector))


def dense_sector_vector_from_full(full: np.ndarray, basis: np.ndarray, d: int) -> np.ndarray:
    """Project a full d^L vector onto the sector basis ordering."""
    L = basis.shape[1]
    if full.size != d**L:
        raise DomainError("full vector length does not match the chain")
    strides = d ** np.arange(L - 1, -1, -1, dtype=np.int64)
    idx = basis.astype(np.int64) @ strides
    return full[idx]
