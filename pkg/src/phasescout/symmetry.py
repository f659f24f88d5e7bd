"""Charge-conserving block-sparse tensors for a single abelian U(1) symmetry.

Every tensor leg carries a list of integer charge sectors. A block is stored
only for index combinations whose directed charges sum to the tensor's total
charge, so particle-number conservation is a structural property rather than
a numerical accident. Conventions used throughout the package:

* physical legs carry the local occupation number as charge, direction +1,
* virtual legs carry the cumulative particle number to their left; the leg
  pointing out of a tensor to the right has direction -1, the matching leg
  of the next tensor has direction +1,
* a tensor is allowed to hold a nonzero block for sectors ``(q_1, ..., q_r)``
  only if ``sum_k direction_k * q_k == total``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DegenerateTensorError, DomainError

Sector = tuple[int, ...]


@dataclass(frozen=True)
class ChargeLeg:
    """One tensor leg: charge sectors, their dimensions, and a direction.

    ``charges`` must be strictly increasing so that a sector is addressed by
    its position and dense embeddings have a unique layout. ``direction`` is
    +1 for incoming (row-like) and -1 for outgoing (column-like) legs.
    """

    charges: tuple[int, ...]
    degs: tuple[int, ...]
    direction: int

    def __post_init__(self) -> None:
        if self.direction not in (-1, +1):
            raise DomainError(f"leg direction must be +1 or -1, got {self.direction}")
        if len(self.charges) != len(self.degs):
            raise DomainError("charges and degeneracies differ in length")
        if len(self.charges) == 0:
            raise DomainError("a leg needs at least one charge sector")
        if any(d <= 0 for d in self.degs):
            raise DomainError("sector dimensions must be positive")
        if any(a >= b for a, b in zip(self.charges, self.charges[1:])):
            raise DomainError("leg charges must be strictly increasing")

    @property
    def dim(self) -> int:
        return int(sum(self.degs))

    @property
    def nsectors(self) -> int:
        return len(self.charges)

    def dual(self) -> "ChargeLeg":
        """The same leg seen from the other side (direction flipped)."""
        return ChargeLeg(self.charges, self.degs, -self.direction)

    def offsets(self) -> tuple[int, ...]:
        """Start offset of each sector in the dense embedding of this leg."""
        out = [0]
        for d in self.degs[:-1]:
            out.append(out[-1] + d)
        return tuple(out)

    def sector_of_charge(self, charge: int) -> int:
        """Index of the sector holding ``charge``; DomainError if absent."""
        lo = int(np.searchsorted(self.charges, charge))
        if lo >= len(self.charges) or self.charges[lo] != charge:
            raise DomainError(f"charge {charge} not present on leg {self.charges}")
        return lo

    def compatible(self, other: "ChargeLeg") -> bool:
        """Whether ``other`` can be contracted against this leg."""
        return (
            self.charges == other.charges
            and self.degs == other.degs
            and self.direction == -other.direction
        )


def leg_of_counts(counts: dict[int, int], direction: int) -> ChargeLeg:
    """Build a leg from a charge -> dimension mapping, sorted by charge."""
    charges = tuple(sorted(counts))
    return ChargeLeg(charges, tuple(counts[q] for q in charges), direction)


class BlockTensor:
    """A dense-block sparse tensor with one conserved U(1) charge.

    Blocks are keyed by a tuple of sector indices, one per leg, and stored as
    plain float64 arrays. Missing blocks are implicitly zero. Only sectors
    satisfying the charge rule may be present.
    """

    __slots__ = ("legs", "total", "blocks")

    def __init__(
        self,
        legs: Sequence[ChargeLeg],
        total: int,
        blocks: dict[Sector, np.ndarray] | None = None,
    ) -> None:
        self.legs = tuple(legs)
        self.total = int(total)
        self.blocks: dict[Sector, np.ndarray] = {}
        if blocks:
            for sectors, data in blocks.items():
                self.set_block(sectors, data)

    # ------------------------------------------------------------------
    # structure
    # ------------------------------------------------------------------

    @property
    def ndim(self) -> int:
        return len(self.legs)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(leg.dim for leg in self.legs)

    def sector_charge(self, sectors: Sector) -> int:
        return sum(
            leg.direction * leg.charges[s] for leg, s in zip(self.legs, sectors)
        )

    def is_allowed(self, sectors: Sector) -> bool:
        return self.sector_charge(sectors) == self.total

    def block_shape(self, sectors: Sector) -> tuple[int, ...]:
        return tuple(leg.degs[s] for leg, s in zip(self.legs, sectors))

    def allowed_sectors(self) -> Iterator[Sector]:
        """All sector combinations permitted by the charge rule.

        Enumerates the first ndim-1 legs and solves for the last, which keeps
        the cost linear in the number of allowed (rather than all) combos.
        """
        if self.ndim == 0:
            return
        last = self.legs[-1]
        heads: list[Sector] = [()]
        for leg in self.legs[:-1]:
            heads = [h + (s,) for h in heads for s in range(leg.nsectors)]
        for head in heads:
            partial = sum(
                leg.direction * leg.charges[s] for leg, s in zip(self.legs, head)
            )
            want = last.direction * (self.total - partial)
            lo = int(np.searchsorted(last.charges, want))
            if lo < last.nsectors and last.charges[lo] == want:
                yield head + (lo,)

    def set_block(self, sectors: Sector, data: np.ndarray) -> None:
        sectors = tuple(int(s) for s in sectors)
        if len(sectors) != self.ndim:
            raise DomainError("sector key rank does not match tensor rank")
        if not self.is_allowed(sectors):
            raise DomainError(
                f"sectors {sectors} violate charge conservation (total {self.total})"
            )
        expect = self.block_shape(sectors)
        data = np.ascontiguousarray(data, dtype=np.float64)
        if data.shape != expect:
            raise DomainError(f"block shape {data.shape} != sector shape {expect}")
        self.blocks[sectors] = data

    # ------------------------------------------------------------------
    # elementwise / reshaping
    # ------------------------------------------------------------------

    def copy(self) -> "BlockTensor":
        out = BlockTensor(self.legs, self.total)
        out.blocks = {k: v.copy() for k, v in self.blocks.items()}
        return out

    def scale(self, factor: float) -> "BlockTensor":
        out = BlockTensor(self.legs, self.total)
        out.blocks = {k: v * factor for k, v in self.blocks.items()}
        return out

    def conj(self) -> "BlockTensor":
        """Dual tensor: directions and total flip, data unchanged (real)."""
        out = BlockTensor([leg.dual() for leg in self.legs], -self.total)
        out.blocks = {k: v.copy() for k, v in self.blocks.items()}
        return out

    def transpose(self, perm: Sequence[int]) -> "BlockTensor":
        perm = tuple(perm)
        if sorted(perm) != list(range(self.ndim)):
            raise DomainError(f"bad permutation {perm} for rank {self.ndim}")
        out = BlockTensor([self.legs[p] for p in perm], self.total)
        out.blocks = {
            tuple(k[p] for p in perm): np.ascontiguousarray(np.transpose(v, perm))
            for k, v in self.blocks.items()
        }
        return out

    def scale_axis(self, axis: int, weights: Sequence[np.ndarray]) -> "BlockTensor":
        """Multiply along ``axis`` by per-sector weight vectors.

        ``weights[s]`` must have length ``legs[axis].degs[s]``. Used to absorb
        and remove bond Schmidt coefficients.
        """
        leg = self.legs[axis]
        if len(weights) != leg.nsectors:
            raise DomainError("one weight vector per sector is required")
        out = BlockTensor(self.legs, self.total)
        for sectors, data in self.blocks.items():
            w = weights[sectors[axis]]
            shape = [1] * self.ndim
            shape[axis] = -1
            out.blocks[sectors] = data * np.asarray(w, dtype=np.float64).reshape(shape)
        return out

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.vdot(b, b)) for b in self.blocks.values())))

    # ------------------------------------------------------------------
    # dense round trip
    # ------------------------------------------------------------------

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        offs = [leg.offsets() for leg in self.legs]
        for sectors, data in self.blocks.items():
            index = tuple(
                slice(offs[a][s], offs[a][s] + self.legs[a].degs[s])
                for a, s in enumerate(sectors)
            )
            out[index] = data
        return out

    @classmethod
    def from_dense(
        cls,
        data: np.ndarray,
        legs: Sequence[ChargeLeg],
        total: int,
        check_tol: float | None = None,
    ) -> "BlockTensor":
        """Slice the allowed blocks out of a dense array.

        Entries outside allowed blocks are dropped; with ``check_tol`` set,
        any such entry larger than the tolerance raises DomainError instead.
        """
        out = cls(legs, total)
        if data.shape != out.shape:
            raise DomainError(f"dense shape {data.shape} != legs shape {out.shape}")
        offs = [leg.offsets() for leg in legs]
        captured = 0.0
        for sectors in out.allowed_sectors():
            index = tuple(
                slice(offs[a][s], offs[a][s] + legs[a].degs[s])
                for a, s in enumerate(sectors)
            )
            block = np.ascontiguousarray(data[index], dtype=np.float64)
            if np.any(block):
                out.blocks[sectors] = block
                if check_tol is not None:
                    captured += float(np.vdot(block, block))
        if check_tol is not None:
            leak = float(np.vdot(data, data)) - captured
            if leak > check_tol**2:
                raise DomainError(
                    f"dense data has weight {leak:.3e} outside allowed blocks"
                )
        return out


def tensordot(a: BlockTensor, b: BlockTensor, axes) -> BlockTensor:
    """Contract blocks of ``a`` against ``b`` over the given axis pairs.

    Mirrors ``np.tensordot(a, b, axes=(ax_a, ax_b))``; contracted legs must
    be mutually dual (same charges and dimensions, opposite directions).
    """
    ax_a, ax_b = axes
    ax_a = [ax_a] if isinstance(ax_a, int) else list(ax_a)
    ax_b = [ax_b] if isinstance(ax_b, int) else list(ax_b)
    if len(ax_a) != len(ax_b):
        raise DomainError("axis lists differ in length")
    for i, j in zip(ax_a, ax_b):
        if not a.legs[i].compatible(b.legs[j]):
            raise DomainError(f"legs a[{i}] and b[{j}] are not contractible")

    keep_a = [i for i in range(a.ndim) if i not in ax_a]
    keep_b = [j for j in range(b.ndim) if j not in ax_b]
    out = BlockTensor(
        [a.legs[i] for i in keep_a] + [b.legs[j] for j in keep_b],
        a.total + b.total,
    )

    by_contract: dict[Sector, list[Sector]] = {}
    for sec_b in b.blocks:
        by_contract.setdefault(tuple(sec_b[j] for j in ax_b), []).append(sec_b)

    for sec_a, blk_a in a.blocks.items():
        key = tuple(sec_a[i] for i in ax_a)
        for sec_b in by_contract.get(key, ()):
            res = np.tensordot(blk_a, b.blocks[sec_b], axes=(ax_a, ax_b))
            sec_out = tuple(sec_a[i] for i in keep_a) + tuple(
                sec_b[j] for j in keep_b
            )
            if sec_out in out.blocks:
                out.blocks[sec_out] += res
            else:
                out.blocks[sec_out] = res
    return out


@dataclass
class SplitResult:
    """Outcome of a charge-resolved SVD split of a tensor across a bond.

    ``left`` has the row legs plus a new bond leg (direction -1, total 0);
    ``right`` has the matching dual bond leg (direction +1) plus the column
    legs and inherits the input's total charge. ``weights[s]`` are the kept
    singular values of bond sector ``s`` in descending order, normalized so
    that the squares over all sectors sum to one. ``discarded`` is the total
    squared weight removed by truncation, measured before renormalization.
    """

    left: BlockTensor
    right: BlockTensor
    bond: ChargeLeg
    weights: list[np.ndarray]
    discarded: float


def split_svd(
    t: BlockTensor,
    nrow: int,
    chi_max: int | None = None,
    sv_min: float = 0.0,
    rel_floor: float = 0.0,
    degeneracy_slack: int = 4,
    degeneracy_rtol: float = 1e-12,
    renormalize: bool = True,
) -> SplitResult:
    """Singular value decomposition across the cut after leg ``nrow``.

    The tensor is grouped by row charge, each charge group is decomposed
    independently, and the kept set is chosen globally: values below
    ``sv_min`` (or below ``rel_floor`` times the largest value) go first,
    then the largest ``chi_max`` survive. If the truncation boundary cuts
    through a degenerate multiplet (values equal within ``degeneracy_rtol``
    relative to the largest), the whole multiplet is kept as long as that
    stays within ``chi_max + degeneracy_slack``; otherwise the tie is broken
    deterministically by (sector charge, position within the sector).
    """
    if not 0 < nrow < t.ndim:
        raise DomainError(f"nrow must split the {t.ndim} legs in two, got {nrow}")
    if not t.blocks:
        raise DegenerateTensorError("cannot split an identically zero tensor")

    row_legs = t.legs[:nrow]
    col_legs = t.legs[nrow:]

    # Group blocks by the charge flowing through the cut.
    groups: dict[int, list[Sector]] = {}
    for sectors in t.blocks:
        q = sum(
            leg.direction * leg.charges[s] for leg, s in zip(row_legs, sectors[:nrow])
        )
        groups.setdefault(q, []).append(sectors)

    # Per-group dense matrices and their SVDs.
    entries: list[tuple[float, int, int]] = []  # (value, bond charge, index in group)
    svd_u: dict[int, np.ndarray] = {}
    svd_s: dict[int, np.ndarray] = {}
    svd_vh: dict[int, np.ndarray] = {}
    row_layout: dict[int, dict[Sector, tuple[int, int]]] = {}
    col_layout: dict[int, dict[Sector, tuple[int, int]]] = {}

    for q, members in groups.items():
        rows = sorted({m[:nrow] for m in members})
        cols = sorted({m[nrow:] for m in members})
        rl: dict[Sector, tuple[int, int]] = {}
        off = 0
        for r in rows:
            size = int(np.prod([leg.degs[s] for leg, s in zip(row_legs, r)]))
            rl[r] = (off, size)
            off += size
        nrows_q = off
        cl: dict[Sector, tuple[int, int]] = {}
        off = 0
        for c in cols:
            size = int(np.prod([leg.degs[s] for leg, s in zip(col_legs, c)]))
            cl[c] = (off, size)
            off += size
        ncols_q = off

        mat = np.zeros((nrows_q, ncols_q), dtype=np.float64)
        for m in members:
            ro, rs = rl[m[:nrow]]
            co, cs = cl[m[nrow:]]
            mat[ro : ro + rs, co : co + cs] = t.blocks[m].reshape(rs, cs)

        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        svd_u[q], svd_s[q], svd_vh[q] = u, s, vh
        row_layout[q], col_layout[q] = rl, cl
        for k, val in enumerate(s):
            entries.append((float(val), q, k))

    if not entries:
        raise DegenerateTensorError("no singular values found")

    total_weight = sum(v * v for v, _, _ in entries)
    if total_weight <= 0.0:
        raise DegenerateTensorError("tensor norm is zero")
    vmax = max(v for v, _, _ in entries)

    floor = max(sv_min, rel_floor * vmax)
    alive = [e for e in entries if e[0] >= floor and e[0] > 0.0]
    if not alive:
        raise DegenerateTensorError(
            f"all singular values fall below the floor {floor:.3e}"
        )
    # Sort by value descending, ties by (charge, index in sector) so that the
    # kept set is independent of dict iteration order.
    alive.sort(key=lambda e: (-e[0], e[1], e[2]))

    if chi_max is not None and len(alive) > chi_max:
        edge = alive[chi_max - 1][0]
        tol = degeneracy_rtol * vmax
        hi = chi_max
        while hi < len(alive) and abs(alive[hi][0] - edge) <= tol:
            hi += 1
        if hi <= chi_max + degeneracy_slack:
            kept = alive[:hi]
        else:
            kept = alive[:chi_max]
    else:
        kept = alive

    kept_weight = sum(v * v for v, _, _ in kept)
    discarded = max(total_weight - kept_weight, 0.0)
    scale = 1.0 / np.sqrt(kept_weight) if renormalize else 1.0

    # Assemble the new bond leg, charges ascending, values descending inside
    # each sector (the order the per-group SVD already provides).
    kept_by_q: dict[int, list[int]] = {}
    for _, q, k in kept:
        kept_by_q.setdefault(q, []).append(k)
    bond_charges = tuple(sorted(kept_by_q))
    for q in bond_charges:
        kept_by_q[q].sort()
    bond_degs = tuple(len(kept_by_q[q]) for q in bond_charges)
    bond = ChargeLeg(bond_charges, bond_degs, -1)

    weights = [
        svd_s[q][kept_by_q[q]] * scale for q in bond_charges
    ]

    left = BlockTensor(list(row_legs) + [bond], 0)
    right = BlockTensor([bond.dual()] + list(col_legs), t.total)
    for bsec, q in enumerate(bond_charges):
        picks = kept_by_q[q]
        u_sel = svd_u[q][:, picks]
        vh_sel = svd_vh[q][picks, :]
        for rsec, (ro, rs) in row_layout[q].items():
            blk = u_sel[ro : ro + rs, :]
            if np.any(blk):
                shape = tuple(
                    leg.degs[s] for leg, s in zip(row_legs, rsec)
                ) + (len(picks),)
                left.blocks[rsec + (bsec,)] = np.ascontiguousarray(
                    blk.reshape(shape)
                )
        for csec, (co, cs) in col_layout[q].items():
            blk = vh_sel[:, co : co + cs]
            if np.any(blk):
                shape = (len(picks),) + tuple(
                    leg.degs[s] for leg, s in zip(col_legs, csec)
                )
                right.blocks[(bsec,) + csec] = np.ascontiguousarray(
                    blk.reshape(shape)
                )
    return SplitResult(left, right, bond, weights, discarded)


def random_allowed(
    legs: Sequence[ChargeLeg], total: int, rng: np.random.Generator
) -> BlockTensor:
    """Gaussian entries in every allowed block; zero elsewhere."""
    out = BlockTensor(legs, total)
    for sectors in out.allowed_sectors():
        out.blocks[sectors] = rng.standard_normal(out.block_shape(sectors))
    if not out.blocks:
        raise DomainError(
            f"no sector combination on these legs reaches total charge {total}"
        )
    return out
