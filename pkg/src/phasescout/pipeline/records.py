"""Persistent ground-state records and the cache manifest.

One record file holds everything later stages consume: bond spectra,
the central site tensor, density and entropy profiles, correlation
matrices, and the convergence report. Re-training an anomaly detector
or switching input kinds therefore never re-runs DMRG.

Layout of a ``.gsr`` file, all little-endian:

    magic "EBHGS1", version u8, flags u8 (bit 0: converged),
    scalars (struct ``_HEAD``),
    bond-spectrum count u32 followed by that many arrays,
    seven fixed arrays (density, entropy profile, central theta,
    three correlation matrices, per-sweep energies),
    sha256 digest of every preceding byte.

Arrays are stored as u8 rank, u32 dims, float64 data. The digest makes
corruption detectable; writes go through a temp file and rename so a
crash never leaves a half-written record behind.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dmrg import DmrgResult
from ..errors import RecordError
from ..model import ModelParams, compute_observables

MAGIC = b"EBHGS1"
VERSION = 1

# t, U, V f8 | L, n_max, N u32 | energy f8 | sweeps u32 | max_discarded f8
# | max_bond, margin u32 | order_sf, order_dw, order_hi, central_entropy,
# structure, k_star, xi f8
_HEAD = struct.Struct("<3dIIIdIdII7d")


@dataclass
class GroundStateRecord:
    """Self-contained measurement bundle of one converged (or flagged) cell."""

    params: ModelParams
    n_particles: int
    energy: float
    converged: bool
    sweeps: int
    max_discarded: float
    max_bond: int
    margin: int
    order_sf: float
    order_dw: float
    order_hi: float
    central_entropy: float
    structure: float
    k_star: float
    xi: float
    spectra: list[np.ndarray]
    density: np.ndarray
    entropy_profile: np.ndarray
    central_theta: np.ndarray
    corr_sf: np.ndarray
    corr_dw: np.ndarray
    corr_hi: np.ndarray
    sweep_energies: np.ndarray


def cell_filename(iu: int, iv: int) -> str:
    return f"u{iu}_v{iv}.gsr"


def record_from_result(
    params: ModelParams,
    n_particles: int,
    result: DmrgResult,
    margin: int | None = None,
) -> GroundStateRecord:
    """Measure the full observable bundle on a finished DMRG run."""
    obs = compute_observables(result.state, params, margin=margin)
    L = params.L
    spectra = [
        result.state.schmidt_spectrum(b).values.copy() for b in range(L + 1)
    ]
    rep = result.report
    return GroundStateRecord(
        params=params,
        n_particles=n_particles,
        energy=result.energy,
        converged=rep.converged,
        sweeps=rep.sweeps,
        max_discarded=rep.max_discarded_weight,
        max_bond=rep.max_bond_dim,
        margin=obs.margin,
        order_sf=obs.order_sf,
        order_dw=obs.order_dw,
        order_hi=obs.order_hi,
        central_entropy=obs.central_entropy,
        structure=obs.structure_factor,
        k_star=obs.k_star,
        xi=obs.xi,
        spectra=spectra,
        density=obs.density,
        entropy_profile=obs.entropy_profile,
        central_theta=result.state.theta_dense(L // 2),
        corr_sf=obs.corr_sf,
        corr_dw=obs.corr_dw,
        corr_hi=obs.corr_hi,
        sweep_energies=np.asarray(rep.energies, dtype=np.float64),
    )


def _pack_array(parts: list[bytes], a: np.ndarray) -> None:
    a = np.ascontiguousarray(a, dtype=np.float64)
    parts.append(struct.pack("<B", a.ndim))
    parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
    parts.append(a.tobytes())


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise RecordError("record payload ends prematurely")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def array(self) -> np.ndarray:
        (ndim,) = struct.unpack("<B", self.take(1))
        shape = struct.unpack(f"<{ndim}I", self.take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(self.take(8 * count), dtype="<f8")
        return data.reshape(shape).copy()


def write_record(path: str | Path, record: GroundStateRecord) -> str:
    """Write atomically; returns the file's checksum (sha256 hex)."""
    p = record.params
    parts: list[bytes] = [
        MAGIC,
        struct.pack("<BB", VERSION, 1 if record.converged else 0),
        _HEAD.pack(
            p.t,
            p.U,
            p.V,
            p.L,
            p.n_max,
            record.n_particles,
            record.energy,
            record.sweeps,
            record.max_discarded,
            record.max_bond,
            record.margin,
            record.order_sf,
            record.order_dw,
            record.order_hi,
            record.central_entropy,
            record.structure,
            record.k_star,
            record.xi,
        ),
        struct.pack("<I", len(record.spectra)),
    ]
    for s in record.spectra:
        _pack_array(parts, s)
    for a in (
        record.density,
        record.entropy_profile,
        record.central_theta,
        record.corr_sf,
        record.corr_dw,
        record.corr_hi,
        record.sweep_energies,
    ):
        _pack_array(parts, a)
    body = b"".join(parts)
    blob = body + hashlib.sha256(body).digest()

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)
    return hashlib.sha256(blob).hexdigest()


def load_record(path: str | Path) -> GroundStateRecord:
    """Read and verify one record; any corruption raises RecordError."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise RecordError(f"cannot read record {path}: {exc}") from exc
    if len(blob) < len(MAGIC) + 2 + _HEAD.size + 32:
        raise RecordError(f"record {path} is too short to be valid")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise RecordError(f"record {path} fails its checksum")
    if body[: len(MAGIC)] != MAGIC:
        raise RecordError(f"record {path} has the wrong magic")
    r = _Reader(body)
    r.take(len(MAGIC))
    version, flags = struct.unpack("<BB", r.take(2))
    if version != VERSION:
        raise RecordError(f"record {path} has unsupported version {version}")
    head = _HEAD.unpack(r.take(_HEAD.size))
    (t, u, v, L, n_max, n_particles, energy, sweeps, max_discarded,
     max_bond, margin, o_sf, o_dw, o_hi, s_ent, s_struct, k_star, xi) = head
    (n_spectra,) = struct.unpack("<I", r.take(4))
    spectra = [r.array() for _ in range(n_spectra)]
    density = r.array()
    entropy_profile = r.array()
    central_theta = r.array()
    corr_sf = r.array()
    corr_dw = r.array()
    corr_hi = r.array()
    sweep_energies = r.array()
    if r.pos != len(body):
        raise RecordError(f"record {path} has trailing bytes after its payload")
    return GroundStateRecord(
        params=ModelParams(t=t, U=u, V=v, L=L, n_max=n_max),
        n_particles=n_particles,
        energy=energy,
        converged=bool(flags & 1),
        sweeps=sweeps,
        max_discarded=max_discarded,
        max_bond=max_bond,
        margin=margin,
        order_sf=o_sf,
        order_dw=o_dw,
        order_hi=o_hi,
        central_entropy=s_ent,
        structure=s_struct,
        k_star=k_star,
        xi=xi,
        spectra=spectra,
        density=density,
        entropy_profile=entropy_profile,
        central_theta=central_theta,
        corr_sf=corr_sf,
        corr_dw=corr_dw,
        corr_hi=corr_hi,
        sweep_energies=sweep_energies,
    )


def file_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class ManifestEntry:
    iu: int
    iv: int
    U: float
    V: float
    checksum: str
    converged: bool


def write_manifest(path: str | Path, entries: list[ManifestEntry]) -> None:
    lines = [
        f"{e.iu} {e.iv} {e.U!r} {e.V!r} {e.checksum} {int(e.converged)}"
        for e in sorted(entries, key=lambda e: (e.iu, e.iv))
    ]
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    entries = []
    for ln in Path(path).read_text().splitlines():
        if not ln.strip():
            continue
        iu, iv, u, v, checksum, conv = ln.split()
        entries.append(
            ManifestEntry(int(iu), int(iv), float(u), float(v), checksum, conv == "1")
        )
    return entries
