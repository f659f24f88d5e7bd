"""Detector inputs extracted from cached ground-state records.

Three views of the same state feed the anomaly detector. The
entanglement spectrum of the central bond is the cheapest; the central
site tensor keeps phase information the spectrum discards; the
superfluid correlation matrix sees only two-point structure, which is
exactly what makes it blind to string order.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, RecordError
from .records import GroundStateRecord

INPUT_KINDS = ("es", "theta", "csf")


def input_shape(kind: str, chi_max: int, d: int, L: int) -> tuple[int, ...]:
    """Channel-leading array shape of one sample of the given kind."""
    if kind == "es":
        return (1, chi_max)
    if kind == "theta":
        return (d, chi_max, chi_max)
    if kind == "csf":
        return (L, L)
    raise DomainError(f"input kind must be one of {INPUT_KINDS}, got {kind!r}")


def extract_input(record: GroundStateRecord, kind: str, chi_max: int) -> np.ndarray:
    """One detector sample from a record, channel-leading float64.

    Spectra are zero-padded to ``chi_max``; the site tensor is embedded
    into a (d, chi_max, chi_max) image with one channel per occupation;
    the correlation matrix keeps its rows as channels and is scaled to
    unit maximum magnitude.
    """
    L = record.params.L
    d = record.params.n_max + 1
    if kind == "es":
        if not record.spectra:
            raise RecordError("record carries no bond spectra")
        values = record.spectra[L // 2]
        if values.size > chi_max:
            raise DomainError(
                f"spectrum of size {values.size} does not fit chi_max={chi_max}"
            )
        out = np.zeros((1, chi_max))
        out[0, : values.size] = values
        return out
    if kind == "theta":
        theta = record.central_theta
        if theta is None or theta.ndim != 3:
            raise RecordError("record carries no central site tensor")
        chi_l, dd, chi_r = theta.shape
        if dd != d:
            raise RecordError("central site tensor disagrees with the local dimension")
        if chi_l > chi_max or chi_r > chi_max:
            raise DomainError(
                f"site tensor bonds ({chi_l},{chi_r}) exceed chi_max={chi_max}"
            )
        out = np.zeros((d, chi_max, chi_max))
        out[:, :chi_l, :chi_r] = theta.transpose(1, 0, 2)
        return out
    if kind == "csf":
        corr = record.corr_sf
        if corr is None or corr.shape != (L, L):
            raise RecordError("record carries no superfluid correlation matrix")
        out = np.ascontiguousarray(corr, dtype=np.float64).copy()
        peak = float(np.max(np.abs(out)))
        if peak > 0.0:
            out /= peak
        return out
    raise DomainError(f"input kind must be one of {INPUT_KINDS}, got {kind!r}")
