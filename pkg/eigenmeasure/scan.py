# scan.py
"""
Vectorised stratum scans over packed matrix rows.

A group reduction is an (N, 4) int64 array of row-major residues mod ell**prec.
For each row the scan records the identity depth a (largest k <= prec with
M = I mod ell**k) and the valuation of det(M - I), exact or only bounded below.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .config import ENGINE_CONFIG
from .errors import ResourceError

IDENTITY_ROW = np.array([1, 0, 0, 1], dtype=np.int64)

# products of two residues must fit in int64
MAX_SCAN_MODULUS = 1 << 30


def vp_array(values: np.ndarray, ell: int, cap) -> np.ndarray:
    """Elementwise ell-adic valuation of residues; zero residues get `cap`."""
    values = np.asarray(values, dtype=np.int64)
    cap = np.broadcast_to(np.asarray(cap, dtype=np.int64), values.shape)
    out = np.zeros(values.shape, dtype=np.int64)
    rest = values.copy()
    live = rest != 0
    while live.any():
        live &= rest % ell == 0
        out[live] += 1
        rest[live] //= ell
    return np.where(values == 0, cap, np.minimum(out, cap))


@dataclass(frozen=True)
class Strata:
    depth: np.ndarray   # identity depth a
    det: np.ndarray     # valuation of det(M - I), or its lower bound where not exact
    exact: np.ndarray   # bool

    def count(self, a: int, b: int) -> int:
        """Rows whose kernel shape is determined and equal to (a, b)."""
        return int(np.count_nonzero(self.exact & (self.depth == a) & (self.det == 2 * a + b)))

    def undetermined_count(self, a: int) -> int:
        """Rows of depth a whose determinant vanishes to the full known precision."""
        return int(np.count_nonzero(~self.exact & (self.depth == a)))

    def mask(self, a: int, b: int) -> np.ndarray:
        return self.exact & (self.depth == a) & (self.det == 2 * a + b)

    def __len__(self) -> int:
        return int(self.depth.shape[0])


def _check_modulus(ell: int, prec: int):
    if ell ** prec > MAX_SCAN_MODULUS:
        raise ResourceError("modulus too large for a vectorised scan", modulus_exp=prec)


def identity_depth_rows(rows: np.ndarray, ell: int, prec: int) -> np.ndarray:
    q = ell ** prec
    diff = (rows - IDENTITY_ROW) % q
    return vp_array(diff, ell, prec).min(axis=1)


def _scan_chunk(rows: np.ndarray, ell: int, prec: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    q = ell ** prec
    diff = (rows - IDENTITY_ROW) % q
    depth = vp_array(diff, ell, prec).min(axis=1)
    inner = diff // np.power(ell, depth)[:, None]
    known = prec - depth
    mod = np.power(ell, known)
    det_inner = (inner[:, 0] * inner[:, 3] - inner[:, 1] * inner[:, 2]) % mod
    v = vp_array(det_inner, ell, known)
    return depth, 2 * depth + v, v < known


def _fan_out(func, rows: np.ndarray, jobs: Optional[int]):
    jobs = jobs or ENGINE_CONFIG['jobs']
    step = ENGINE_CONFIG['chunk_rows']
    pieces = [rows[i:i + step] for i in range(0, len(rows), step)] or [rows]
    if jobs > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, pieces))
    return [func(piece) for piece in pieces]


def scan_strata(rows: np.ndarray, ell: int, prec: int, jobs: Optional[int] = None) -> Strata:
    """Scan every row; det(M - I) is known mod ell**(a + prec)."""
    _check_modulus(ell, prec)
    parts = _fan_out(lambda piece: _scan_chunk(piece, ell, prec), rows, jobs)
    logging.debug(f"scanned {len(rows)} rows mod {ell}^{prec} in {len(parts)} chunk(s)")
    return Strata(*(np.concatenate([part[i] for part in parts]) for i in range(3)))


def _complement_chunk(rows: np.ndarray, d: int, prec: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    q1 = 2 ** (prec + 1)
    z = rows[:, 0]
    w = rows[:, 2]
    det = (1 - z * z + (d % q1) * (w * w % q1)) % q1
    depth = identity_depth_rows(rows, 2, prec)
    v = vp_array(det, 2, prec + 1)
    return depth, v, v < prec + 1


def scan_complement_two(rows: np.ndarray, d: int, prec: int, jobs: Optional[int] = None) -> Strata:
    """
    Scan rows (z, -d*w; w, -z) of a ramified normalizer at ell = 2.

    There det(M - I) = 1 - z^2 + d*w^2 is known mod 2**(prec + 1).
    """
    _check_modulus(2, prec + 1)
    parts = _fan_out(lambda piece: _complement_chunk(piece, d, prec), rows, jobs)
    return Strata(*(np.concatenate([part[i] for part in parts]) for i in range(3)))
