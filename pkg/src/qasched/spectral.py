"""Exact low-energy spectra of H(s) = (1-s) H_x + s H_I on an s-grid.

For each grid point the full spectrum is diagonalized, eigenvalues are
partitioned into degenerate clusters, and the profile records the gaps from
the ground cluster to the first m_max distinct excited clusters together with
the transition matrix elements of dH/ds = H_I - H_x between those clusters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import ising
from .errors import NumericalError

DEFAULT_M_MAX = 4
DEFAULT_GRID = 500
DEGENERACY_RTOL = 1e-8
DEGENERACY_FLOOR = 1e-10
HERMITICITY_TOL = 1e-12


def eigendecompose(hmat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns.

    Raises NumericalError when the input is not Hermitian to HERMITICITY_TOL
    relative to its magnitude.
    """
    hmat = np.asarray(hmat)
    scale = max(1.0, float(np.abs(hmat).max())) if hmat.size else 1.0
    if np.abs(hmat - hmat.conj().T).max() > HERMITICITY_TOL * scale:
        raise NumericalError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hmat)
    return w, v


def distinct_levels(eigenvalues: np.ndarray,
                    tolerance: float = DEGENERACY_RTOL,
                    floor: float = DEGENERACY_FLOOR) -> list[np.ndarray]:
    """Partition sorted eigenvalues into degenerate clusters.

    Consecutive eigenvalues share a cluster iff their difference is at most
    max(floor, tolerance * max(1, |E|)); clusters are returned as index
    arrays in ascending energy order.
    """
    w = np.asarray(eigenvalues, dtype=float)
    if w.size == 0:
        return []
    if np.any(np.diff(w) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    clusters = [[0]]
    for k in range(1, w.size):
        thresh = max(floor, tolerance * max(1.0, abs(w[k - 1]), abs(w[k])))
        if w[k] - w[k - 1] <= thresh:
            clusters[-1].append(k)
        else:
            clusters.append([k])
    return [np.asarray(c, dtype=int) for c in clusters]


@dataclass(frozen=True)
class SpectralProfile:
    """Gaps and transition matrix elements of an instance over the s-grid.

    gaps[k, m-1] is E_m - E_0 at s_grid[k] for the m-th distinct excited
    cluster (cluster-lowest eigenvalues), NaN when fewer clusters exist;
    matrix_elements[k, m-1] is the largest singular value of the cross-cluster
    block of (H_I - H_x), i.e. the supremum of |<w|dH/ds|v>| over unit vectors
    of the two clusters.  flags[k] marks grid points with fewer than m_max
    excited clusters.
    """

    s_grid: np.ndarray
    gaps: np.ndarray
    matrix_elements: np.ndarray
    flags: np.ndarray
    m_max: int
    degeneracy_tolerance: float

    @property
    def n_grid(self) -> int:
        return len(self.s_grid)

    @property
    def flagged_fraction(self) -> float:
        return float(np.mean(self.flags)) if len(self.flags) else 0.0


def gap_profile(instance: "ising.IsingInstance",
                m_max: int = DEFAULT_M_MAX,
                n_grid: int = DEFAULT_GRID,
                degeneracy_tol: float = DEGENERACY_RTOL,
                drop_free_spins: bool = True) -> SpectralProfile:
    """Diagonalize H(s) on n_grid equidistant points of [0, 1] inclusive.

    With drop_free_spins (default) spins carrying zero field and no nonzero
    coupling are removed from the Hilbert space first: they decouple exactly,
    and keeping them would inject a spurious excited level at gap 2(1-s)
    whose transition matrix element vanishes identically.
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    if n_grid < 2:
        raise ValueError("n_grid must be at least 2")
    if drop_free_spins:
        n, h, j = ising.reduced_couplings(instance)
    else:
        n, h, j = instance.n_spins, instance.h, instance.j
    hx = ising.driver_matrix(n)
    hi_diag = ising.problem_diagonal(h, j, n)
    dh = np.diag(hi_diag) - hx  # dH/ds, constant in s

    s_grid = np.linspace(0.0, 1.0, n_grid)
    gaps = np.full((n_grid, m_max), np.nan)
    matel = np.full((n_grid, m_max), np.nan)
    flags = np.zeros(n_grid, dtype=bool)

    for k, s in enumerate(s_grid):
        hmat = (1.0 - s) * hx
        hmat[np.diag_indices_from(hmat)] += s * hi_diag
        w, v = np.linalg.eigh(hmat)
        clusters = distinct_levels(w, degeneracy_tol)
        e0 = w[clusters[0][0]]
        v0 = v[:, clusters[0]]
        dh_v0 = dh @ v0
        available = min(m_max, len(clusters) - 1)
        for m in range(1, available + 1):
            idx = clusters[m]
            gaps[k, m - 1] = w[idx[0]] - e0
            block = v[:, idx].T @ dh_v0
            if block.size == 1:
                matel[k, m - 1] = abs(block[0, 0])
            else:
                matel[k, m - 1] = np.linalg.svd(block, compute_uv=False)[0]
        flags[k] = available < m_max

    for arr in (s_grid, gaps, matel, flags):
        arr.flags.writeable = False
    return SpectralProfile(s_grid, gaps, matel, flags, m_max, degeneracy_tol)


def numerator_bound(profile: SpectralProfile) -> float:
    """Instance-wide bound max over grid points and m of |<m|dH/ds|0>|."""
    if profile.matrix_elements.size == 0:
        raise ValueError("profile has no grid points")
    if np.all(np.isnan(profile.matrix_elements)):
        raise NumericalError("no excited cluster anywhere on the grid")
    return float(np.nanmax(profile.matrix_elements))


def profile_to_json(profile: SpectralProfile) -> str:
    """Rows of s, gaps, matrix elements, and flag per grid point (nulls where
    a cluster is missing)."""

    def row(a):
        return [None if np.isnan(x) else float(x) for x in a]

    obj = {
        "m_max": profile.m_max,
        "degeneracy_tolerance": profile.degeneracy_tolerance,
        "s": [float(s) for s in profile.s_grid],
        "gaps": [row(r) for r in profile.gaps],
        "matrix_elements": [row(r) for r in profile.matrix_elements],
        "flags": [bool(f) for f in profile.flags],
    }
    return json.dumps(obj)
