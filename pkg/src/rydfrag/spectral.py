"""Spectral diagnostics: eigensolves, gap-ratio statistics, entanglement.

Entropies are in nats throughout.  Gap-ratio conventions: r_n is the
min/max ratio of adjacent spacings; approximately 0.386 for uncorrelated
(Poisson) levels and 0.53 for the Gaussian orthogonal ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigvalsh, svdvals

from .errors import ResourceError, SolverError
from .model import HamiltonianMatrix

DENSE_LIMIT = 32_000
DEGENERACY_MERGE = 1e-12
DEFAULT_MID_WINDOW = 50


@dataclass
class EigenData:
    """Ascending eigenvalues with optional orthonormal eigenvectors.

    For windowed solves `energies` holds only the requested levels while
    (e_min, e_max) keep the global spectral edges so energy densities
    remain well defined.
    """

    energies: np.ndarray
    vectors: np.ndarray | None
    e_min: float
    e_max: float

    @property
    def dimension(self) -> int:
        return len(self.energies)

    @property
    def energy_density(self) -> np.ndarray:
        """(E - E_min)/(E_max - E_min); zeros for a degenerate span."""
        width = self.e_max - self.e_min
        if width <= 0:
            return np.zeros_like(self.energies)
        return (self.energies - self.e_min) / width


def _mid_window_slice(energies: np.ndarray, count: int) -> slice:
    """Contiguous block of `count` levels nearest the spectral midpoint.

    The worst member of a sorted window sits at one of its ends, so the
    optimal window minimizes max(|E[lo]-mid|, |E[lo+count-1]-mid|).
    """
    count = min(count, len(energies))
    mid = 0.5 * (energies[0] + energies[-1])
    lo_cost = np.abs(energies[: len(energies) - count + 1] - mid)
    hi_cost = np.abs(energies[count - 1 :] - mid)
    best = int(np.argmin(np.maximum(lo_cost, hi_cost)))
    return slice(best, best + count)


def diagonalize(
    h: HamiltonianMatrix,
    window: str | int = "full",
    compute_vectors: bool = True,
) -> EigenData:
    """Full spectrum, or the `window` eigenpairs nearest the midpoint.

    Dense solves are used up to DENSE_LIMIT states.  Windowed solves on
    larger matrices use shift-invert Lanczos around the spectral midpoint.
    """
    n = h.dimension
    if n <= DENSE_LIMIT:
        dense = h.to_dense()
        if compute_vectors:
            energies, vectors = eigh(dense)
        else:
            energies, vectors = eigvalsh(dense), None
        data = EigenData(energies, vectors, float(energies[0]), float(energies[-1]))
        if window == "full":
            return data
        sel = _mid_window_slice(energies, int(window))
        return EigenData(
            energies[sel],
            vectors[:, sel] if vectors is not None else None,
            data.e_min,
            data.e_max,
        )
    if window == "full":
        raise ResourceError(
            f"full dense spectrum capped at {DENSE_LIMIT} states, got {n}"
        )
    from scipy.sparse.linalg import ArpackNoConvergence, eigsh

    try:
        lo = eigsh(h.matrix, k=1, which="SA", return_eigenvectors=False)[0]
        hi = eigsh(h.matrix, k=1, which="LA", return_eigenvectors=False)[0]
        mid = 0.5 * (lo + hi)
        if compute_vectors:
            energies, vectors = eigsh(h.matrix, k=int(window), sigma=mid)
            order = np.argsort(energies)
            energies, vectors = energies[order], vectors[:, order]
        else:
            energies = np.sort(
                eigsh(h.matrix, k=int(window), sigma=mid, return_eigenvectors=False)
            )
            vectors = None
    except ArpackNoConvergence as exc:
        raise SolverError(
            f"interior eigensolve did not converge: {exc}"
        ) from exc
    return EigenData(energies, vectors, float(lo), float(hi))


# ---------------------------------------------------------------------------
# level statistics
# ---------------------------------------------------------------------------

@dataclass
class RStatistics:
    mean_r: float
    r_values: np.ndarray
    spacings: np.ndarray          # divided by the window-mean spacing
    n_levels: int
    n_merged: int                 # exact degeneracies merged away

    def r_histogram(self, bins: int = 40):
        density, edges = np.histogram(self.r_values, bins=bins, range=(0, 1), density=True)
        return edges, density

    def spacing_histogram(self, bins: int = 40, s_max: float = 4.0):
        """True PDF values on [0, s_max]: tail weight beyond s_max is not
        renormalized into the window."""
        counts, edges = np.histogram(self.spacings, bins=bins, range=(0.0, s_max))
        width = edges[1] - edges[0]
        return edges, counts / (len(self.spacings) * width)


def merge_degeneracies(
    energies: np.ndarray, threshold: float = DEGENERACY_MERGE
) -> tuple[np.ndarray, int]:
    """Collapse levels closer than `threshold` into one; report the count."""
    energies = np.sort(np.asarray(energies, dtype=float))
    keep = np.empty(len(energies), dtype=bool)
    keep[0] = True
    np.greater(np.diff(energies), threshold, out=keep[1:])
    return energies[keep], int((~keep).sum())


def r_statistics(
    energies: np.ndarray,
    window: str | int = "full",
    degeneracy_threshold: float = DEGENERACY_MERGE,
) -> RStatistics:
    """Adjacent-gap ratios r_n = min(s_n, s_n+1)/max(s_n, s_n+1).

    Spacings are normalized by their mean within the analysis window (no
    polynomial unfolding; the ratio statistic is unfolding-free).
    """
    levels, merged = merge_degeneracies(energies, degeneracy_threshold)
    if window != "full":
        levels = levels[_mid_window_slice(levels, int(window))]
    if len(levels) < 3:
        raise ValueError(f"need at least 3 distinct levels, got {len(levels)}")
    s = np.diff(levels)
    r = np.minimum(s[1:], s[:-1]) / np.maximum(s[1:], s[:-1])
    return RStatistics(
        mean_r=float(r.mean()),
        r_values=r,
        spacings=s / s.mean(),
        n_levels=len(levels),
        n_merged=merged,
    )


def poisson_spacing_pdf(s: np.ndarray) -> np.ndarray:
    return np.exp(-s)


def goe_spacing_pdf(s: np.ndarray) -> np.ndarray:
    return (np.pi / 2.0) * s * np.exp(-np.pi * s**2 / 4.0)


POISSON_MEAN_R = 0.386
GOE_MEAN_R = 0.53


# ---------------------------------------------------------------------------
# entanglement entropy
# ---------------------------------------------------------------------------

class SchmidtCut:
    """Bipartition bookkeeping for states over an explicit bitstring basis.

    Groups basis patterns by their substring left of the cut; reusable
    across many states on the same (basis, cut).
    """

    def __init__(self, basis: np.ndarray, length: int, cut: int):
        if not 1 <= cut < length:
            raise ValueError(f"cut must satisfy 1 <= cut < L, got {cut}")
        basis = np.asarray(basis, dtype=np.int64)
        left = basis & ((1 << cut) - 1)
        right = basis >> cut
        self.length = length
        self.cut = cut
        _, self._left_idx = np.unique(left, return_inverse=True)
        _, self._right_idx = np.unique(right, return_inverse=True)
        self.n_left = int(self._left_idx.max()) + 1 if len(basis) else 0
        self.n_right = int(self._right_idx.max()) + 1 if len(basis) else 0

    def schmidt_values(self, amplitudes: np.ndarray) -> np.ndarray:
        m = np.zeros((self.n_left, self.n_right), dtype=complex)
        m[self._left_idx, self._right_idx] = amplitudes
        lam = svdvals(m) ** 2
        return lam[lam > 1e-300]

    def entropy(self, amplitudes: np.ndarray) -> float:
        lam = self.schmidt_values(amplitudes)
        return float(-(lam * np.log(lam)).sum())


def eigenstate_entropy(
    amplitudes: np.ndarray,
    basis: np.ndarray,
    length: int,
    cut: int,
    norm_tol: float = 1e-8,
) -> float:
    """Von Neumann entropy (nats) of a normalized state across `cut`.

    The state is given by its amplitudes over `basis`; the cut splits the
    chain after site `cut`.
    """
    amplitudes = np.asarray(amplitudes)
    norm = np.linalg.norm(amplitudes)
    if abs(norm - 1.0) > norm_tol:
        raise ValueError(f"state norm {norm} deviates from 1 beyond {norm_tol}")
    return SchmidtCut(basis, length, cut).entropy(amplitudes)
