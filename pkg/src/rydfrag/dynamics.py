"""Quench evolution inside fragment or full bases, with observables.

Evolution uses an eigendecomposition up to DENSE_EVOLVE_LIMIT states and a
short-iterate Lanczos propagator beyond.  By construction a fragment-basis
propagation can never leave the fragment; unitarity and energy conservation
are monitored and reported on the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import SpinConfig, bit_columns
from .errors import SolverError
from .model import HamiltonianMatrix
from .spectral import SchmidtCut

DENSE_EVOLVE_LIMIT = 5000
PROPAGATION_TOL = 1e-8


def default_time_grid(points: int = 200, t_max: float = 40.0, t_min: float = 0.1) -> np.ndarray:
    """t = 0 followed by `points` log-spaced times in [t_min, t_max].

    Times are dimensionless; the caller fixes the unit via `time_scale`
    (1/J_P for the dressed model).
    """
    return np.concatenate([[0.0], np.geomspace(t_min, t_max, points)])


def imbalance_diagonal(
    basis: np.ndarray, length: int, initial: SpinConfig
) -> np.ndarray:
    """Diagonal of the initial-pattern memory operator over `basis`.

    I = sum_{i up at t=0} z_i/(2 N_up) - sum_{i down at t=0} z_i/(2 N_down),
    which is +1 on the initial configuration and -1 on its global flip.
    """
    n_up = initial.n_r
    n_down = length - n_up
    if n_up == 0 or n_down == 0:
        raise ValueError("imbalance needs at least one up and one down spin")
    init_bits = bit_columns(np.array([initial.bits]), length)[0]
    z = 2.0 * bit_columns(basis, length) - 1.0
    return (z @ init_bits) / (2.0 * n_up) - (z @ (1.0 - init_bits)) / (2.0 * n_down)


def imbalance(
    amplitudes: np.ndarray, basis: np.ndarray, length: int, initial: SpinConfig
) -> float:
    """Expectation of the initial-pattern memory operator in a pure state."""
    diag = imbalance_diagonal(basis, length, initial)
    weights = np.abs(np.asarray(amplitudes)) ** 2
    return float(weights @ diag)


def quantum_fisher(
    amplitudes: np.ndarray, basis: np.ndarray, length: int, initial: SpinConfig
) -> float:
    """Pure-state quantum Fisher information 4 [<I^2> - <I>^2] >= 0."""
    diag = imbalance_diagonal(basis, length, initial)
    weights = np.abs(np.asarray(amplitudes)) ** 2
    mean = weights @ diag
    return float(4.0 * max(weights @ diag**2 - mean**2, 0.0))


@dataclass
class QuenchResult:
    """Observables of one quench on a fixed time grid.

    `times` are in the unit chosen by the caller of `evolve` (1/J_P for
    dressed-model quenches); densities rows follow the grid.
    """

    times: np.ndarray
    densities: np.ndarray           # (T, L) local excitation densities
    imbalance: np.ndarray           # (T,)
    fisher: np.ndarray              # (T,)
    entropy: np.ndarray             # (T,) half-chain, nats
    initial: SpinConfig
    length: int
    norm_drift: float = 0.0
    energy_drift: float = 0.0
    extras: dict = field(default_factory=dict)


def _lanczos_step(matvec, psi: np.ndarray, dt: float, tol: float, m_max: int = 40):
    """One exp(-i H dt) application via a Lanczos subspace.

    Returns (new_psi, converged); the error estimate is the weight of the
    last subspace vector in the propagated small system.
    """
    from scipy.linalg import expm

    norm0 = np.linalg.norm(psi)
    v = psi / norm0
    vecs = [v]
    alphas, betas = [], []
    w = matvec(v)
    for j in range(m_max):
        a = np.vdot(vecs[-1], w).real
        alphas.append(a)
        w = w - a * vecs[-1]
        if len(vecs) > 1:
            w = w - betas[-1] * vecs[-2]
        b = np.linalg.norm(w)
        t = np.zeros((len(alphas), len(alphas)))
        t[np.diag_indices(len(alphas))] = alphas
        if betas:
            idx = np.arange(len(betas))
            t[idx, idx + 1] = betas
            t[idx + 1, idx] = betas
        small = expm(-1j * dt * t)[:, 0]
        if b < 1e-14 or (j >= 2 and abs(small[-1]) * abs(b * dt) < tol):
            out = sum(c * vec for c, vec in zip(small, vecs))
            return norm0 * out, True
        betas.append(b)
        vecs.append(w / b)
        w = matvec(vecs[-1])
    out = sum(c * vec for c, vec in zip(small, vecs[: len(small)]))
    return norm0 * out, False


def _propagate_lanczos(h, psi0, times, tol):
    """Piecewise Lanczos propagation through an ascending time grid."""
    matvec = lambda x: h @ x
    # Gershgorin spectral-width estimate sets the initial step subdivision
    width = float(np.abs(h).sum(axis=1).max())
    states = []
    psi = psi0.astype(complex)
    t_now = 0.0
    for t in times:
        dt_total = t - t_now
        steps = max(1, int(np.ceil(abs(dt_total) * width / 20.0)))
        while dt_total != 0.0:
            dt = dt_total / steps
            ok = True
            trial = psi
            for _ in range(steps):
                trial, ok = _lanczos_step(matvec, trial, dt, tol)
                if not ok:
                    break
            if ok:
                psi = trial
                break
            steps *= 2
            if steps > 4096:
                raise SolverError(
                    f"Lanczos propagation failed to meet tol={tol} at t={t}"
                )
        t_now = t
        states.append(psi.copy())
    return states


def evolve(
    initial: SpinConfig,
    h: HamiltonianMatrix,
    times: np.ndarray,
    time_scale: float = 1.0,
    entropy_cut: int | None = None,
    tol: float = PROPAGATION_TOL,
) -> QuenchResult:
    """Evolve |initial> under exp(-i H t) and record observables.

    `times` are multiples of `time_scale` (pass 1/J_P to work on the
    dressed-model clock); they must be non-negative and ascending.
    """
    times = np.asarray(times, dtype=float)
    if len(times) == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending and non-negative")
    pos = h.position(initial)
    length = h.length
    cut = entropy_cut if entropy_cut is not None else length // 2
    n = h.dimension

    psi0 = np.zeros(n, dtype=complex)
    psi0[pos] = 1.0
    t_phys = times * time_scale

    if n <= DENSE_EVOLVE_LIMIT:
        from scipy.linalg import eigh

        energies, modes = eigh(h.to_dense())
        coeff = modes.T @ psi0.real
        states = [
            modes @ (np.exp(-1j * energies * t) * coeff) for t in t_phys
        ]
    else:
        states = _propagate_lanczos(h.matrix, psi0, t_phys, tol)

    bits = bit_columns(h.basis, length)
    imb_diag = imbalance_diagonal(h.basis, length, initial)
    e0 = float(h.matrix[pos, pos])
    schmidt = SchmidtCut(h.basis, length, cut) if 1 <= cut < length else None

    dens = np.empty((len(times), length))
    imb = np.empty(len(times))
    fisher = np.empty(len(times))
    entropy = np.zeros(len(times))
    norm_drift = 0.0
    energy_drift = 0.0
    for k, psi in enumerate(states):
        w = np.abs(psi) ** 2
        norm = w.sum()
        norm_drift = max(norm_drift, abs(norm - 1.0))
        if norm_drift > 100 * tol:
            raise SolverError(f"norm drift {norm_drift:.2e} exceeds tolerance")
        energy = float(np.vdot(psi, h.matrix @ psi).real)
        energy_drift = max(energy_drift, abs(energy - e0))
        dens[k] = w @ bits
        mean_i = w @ imb_diag
        imb[k] = mean_i
        fisher[k] = 4.0 * max(w @ imb_diag**2 - mean_i**2, 0.0)
        if schmidt is not None:
            entropy[k] = schmidt.entropy(psi / np.sqrt(norm))

    return QuenchResult(
        times=times,
        densities=dens,
        imbalance=imb,
        fisher=fisher,
        entropy=entropy,
        initial=initial,
        length=length,
        norm_drift=norm_drift,
        energy_drift=energy_drift / max(abs(e0), 1.0),
    )


def eth_prediction(
    h: HamiltonianMatrix,
    initial: SpinConfig,
    observable_diag: np.ndarray,
    n_states: int = 50,
    eigendata=None,
) -> float:
    """Restricted-thermalization estimate of a diagonal observable.

    Mean of <O> over the `n_states` eigenstates whose energies are closest
    to E = <initial|H|initial>, all within the basis of `h` (a single
    fragment for fragmented models).
    """
    if n_states < 1 or n_states > h.dimension:
        raise ValueError(
            f"n_states must be in [1, {h.dimension}], got {n_states}"
        )
    if eigendata is None:
        from .spectral import diagonalize

        eigendata = diagonalize(h, window="full")
    pos = h.position(initial)
    e_init = float(h.matrix[pos, pos])
    order = np.argsort(np.abs(eigendata.energies - e_init))[:n_states]
    modes = eigendata.vectors[:, order]
    return float(np.mean(np.einsum("an,a,an->n", modes, observable_diag, modes)))


def time_averaged_imbalance(
    result: QuenchResult, t_lo: float, t_hi: float
) -> float:
    """Mean imbalance over grid points with t in [t_lo, t_hi]."""
    sel = (result.times >= t_lo) & (result.times <= t_hi)
    if not sel.any():
        raise ValueError(f"no grid points in [{t_lo}, {t_hi}]")
    return float(result.imbalance[sel].mean())
