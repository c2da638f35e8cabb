"""Atomic-position disorder: sampling, dressed couplings, ensemble sweeps.

Positions are R_j = j R0 + dR_j with dR_j uniform in [-dr/2, dr/2] (units
of the lattice constant R0).  Every realization is keyed by
(master seed, L, dr, realization index) through a counter-based generator,
so sweeps are bit-reproducible regardless of execution order or worker
count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .basis import Regime
from .constraints import KrylovFragment, build_fragment
from .errors import SolverError
from .model import (
    HamiltonianMatrix,
    InteractionProfile,
    ModelParams,
    build_effective_hamiltonian,
)
from .spectral import SchmidtCut, diagonalize, r_statistics

DISORDER_VALIDITY_FRACTION = 0.5


def _philox(master_seed: int, length: int, dr: float, index: int) -> np.random.Generator:
    dr_key = int(np.float64(dr).view(np.uint64))
    seq = np.random.SeedSequence([int(master_seed), int(length), dr_key, int(index)])
    return np.random.Generator(np.random.Philox(seed=seq))


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of atomic positions and the dressed pair couplings."""

    length: int
    dr: float
    seed_key: tuple[int, int, int, int]
    offsets: np.ndarray      # dR_j in units of R0
    positions: np.ndarray    # R_j in units of R0
    vmat: np.ndarray         # C6/(R_i-R_j)^6 up to the retained range

    @property
    def profile(self) -> InteractionProfile:
        return InteractionProfile.from_matrix(self.vmat)


def sample_realization(
    length: int,
    dr: float,
    seed: int,
    v: float,
    cutoff: int = 3,
    index: int = 0,
) -> DisorderRealization:
    """Draw positions and dress the power-law couplings.

    `v` is the clean nearest-neighbour strength, so C6 = v R0^6 and dr = 0
    reproduces v/d^6 exactly.  Rejects draws with non-increasing positions
    (overlapping atoms); impossible for dr < R0.
    """
    if dr < 0:
        raise ValueError(f"disorder width must be >= 0, got {dr}")
    rng = _philox(seed, length, dr, index)
    offsets = rng.uniform(-dr / 2.0, dr / 2.0, size=length) if dr > 0 else np.zeros(length)
    positions = np.arange(1, length + 1, dtype=float) + offsets
    if np.any(np.diff(positions) <= 0):
        raise ValueError("overlapping atoms: positions are not increasing")
    vmat = np.zeros((length, length))
    for i in range(length):
        for j in range(i + 1, min(i + cutoff + 1, length)):
            if dr > 0:
                vmat[i, j] = v / (positions[j] - positions[i]) ** 6
            else:
                vmat[i, j] = v / float(j - i) ** 6
            vmat[j, i] = vmat[i, j]
    return DisorderRealization(
        length=length,
        dr=dr,
        seed_key=(seed, length, int(np.float64(dr).view(np.uint64)), index),
        offsets=offsets,
        positions=positions,
        vmat=vmat,
    )


def disordered_hamiltonian(
    fragment: KrylovFragment,
    realization: DisorderRealization,
    params: ModelParams,
) -> HamiltonianMatrix:
    """Dress a fragment Hamiltonian with one position-disorder draw.

    The second-order dressing uses the inhomogeneous NN couplings of the
    realization (hoppings and the configuration-resolved diagonal); pair
    couplings at distance >= 2, including their disorder, enter as a raw
    diagonal tail.  Requires an NN-type move set: the disorder is diagonal
    plus constrained hopping and conserves the NN dimer charge.
    """
    if fragment.regime not in (Regime.WEAK_NONLOCAL, Regime.NN_ONLY):
        raise ValueError(
            "disorder dressing requires the NN-type move set "
            f"(got regime {fragment.regime.value})"
        )
    if fragment.length != realization.length:
        raise ValueError("fragment and realization chain lengths differ")
    # the dressing denominators are detuning-scale; coupling disorder
    # comparable to them invalidates the second-order expansion
    nn_strengths = np.diagonal(realization.vmat, 1)
    dv = np.abs(nn_strengths - params.v)
    bound = DISORDER_VALIDITY_FRACTION * params.delta
    if dv.max(initial=0.0) > bound:
        raise SolverError(
            f"coupling disorder {dv.max():.3g} is comparable to the "
            f"detuning-scale gaps (bound {bound:.3g}); dressed model invalid"
        )
    dressed = params.with_interaction(realization.profile)
    return build_effective_hamiltonian(
        fragment,
        dressed,
        mode="numeric-sw",
        sw_interaction=realization.profile.nn_restricted(fragment.length),
    )


# ---------------------------------------------------------------------------
# ensemble sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepCell:
    length: int
    dr: float
    n_realizations: int
    n_failed: int
    mean_r: float | None = None
    se_r: float | None = None
    mean_entropy: float | None = None
    se_entropy: float | None = None
    var_entropy: float | None = None

    def to_dict(self) -> dict:
        return {
            "L": self.length,
            "dr": self.dr,
            "n_realizations": self.n_realizations,
            "n_failed": self.n_failed,
            "mean_r": self.mean_r,
            "se_r": self.se_r,
            "mean_entropy": self.mean_entropy,
            "se_entropy": self.se_entropy,
            "var_entropy": self.var_entropy,
        }


@dataclass
class SweepResult:
    cells: list[SweepCell]
    provenance: dict = field(default_factory=dict)

    def cell(self, length: int, dr: float) -> SweepCell:
        for c in self.cells:
            if c.length == length and np.isclose(c.dr, dr):
                return c
        raise KeyError(f"no cell (L={length}, dr={dr})")

    def lengths(self) -> list[int]:
        return sorted({c.length for c in self.cells})

    def to_json(self) -> str:
        return json.dumps(
            {"provenance": self.provenance, "cells": [c.to_dict() for c in self.cells]},
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SweepResult":
        raw = json.loads(text)
        cells = [
            SweepCell(
                length=c["L"],
                dr=c["dr"],
                n_realizations=c["n_realizations"],
                n_failed=c["n_failed"],
                mean_r=c.get("mean_r"),
                se_r=c.get("se_r"),
                mean_entropy=c.get("mean_entropy"),
                se_entropy=c.get("se_entropy"),
                var_entropy=c.get("var_entropy"),
            )
            for c in raw["cells"]
        ]
        return cls(cells=cells, provenance=raw.get("provenance", {}))

    def entropy_points(self) -> np.ndarray:
        """(L, dr, S, sigma) rows for scaling collapse."""
        rows = [
            (c.length, c.dr, c.mean_entropy, c.se_entropy or 1e-3)
            for c in self.cells
            if c.mean_entropy is not None
        ]
        return np.array(rows, dtype=float)


def _sweep_cell(
    fragment: KrylovFragment,
    params: ModelParams,
    dr: float,
    realizations: int,
    seed: int,
    n_mid: int,
    want_entropy: bool,
) -> SweepCell:
    """Average mid-spectrum diagnostics over disorder draws for one cell.

    Per-realization failures are excluded and counted; aggregation order is
    fixed by the realization index.
    """
    cut = fragment.length // 2
    schmidt = SchmidtCut(fragment.basis, fragment.length, cut) if want_entropy else None
    r_vals, s_means, s_all = [], [], []
    n_failed = 0
    for k in range(realizations):
        try:
            real = sample_realization(
                fragment.length, dr, seed, params.v,
                cutoff=params.interaction.max_range, index=k,
            )
            h = disordered_hamiltonian(fragment, real, params)
            eig = diagonalize(h, window=n_mid, compute_vectors=want_entropy)
            stats = r_statistics(eig.energies, window="full")
            r_vals.append(stats.mean_r)
            if want_entropy:
                entropies = [
                    schmidt.entropy(eig.vectors[:, j])
                    for j in range(eig.vectors.shape[1])
                ]
                s_means.append(float(np.mean(entropies)))
                s_all.extend(entropies)
        except (SolverError, ValueError) as exc:
            n_failed += 1
            if n_failed == realizations:
                raise SolverError(
                    f"all {realizations} realizations failed; last error: {exc}"
                ) from exc
    n_ok = realizations - n_failed
    if n_ok < 2:
        raise SolverError(f"cell (L={fragment.length}, dr={dr}) has {n_ok} valid realizations")
    cell = SweepCell(
        length=fragment.length,
        dr=dr,
        n_realizations=n_ok,
        n_failed=n_failed,
        mean_r=float(np.mean(r_vals)),
        se_r=float(np.std(r_vals, ddof=1) / np.sqrt(n_ok)),
    )
    if want_entropy:
        cell.mean_entropy = float(np.mean(s_means))
        cell.se_entropy = float(np.std(s_means, ddof=1) / np.sqrt(n_ok))
        cell.var_entropy = float(np.var(s_all, ddof=1))
    return cell


def sweep(
    root_for_length,
    lengths: list[int],
    dr_grid: np.ndarray,
    realizations: int,
    params_for_length,
    seed: int = 0,
    n_mid: int = 50,
    diagnostics: tuple[str, ...] = ("r", "entropy"),
    jobs: int = 1,
) -> SweepResult:
    """Disorder-averaged diagnostics on an (L, dr) grid.

    `root_for_length(L)` names the sector through its root configuration;
    `params_for_length(L)` supplies the clean model.  jobs > 1 distributes
    cells over processes; results are identical either way because every
    realization is seeded by its own (seed, L, dr, index) key and cells
    aggregate in fixed order.
    """
    want_entropy = "entropy" in diagnostics
    tasks = []
    for length in lengths:
        params = params_for_length(length)
        fragment = build_fragment(root_for_length(length), params.regime)
        for dr in dr_grid:
            tasks.append((fragment, params, float(dr)))

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(
                pool.map(
                    _sweep_cell_star,
                    [
                        (frag, params, dr, realizations, seed, n_mid, want_entropy)
                        for frag, params, dr in tasks
                    ],
                )
            )
    else:
        cells = [
            _sweep_cell(frag, params, dr, realizations, seed, n_mid, want_entropy)
            for frag, params, dr in tasks
        ]
    provenance = {
        "seed": seed,
        "lengths": list(lengths),
        "dr_grid": [float(d) for d in dr_grid],
        "realizations": realizations,
        "n_mid": n_mid,
        "diagnostics": list(diagnostics),
    }
    return SweepResult(cells=cells, provenance=provenance)


def _sweep_cell_star(args):
    return _sweep_cell(*args)


# ---------------------------------------------------------------------------
# finite-size scaling collapse
# ---------------------------------------------------------------------------

@dataclass
class CollapseResult:
    dr_c: float
    nu: float
    quality: float
    form: str
    grid_dr_c: np.ndarray
    grid_nu: np.ndarray
    cost_surface: np.ndarray
    converged: bool


def _rescaled_x(points: np.ndarray, dr_c: float, nu: float, form: str) -> np.ndarray:
    lengths, dr = points[:, 0], points[:, 1]
    d = dr - dr_c
    if form == "L_power":
        return d * lengths ** (1.0 / nu)
    if form == "distance_power":
        return np.sign(d) * np.abs(d) ** (1.0 / nu) * lengths
    raise ValueError(f"unknown scaling form {form!r}")


def collapse_cost(
    points: np.ndarray, dr_c: float, nu: float, form: str = "L_power", k: int = 6
) -> float:
    """Spread of the rescaled data around a local-regression master curve.

    For each point, a line is fit through its k nearest neighbours on the
    rescaled axis (the point itself excluded) and the squared, error-
    weighted residual is accumulated.
    """
    x = _rescaled_x(points, dr_c, nu, form)
    order = np.argsort(x)
    xs = x[order]
    ys = points[order, 2]
    sig = points[order, 3]
    n = len(xs)
    cost = 0.0
    for i in range(n):
        lo = max(0, min(i - k // 2, n - k - 1))
        sel = [j for j in range(lo, lo + k + 1) if j != i]
        xw, yw = xs[sel], ys[sel]
        denom = (xw - xw.mean()) @ (xw - xw.mean())
        if denom < 1e-30:
            pred = yw.mean()
        else:
            slope = (xw - xw.mean()) @ (yw - yw.mean()) / denom
            pred = yw.mean() + slope * (xs[i] - xw.mean())
        cost += ((ys[i] - pred) / sig[i]) ** 2
    return cost / n


def fss_collapse(
    points: np.ndarray,
    dr_c_range: tuple[float, float] = (0.004, 0.03),
    nu_range: tuple[float, float] = (0.4, 2.0),
    form: str = "L_power",
    grid: tuple[int, int] = (25, 25),
) -> CollapseResult:
    """Best (dr_c, nu) collapsing S(L, dr) onto one master curve.

    Coarse grid search over the given ranges followed by a Nelder-Mead
    refinement; the full cost surface is returned so a non-convergent
    search can be inspected.  `form` places the exponent on the system
    size (standard, default) or on the distance to the critical point.
    """
    points = np.asarray(points, dtype=float)
    if len({int(p) for p in points[:, 0]}) < 3:
        raise ValueError("scaling collapse needs at least 3 system sizes")
    from scipy.optimize import minimize

    dr_cs = np.linspace(*dr_c_range, grid[0])
    nus = np.linspace(*nu_range, grid[1])
    surface = np.empty((len(dr_cs), len(nus)))
    for i, dc in enumerate(dr_cs):
        for j, nu in enumerate(nus):
            surface[i, j] = collapse_cost(points, dc, nu, form)
    i0, j0 = np.unravel_index(np.argmin(surface), surface.shape)
    res = minimize(
        lambda p: collapse_cost(points, p[0], p[1], form),
        [dr_cs[i0], nus[j0]],
        method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 400},
    )
    return CollapseResult(
        dr_c=float(res.x[0]),
        nu=float(res.x[1]),
        quality=float(res.fun),
        form=form,
        grid_dr_c=dr_cs,
        grid_nu=nus,
        cost_surface=surface,
        converged=bool(res.success),
    )


def synthetic_collapse_data(
    dr_c: float = 0.013,
    nu: float = 0.93,
    lengths: tuple[int, ...] = (11, 14, 17, 20, 23),
    dr_grid: np.ndarray | None = None,
    noise: float = 0.01,
    seed: int = 77,
    form: str = "L_power",
) -> np.ndarray:
    """Oracle data from a known master curve, for collapse self-tests."""
    if dr_grid is None:
        dr_grid = np.geomspace(0.002, 0.08, 24)
    rng = np.random.default_rng(seed)
    rows = []
    for length in lengths:
        for dr in dr_grid:
            x = _rescaled_x(np.array([[length, dr, 0, 0]]), dr_c, nu, form)[0]
            s = 2.0 - 1.5 * np.tanh(8.0 * x)
            sigma = noise * s
            rows.append((length, dr, s + sigma * rng.standard_normal(), sigma))
    return np.array(rows, dtype=float)
