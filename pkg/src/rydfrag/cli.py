"""Experiment orchestration and the `rydfrag` command-line entry point.

Subcommands: sectors, fragment, spectrum, quench, disorder-sweep, fss.
Each run resolves its configuration (JSON file merged with flags, unknown
keys rejected), echoes it to <out>/config.json, and writes delimited
tables, JSON dumps, and rendered figures into the output directory.

Exit codes: 0 success, 2 configuration error, 3 solver/resource error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import plotting, reports
from .basis import Regime, SectorKey, SpinConfig, sector_sizes, symmetrize_inversion
from .constraints import (
    build_fragment,
    fragmentation_stats,
    largest_sector_key,
)
from .disorder import SweepResult, fss_collapse, sweep, synthetic_collapse_data
from .dynamics import default_time_grid, eth_prediction, evolve, imbalance_diagonal
from .errors import ConfigError, ResourceError, SolverError
from .model import (
    HamiltonianMatrix,
    InteractionProfile,
    ModelParams,
    analytic_couplings,
    build_effective_hamiltonian,
    build_exact_hamiltonian,
)
from .roots import TEMPLATE_KINDS, root_template
from .spectral import SchmidtCut, diagonalize, r_statistics

OUTDIR_ENV = "RYDFRAG_OUTDIR"

_COMMON_KEYS = {
    "out": (str, type(None)),
    "seed": int,
    "jobs": int,
    "figures": bool,
    "notes": str,
}
_MODEL_KEYS = {
    "omega": float,
    "delta": float,
    "v": float,
    "v2": float,
    "v3": float,
    "vdw_cutoff": (int, type(None)),
    "regime": str,
    "mode": str,
}
_SCHEMAS: dict[str, dict] = {
    "sectors": {
        **_COMMON_KEYS,
        "length": int,
        "lengths": list,
        "regime": str,
        "fragments": bool,
        "largest_only": bool,
        "sector_per_length": dict,
    },
    "fragment": {
        **_COMMON_KEYS,
        "length": int,
        "regime": str,
        "root": (str, type(None)),
        "root_template": (str, type(None)),
        "cap": (int, type(None)),
        "dump_edges": bool,
    },
    "spectrum": {
        **_COMMON_KEYS,
        **_MODEL_KEYS,
        "length": int,
        "root": (str, type(None)),
        "root_template": (str, type(None)),
        "inversion": str,
        "window": (str, int),
        "entropy_states": int,
        "dump_matrix": bool,
    },
    "quench": {
        **_COMMON_KEYS,
        **_MODEL_KEYS,
        "length": int,
        "init": (str, type(None)),
        "root_template": (str, type(None)),
        "time_points": int,
        "t_max": float,
        "t_min": float,
        "compare_exact": bool,
        "eth_states": int,
        "dr": float,
        "realizations": int,
    },
    "disorder-sweep": {
        **_COMMON_KEYS,
        **_MODEL_KEYS,
        "lengths": list,
        "template": str,
        "dr_grid": list,
        "realizations": int,
        "n_mid": int,
        "diagnostics": list,
    },
    "fss": {
        **_COMMON_KEYS,
        "input": (str, type(None)),
        "selftest": bool,
        "dr_c_range": list,
        "nu_range": list,
        "form": str,
        "grid": list,
        "planted_dr_c": float,
        "planted_nu": float,
        "noise": float,
    },
}
_DEFAULTS: dict[str, dict] = {
    "sectors": {
        "regime": "nn", "fragments": False, "largest_only": False,
        "lengths": [], "sector_per_length": {},
    },
    "fragment": {
        "regime": "nn", "root": None, "root_template": None,
        "cap": None, "dump_edges": True,
    },
    "spectrum": {
        "regime": "nn", "mode": "analytic", "root": None, "root_template": None,
        "inversion": "none", "window": "full", "entropy_states": 200,
        "dump_matrix": False, "omega": 1.0, "v2": 0.0, "v3": 0.0,
        "vdw_cutoff": None,
    },
    "quench": {
        "regime": "nn", "mode": "analytic", "init": None, "root_template": None,
        "time_points": 200, "t_max": 40.0, "t_min": 0.1,
        "compare_exact": False, "eth_states": 50, "omega": 1.0,
        "v2": 0.0, "v3": 0.0, "vdw_cutoff": None,
        "dr": 0.0, "realizations": 1,
    },
    "disorder-sweep": {
        "regime": "weak-nonlocal", "mode": "numeric-sw", "template": "z3-hole",
        "realizations": 50, "n_mid": 50, "diagnostics": ["r"],
        "omega": 1.0, "v2": 0.0, "v3": 0.0, "vdw_cutoff": 3,
    },
    "fss": {
        "input": None, "selftest": False, "dr_c_range": [0.004, 0.03],
        "nu_range": [0.4, 2.0], "form": "L_power", "grid": [25, 25],
        "planted_dr_c": 0.013, "planted_nu": 0.93, "noise": 0.01,
    },
}
for _schema in _DEFAULTS.values():
    _schema.setdefault("out", None)
    _schema.setdefault("seed", 0)
    _schema.setdefault("jobs", 1)
    _schema.setdefault("figures", True)
    _schema.setdefault("notes", "")


def _coerce(key: str, value, want) -> object:
    kinds = want if isinstance(want, tuple) else (want,)
    if float in kinds and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if isinstance(value, bool) and bool not in kinds:
        raise ConfigError(f"field {key!r}: boolean not allowed")
    if not isinstance(value, kinds):
        names = "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"field {key!r}: expected {names}, got {value!r}")
    return value


def resolve_config(command: str, file_path: str | None, overrides: dict) -> dict:
    """Merge defaults, config file, and flag overrides; reject unknown keys."""
    schema = _SCHEMAS[command]
    config = dict(_DEFAULTS[command])
    if file_path:
        try:
            raw = json.loads(Path(file_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {file_path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        config.update(raw)
    config.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(config) - set(schema)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, value in list(config.items()):
        if value is None:
            continue
        config[key] = _coerce(key, value, schema[key])
    return config


def _require(config: dict, *keys: str):
    missing = [k for k in keys if config.get(k) is None]
    if missing:
        raise ConfigError(f"missing required field(s): {missing}")


def _regime(config: dict) -> Regime:
    try:
        return Regime(config["regime"])
    except ValueError as exc:
        valid = [r.value for r in Regime]
        raise ConfigError(f"unknown regime {config['regime']!r}; one of {valid}") from exc


def _interaction(config: dict) -> InteractionProfile:
    if config.get("vdw_cutoff"):
        return InteractionProfile.vdw(config["v"], config["vdw_cutoff"])
    return InteractionProfile.from_ranges(
        config["v"], config.get("v2", 0.0), config.get("v3", 0.0)
    )


def _model_params(config: dict) -> ModelParams:
    _require(config, "delta", "v")
    try:
        return ModelParams(
            omega=config["omega"],
            delta=config["delta"],
            interaction=_interaction(config),
            regime=_regime(config),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_root(config: dict, length: int, regime: Regime) -> SpinConfig:
    root_str = config.get("root") or config.get("init")
    kind = config.get("root_template")
    if root_str and kind:
        raise ConfigError("give either a root bitstring or a template, not both")
    if root_str:
        try:
            root = SpinConfig.from_string(root_str)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if root.length != length:
            raise ConfigError(
                f"root has {root.length} sites but length={length}"
            )
        return root
    if kind:
        # the two cluster templates are parity twins; accept either name and
        # fall back to the matching parity so survey scripts can fix one name
        try:
            if kind in ("eq8", "eq9") and length % 4 != (0 if kind == "eq8" else 2):
                other = "eq9" if kind == "eq8" else "eq8"
                config["root_template"] = other
                return root_template(other, length)
            return root_template(kind, length)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError("a root bitstring or a root_template is required")


def _out_dir(config: dict, command: str) -> Path:
    if config.get("out"):
        base = Path(config["out"])
    elif os.environ.get(OUTDIR_ENV):
        base = Path(os.environ[OUTDIR_ENV]) / command
    else:
        base = Path("runs") / command
    base.mkdir(parents=True, exist_ok=True)
    return base


def _echo_config(config: dict, command: str, out: Path) -> tuple[dict, str]:
    resolved = {"command": command, **{k: config[k] for k in sorted(config)}}
    resolved["out"] = str(out)
    reports.atomic_write_text(
        out / "config.json", json.dumps(resolved, indent=2, sort_keys=True) + "\n"
    )
    digest = hashlib.sha256(reports.config_json(resolved).encode()).hexdigest()
    return resolved, digest


def _parse_sector_key(spec: dict, regime: Regime) -> SectorKey:
    try:
        return SectorKey(int(spec["n_r"]), tuple(int(c) for c in spec["charges"]), regime)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad sector spec {spec!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def run_sectors(config: dict) -> int:
    regime = _regime(config)
    lengths = config["lengths"] or ([config["length"]] if config.get("length") else [])
    if not lengths:
        raise ConfigError("provide length or lengths")
    lengths = [int(x) for x in lengths]
    out = _out_dir(config, "sectors")
    resolved, digest = _echo_config(config, "sectors", out)

    survey_rows = []
    for length in lengths:
        if config["largest_only"] or str(length) in config["sector_per_length"]:
            spec = config["sector_per_length"].get(str(length))
            key = (
                _parse_sector_key(spec, regime)
                if spec
                else largest_sector_key(length, regime)
            )
            stats = fragmentation_stats(length, key)
            survey_rows.append(
                (length, key.label(), stats.d_s, stats.d_max,
                 stats.n_fragments, stats.n_frozen, repr(stats.ratio))
            )
            print(
                f"L={length} {key.label()}: D_s={stats.d_s} D_max={stats.d_max} "
                f"fragments={stats.n_fragments} frozen={stats.n_frozen}"
            )
        else:
            if length > 24 and config["fragments"]:
                raise ResourceError(
                    "full-space fragment partition capped at L <= 24"
                )
            sizes = sector_sizes(length, regime)
            total = sum(sizes.values())
            rows = []
            for key in sorted(sizes, key=lambda k: (k.n_r, k.charges)):
                if config["fragments"]:
                    stats = fragmentation_stats(length, key)
                    rows.append(
                        (key.n_r, *key.charges, sizes[key], stats.d_max,
                         stats.n_fragments, stats.n_frozen)
                    )
                else:
                    rows.append((key.n_r, *key.charges, sizes[key]))
            charge_cols = (
                ["n_nn", "n_nnn"] if regime is Regime.NNN_GENERIC else ["charge"]
            )
            cols = ["n_r", *charge_cols, "dimension"]
            if config["fragments"]:
                cols += ["d_max", "n_fragments", "n_frozen"]
            reports.write_csv(out / f"sectors_L{length}.csv", cols, rows, resolved)
            reports.write_json(
                out / f"sectors_L{length}.json",
                {"length": length, "regime": regime.value,
                 "n_sectors": len(sizes), "total_dimension": total},
                resolved,
            )
            print(f"L={length}: {len(sizes)} sectors totaling {total} states")
            if config["figures"]:
                plotting.sector_sizes_figure(
                    sizes, length, out / f"sector_sizes_L{length}.png", digest
                )

    if survey_rows:
        cols = ["L", "sector", "d_s", "d_max", "n_fragments", "n_frozen", "ratio"]
        reports.write_csv(out / "largest_sector_survey.csv", cols, survey_rows, resolved)
        payload = {"rows": [dict(zip(cols, r)) for r in survey_rows]}
        if len(survey_rows) >= 3:
            ls = np.array([r[0] for r in survey_rows], dtype=float)
            ratios = np.array([float(r[6]) for r in survey_rows])
            slope, intercept = np.polyfit(ls, np.log(ratios), 1)
            payload["fit"] = {
                "base": float(np.exp(slope)), "prefactor": float(np.exp(intercept))
            }
            print(
                f"scaling fit: ratio ~ {payload['fit']['prefactor']:.3f} x "
                f"{payload['fit']['base']:.4f}^L"
            )
            if config["figures"]:
                plotting.scaling_figure(
                    ls, ratios,
                    (payload["fit"]["base"], payload["fit"]["prefactor"]),
                    out / "largest_sector_scaling.png",
                    r"$D_{max}/D_s$", digest,
                )
        reports.write_json(out / "largest_sector_survey.json", payload, resolved)
    return 0


def run_fragment(config: dict) -> int:
    _require(config, "length")
    regime = _regime(config)
    length = config["length"]
    root = _resolve_root(config, length, regime)
    out = _out_dir(config, "fragment")
    resolved, digest = _echo_config(config, "fragment", out)

    from .constraints import DEFAULT_FRAGMENT_CAP

    cap = config["cap"] if config["cap"] is not None else DEFAULT_FRAGMENT_CAP
    fragment = build_fragment(root, regime, cap=cap)
    dump = fragment.to_json_dict()
    if not config["dump_edges"]:
        dump.pop("edges")
        dump.pop("basis")
    reports.write_json(out / "fragment.json", dump, resolved)
    reports.write_csv(
        out / "fragment_summary.csv",
        ["L", "regime", "root", "sector", "dimension", "n_edges"],
        [(length, regime.value, root.to_string(), fragment.sector.label(),
          fragment.dimension, len(fragment.edges_a))],
        resolved,
    )
    print(f"fragment dimension {fragment.dimension} ({len(fragment.edges_a)} edges)")
    if config["figures"]:
        degrees = np.bincount(
            np.concatenate([fragment.edges_a, fragment.edges_b]),
            minlength=fragment.dimension,
        )
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(degrees, bins=np.arange(degrees.max() + 2) - 0.5, color="tab:blue")
        ax.set_xlabel("allowed moves per configuration")
        ax.set_ylabel("count")
        ax.set_title(f"L={length}, dimension {fragment.dimension}")
        plotting._save(fig, out / "fragment_degrees.png", digest)
    return 0


def run_spectrum(config: dict) -> int:
    _require(config, "length")
    params = _model_params(config)
    length = config["length"]
    root = _resolve_root(config, length, params.regime)
    out = _out_dir(config, "spectrum")
    resolved, digest = _echo_config(config, "spectrum", out)

    fragment = build_fragment(root, params.regime)
    h = build_effective_hamiltonian(fragment, params, mode=config["mode"])
    if config["dump_matrix"]:
        reports.atomic_write_text(out / "matrix.txt", h.to_coordinate_text())

    inversion = config["inversion"]
    if inversion not in ("none", "even", "auto"):
        raise ConfigError("inversion must be none, even, or auto")
    inv_basis = None
    if inversion in ("even", "auto"):
        try:
            inv_basis = symmetrize_inversion(fragment.basis, length)
        except ValueError:
            if inversion == "even":
                raise ConfigError(
                    "fragment basis is not closed under inversion; "
                    "use inversion=none"
                ) from None
    if inv_basis is not None:
        h_used = HamiltonianMatrix(
            basis=np.arange(inv_basis.dimension, dtype=np.int64),
            length=length,
            matrix=inv_basis.project_matrix(h.matrix),
        )
    else:
        h_used = h

    window = config["window"]
    if isinstance(window, str) and window != "full":
        try:
            window = int(window)
        except ValueError:
            raise ConfigError("window must be 'full' or an integer count") from None
    eig = diagonalize(h_used, window=window)
    stats = r_statistics(eig.energies)

    n_states = eig.dimension
    stride = max(1, n_states // max(config["entropy_states"], 1))
    picks = np.arange(0, n_states, stride)
    cut = length // 2
    schmidt = SchmidtCut(fragment.basis, length, cut)
    entropies = np.full(n_states, np.nan)
    for idx in picks:
        vec = eig.vectors[:, idx]
        if inv_basis is not None:
            vec = inv_basis.expand(vec)
        entropies[idx] = schmidt.entropy(vec)

    eps = eig.energy_density
    rows = [
        (int(n), repr(float(eig.energies[n])), repr(float(eps[n])),
         "" if np.isnan(entropies[n]) else repr(float(entropies[n])))
        for n in range(n_states)
    ]
    reports.write_csv(out / "eigens.csv", ["n", "energy", "eps", "entropy"], rows, resolved)
    edges, density = stats.spacing_histogram()
    reports.write_csv(
        out / "spacings.csv",
        ["s_lo", "s_hi", "p"],
        [(repr(float(lo)), repr(float(hi)), repr(float(p)))
         for lo, hi, p in zip(edges[:-1], edges[1:], density)],
        resolved,
    )
    reports.write_json(
        out / "rstats.json",
        {
            "mean_r": stats.mean_r,
            "n_levels": stats.n_levels,
            "n_merged": stats.n_merged,
            "dimension": fragment.dimension,
            "inversion": "even" if inv_basis is not None else "none",
            "inversion_dimension": inv_basis.dimension if inv_basis else None,
            "couplings": {
                "j_p": analytic_couplings(params).j_p,
                "j_q": analytic_couplings(params).j_q,
                "xi": analytic_couplings(params).xi,
            },
        },
        resolved,
    )
    print(
        f"dimension {fragment.dimension}"
        + (f" (even sector {inv_basis.dimension})" if inv_basis else "")
        + f", <r> = {stats.mean_r:.4f}"
    )
    if config["figures"]:
        sel = ~np.isnan(entropies)
        plotting.spectrum_figure(
            eps[sel], entropies[sel], out / "entropy_vs_energy.png",
            title=f"L={length}, root {root}", config_hash=digest,
        )
        plotting.spacing_figure(
            edges, density, stats.mean_r, out / "spacing_hist.png", digest
        )
    return 0


def run_quench(config: dict) -> int:
    _require(config, "length")
    params = _model_params(config)
    length = config["length"]
    initial = _resolve_root(config, length, params.regime)
    out = _out_dir(config, "quench")
    resolved, digest = _echo_config(config, "quench", out)

    cpl = analytic_couplings(params)
    times = default_time_grid(config["time_points"], config["t_max"], config["t_min"])
    fragment = build_fragment(initial, params.regime)
    dr = config["dr"]
    if dr > 0 and config["compare_exact"]:
        raise ConfigError("compare_exact runs on the clean chain; set dr=0")
    if dr > 0:
        from .disorder import disordered_hamiltonian, sample_realization

        h_eff = None
        acc = None
        eth_acc = []
        diag = imbalance_diagonal(fragment.basis, length, initial)
        for k in range(config["realizations"]):
            real = sample_realization(
                length, dr, config["seed"], params.v,
                cutoff=max(params.interaction.max_range, 1), index=k,
            )
            h_k = disordered_hamiltonian(fragment, real, params)
            res_k = evolve(initial, h_k, times, time_scale=1.0 / cpl.j_p)
            eth_acc.append(
                eth_prediction(h_k, initial, diag,
                               n_states=min(config["eth_states"], fragment.dimension))
            )
            if acc is None:
                acc = res_k
            else:
                acc.densities += res_k.densities
                acc.imbalance += res_k.imbalance
                acc.fisher += res_k.fisher
                acc.entropy += res_k.entropy
                acc.norm_drift = max(acc.norm_drift, res_k.norm_drift)
                acc.energy_drift = max(acc.energy_drift, res_k.energy_drift)
        n = config["realizations"]
        acc.densities /= n
        acc.imbalance /= n
        acc.fisher /= n
        acc.entropy /= n
        result = acc
        result.extras["eth_imbalance_mean"] = float(np.mean(eth_acc))
    else:
        h_eff = build_effective_hamiltonian(fragment, params, mode=config["mode"])
        result = evolve(initial, h_eff, times, time_scale=1.0 / cpl.j_p)

    cols = ["t", "imbalance", "fisher", "entropy"] + [
        f"n_{i}" for i in range(1, length + 1)
    ]
    rows = [
        (repr(float(t)), repr(float(result.imbalance[k])),
         repr(float(result.fisher[k])), repr(float(result.entropy[k])),
         *(repr(float(x)) for x in result.densities[k]))
        for k, t in enumerate(times)
    ]
    reports.write_csv(out / "quench_effective.csv", cols, rows, resolved)

    payload = {
        "length": length,
        "initial": initial.to_string(),
        "fragment_dimension": fragment.dimension,
        "time_unit": "1/J_P",
        "j_p": cpl.j_p,
        "dr": dr,
        "realizations": config["realizations"] if dr > 0 else 1,
        "norm_drift": result.norm_drift,
        "energy_drift": result.energy_drift,
    }

    if dr > 0:
        payload["eth_imbalance"] = result.extras["eth_imbalance_mean"]
        print(
            "restricted-thermalization imbalance estimate "
            f"(disorder mean): {payload['eth_imbalance']:.4f}"
        )
    elif fragment.dimension >= config["eth_states"]:
        pred = eth_prediction(
            h_eff, initial,
            imbalance_diagonal(fragment.basis, length, initial),
            n_states=config["eth_states"],
        )
        payload["eth_imbalance"] = pred
        print(f"restricted-thermalization imbalance estimate: {pred:.4f}")

    if config["compare_exact"]:
        cutoff = config["vdw_cutoff"] or params.interaction.max_range
        h_exact = build_exact_hamiltonian(length, params, cutoff=max(cutoff, 1))
        exact = evolve(initial, h_exact, times, time_scale=1.0 / cpl.j_p)
        rows = [
            (repr(float(t)), repr(float(exact.imbalance[k])),
             repr(float(exact.fisher[k])), repr(float(exact.entropy[k])),
             *(repr(float(x)) for x in exact.densities[k]))
            for k, t in enumerate(times)
        ]
        reports.write_csv(out / "quench_exact.csv", cols, rows, resolved)
        dev = float(np.max(np.abs(exact.densities - result.densities)))
        payload["max_density_deviation"] = dev
        print(f"max_t max_i |<n_i>_eff - <n_i>_exact| = {dev:.4f}")

    reports.write_json(out / "quench.json", payload, resolved)
    if config["figures"]:
        plotting.quench_figure(
            result, out / "quench.png",
            title=f"L={length}, initial {initial}", config_hash=digest,
        )
    print(f"quench finished (fragment dimension {fragment.dimension})")
    return 0


def run_disorder_sweep(config: dict) -> int:
    params = _model_params(config)
    _require(config, "lengths", "dr_grid")
    if config["template"] not in TEMPLATE_KINDS:
        raise ConfigError(
            f"template must be one of {TEMPLATE_KINDS}, got {config['template']!r}"
        )
    lengths = [int(x) for x in config["lengths"]]
    dr_grid = np.array([float(x) for x in config["dr_grid"]])
    out = _out_dir(config, "disorder-sweep")
    resolved, digest = _echo_config(config, "disorder-sweep", out)

    result = sweep(
        root_for_length=lambda L: root_template(config["template"], L),
        lengths=lengths,
        dr_grid=dr_grid,
        realizations=config["realizations"],
        params_for_length=lambda L: params,
        seed=config["seed"],
        n_mid=config["n_mid"],
        diagnostics=tuple(config["diagnostics"]),
        jobs=config["jobs"],
    )
    result.provenance["template"] = config["template"]
    reports.atomic_write_text(out / "sweep.json", result.to_json())
    cols = ["L", "dr", "n_realizations", "n_failed", "mean_r", "se_r",
            "mean_entropy", "se_entropy", "var_entropy"]
    rows = [
        tuple("" if v is None else (repr(v) if isinstance(v, float) else v)
              for v in (c.length, c.dr, c.n_realizations, c.n_failed, c.mean_r,
                        c.se_r, c.mean_entropy, c.se_entropy, c.var_entropy))
        for c in result.cells
    ]
    reports.write_csv(out / "sweep.csv", cols, rows, resolved)
    for c in result.cells:
        print(
            f"L={c.length} dr={c.dr:g}: <r>={c.mean_r:.4f} +- {c.se_r:.4f}"
            + (f", S={c.mean_entropy:.4f}" if c.mean_entropy is not None else "")
        )
    if config["figures"]:
        plotting.sweep_figure(result, out / "sweep_r.png", digest)
        if "entropy" in config["diagnostics"]:
            plotting.sweep_entropy_figure(result, out / "sweep_entropy.png", digest)
    return 0


def run_fss(config: dict) -> int:
    out = _out_dir(config, "fss")
    resolved, digest = _echo_config(config, "fss", out)
    if config["selftest"]:
        points = synthetic_collapse_data(
            dr_c=config["planted_dr_c"],
            nu=config["planted_nu"],
            noise=config["noise"],
            seed=config["seed"],
            form=config["form"],
        )
    else:
        _require(config, "input")
        sweep_result = SweepResult.from_json(Path(config["input"]).read_text())
        points = sweep_result.entropy_points()
        if len(points) == 0:
            raise ConfigError(
                "input sweep has no entropy data; rerun with diagnostics=[...,'entropy']"
            )
    result = fss_collapse(
        points,
        dr_c_range=tuple(config["dr_c_range"]),
        nu_range=tuple(config["nu_range"]),
        form=config["form"],
        grid=tuple(int(g) for g in config["grid"]),
    )
    if not result.converged:
        raise SolverError(
            "collapse search did not converge; inspect cost_surface.csv"
        )
    payload = {
        "dr_c": result.dr_c,
        "nu": result.nu,
        "quality": result.quality,
        "form": result.form,
        "converged": result.converged,
    }
    if config["selftest"]:
        payload["planted"] = {
            "dr_c": config["planted_dr_c"], "nu": config["planted_nu"],
        }
        payload["relative_error"] = {
            "dr_c": abs(result.dr_c - config["planted_dr_c"]) / config["planted_dr_c"],
            "nu": abs(result.nu - config["planted_nu"]) / config["planted_nu"],
        }
    reports.write_json(out / "fss.json", payload, resolved)
    rows = [
        (repr(float(dc)), repr(float(nu)), repr(float(result.cost_surface[i, j])))
        for i, dc in enumerate(result.grid_dr_c)
        for j, nu in enumerate(result.grid_nu)
    ]
    reports.write_csv(out / "cost_surface.csv", ["dr_c", "nu", "cost"], rows, resolved)
    print(f"collapse optimum: dr_c={result.dr_c:.5f}, nu={result.nu:.4f}")
    if config["figures"]:
        plotting.collapse_figure(points, result, out / "collapse.png", digest)
    return 0


_RUNNERS = {
    "sectors": run_sectors,
    "fragment": run_fragment,
    "spectrum": run_spectrum,
    "quench": run_quench,
    "disorder-sweep": run_disorder_sweep,
    "fss": run_fss,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", help="JSON config file (flags override it)")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--no-figures", dest="figures", action="store_false", default=None)


def _add_model(sp):
    sp.add_argument("--omega", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--delta-over-omega", type=float, dest="delta_over_omega")
    sp.add_argument("--v", type=float)
    sp.add_argument("--v-over-delta", type=float, dest="v_over_delta")
    sp.add_argument("--v2", type=float)
    sp.add_argument("--v3", type=float)
    sp.add_argument("--vdw-cutoff", type=int, dest="vdw_cutoff")
    sp.add_argument("--regime")
    sp.add_argument("--mode", choices=["analytic", "numeric-sw"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydfrag",
        description="Fragmented constrained spin chains: sectors, fragments, "
        "spectra, quenches, disorder sweeps, scaling collapse.",
    )
    parser.add_argument("--version", action="version", version="rydfrag 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sectors", help="sector partition and fragmentation survey")
    _add_common(sp)
    sp.add_argument("--L", type=int, dest="length")
    sp.add_argument("--L-list", dest="lengths", type=lambda s: [int(x) for x in s.split(",")])
    sp.add_argument("--regime")
    sp.add_argument("--fragments", action="store_true", default=None)
    sp.add_argument("--largest-only", dest="largest_only", action="store_true", default=None)

    sp = sub.add_parser("fragment", help="build one Krylov fragment")
    _add_common(sp)
    sp.add_argument("--L", type=int, dest="length")
    sp.add_argument("--regime")
    sp.add_argument("--root")
    sp.add_argument("--root-template", dest="root_template", choices=TEMPLATE_KINDS)
    sp.add_argument("--cap", type=int)
    sp.add_argument("--no-dump-edges", dest="dump_edges", action="store_false", default=None)

    sp = sub.add_parser("spectrum", help="diagonalize a fragment and run diagnostics")
    _add_common(sp)
    _add_model(sp)
    sp.add_argument("--L", type=int, dest="length")
    sp.add_argument("--root")
    sp.add_argument("--root-template", dest="root_template", choices=TEMPLATE_KINDS)
    sp.add_argument("--inversion", choices=["none", "even", "auto"])
    sp.add_argument("--window")
    sp.add_argument("--entropy-states", type=int, dest="entropy_states")
    sp.add_argument("--dump-matrix", dest="dump_matrix", action="store_true", default=None)

    sp = sub.add_parser("quench", help="quench evolution with observables")
    _add_common(sp)
    _add_model(sp)
    sp.add_argument("--L", type=int, dest="length")
    sp.add_argument("--init")
    sp.add_argument("--root-template", dest="root_template", choices=TEMPLATE_KINDS)
    sp.add_argument("--time-points", type=int, dest="time_points")
    sp.add_argument("--t-max", type=float, dest="t_max")
    sp.add_argument("--t-min", type=float, dest="t_min")
    sp.add_argument("--compare-exact", dest="compare_exact", action="store_true", default=None)
    sp.add_argument("--eth-states", type=int, dest="eth_states")
    sp.add_argument("--dr", type=float, help="position-spread width (disorder-averaged quench)")
    sp.add_argument("--realizations", type=int)

    sp = sub.add_parser("disorder-sweep", help="disorder-averaged diagnostics grid")
    _add_common(sp)
    _add_model(sp)
    sp.add_argument("--L-list", dest="lengths", type=lambda s: [int(x) for x in s.split(",")])
    sp.add_argument("--template", choices=TEMPLATE_KINDS)
    sp.add_argument(
        "--dr-grid", dest="dr_grid",
        type=lambda s: [float(x) for x in s.split(",")],
    )
    sp.add_argument("--realizations", type=int)
    sp.add_argument("--n-mid", type=int, dest="n_mid")
    sp.add_argument(
        "--diagnostics", type=lambda s: s.split(","), help="comma list: r,entropy"
    )

    sp = sub.add_parser("fss", help="finite-size scaling collapse")
    _add_common(sp)
    sp.add_argument("--input", help="sweep.json with entropy diagnostics")
    sp.add_argument("--selftest", action="store_true", default=None)
    sp.add_argument("--form", choices=["L_power", "distance_power"])
    sp.add_argument(
        "--dr-c-range", dest="dr_c_range",
        type=lambda s: [float(x) for x in s.split(",")],
    )
    sp.add_argument(
        "--nu-range", dest="nu_range",
        type=lambda s: [float(x) for x in s.split(",")],
    )
    sp.add_argument(
        "--grid", type=lambda s: [int(x) for x in s.split(",")]
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "config", "delta_over_omega", "v_over_delta")
    }
    try:
        config = resolve_config(command, args.config, overrides)
        # ratio shorthands mirror how parameter sets are usually quoted
        if getattr(args, "delta_over_omega", None) is not None:
            config["delta"] = config.get("omega", 1.0) * args.delta_over_omega
        if getattr(args, "v_over_delta", None) is not None:
            if config.get("delta") is None:
                raise ConfigError("--v-over-delta needs delta (or --delta-over-omega)")
            config["v"] = config["delta"] * args.v_over_delta
        return _RUNNERS[command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
