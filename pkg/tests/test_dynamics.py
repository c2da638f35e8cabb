import numpy as np
import pytest

from rydfrag.basis import Regime, SpinConfig, bit_columns
from rydfrag.constraints import build_fragment
from rydfrag.dynamics import (
    default_time_grid,
    eth_prediction,
    evolve,
    imbalance,
    imbalance_diagonal,
    quantum_fisher,
    time_averaged_imbalance,
)
from rydfrag.model import (
    InteractionProfile,
    ModelParams,
    analytic_couplings,
    build_effective_hamiltonian,
)


def nn_params(omega=1.0, delta=5.0, v=2.5, regime=Regime.NN_ONLY):
    return ModelParams(omega, delta, InteractionProfile.nn(v), regime)


def product_amplitudes(basis, config):
    amps = np.zeros(len(basis))
    amps[int(np.searchsorted(basis, config.bits))] = 1.0
    return amps


class TestImbalance:
    def test_initial_product_state_is_unity(self):
        init = SpinConfig.from_string("110100")
        basis = np.array(sorted([init.bits, init.flipped().bits]), dtype=np.int64)
        amps = product_amplitudes(basis, init)
        assert imbalance(amps, basis, 6, init) == pytest.approx(1.0)

    def test_flipped_state_is_minus_one(self):
        init = SpinConfig.from_string("110100")
        basis = np.array(sorted([init.bits, init.flipped().bits]), dtype=np.int64)
        amps = product_amplitudes(basis, init.flipped())
        assert imbalance(amps, basis, 6, init) == pytest.approx(-1.0)

    def test_balanced_mixture_is_zero(self):
        init = SpinConfig.from_string("10")
        basis = np.array([0b01, 0b10], dtype=np.int64)
        amps = np.array([1.0, 1.0]) / np.sqrt(2)
        assert imbalance(amps, basis, 2, init) == pytest.approx(0.0)

    def test_polarized_initial_rejected(self):
        with pytest.raises(ValueError, match="up and one down"):
            imbalance_diagonal(np.array([0b11]), 2, SpinConfig.from_string("11"))


class TestQuantumFisher:
    def test_product_state_has_zero_variance(self):
        init = SpinConfig.from_string("1100")
        basis = np.array([init.bits], dtype=np.int64)
        assert quantum_fisher(np.array([1.0]), basis, 4, init) == pytest.approx(0.0)

    def test_extremal_superposition_reaches_four(self):
        init = SpinConfig.from_string("110100")
        basis = np.array(sorted([init.bits, init.flipped().bits]), dtype=np.int64)
        amps = np.full(2, 1 / np.sqrt(2))
        assert quantum_fisher(amps, basis, 6, init) == pytest.approx(4.0)


class TestEvolve:
    def test_frozen_initial_state_static_densities(self):
        params = nn_params()
        init = SpinConfig.from_string("110011001100")
        frag = build_fragment(init, Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        cpl = analytic_couplings(params)
        res = evolve(init, h, default_time_grid(20), time_scale=1 / cpl.j_p)
        want = bit_columns(np.array([init.bits]), 12)[0]
        assert np.allclose(res.densities, want[None, :], atol=1e-12)
        assert np.allclose(res.imbalance, 1.0)

    def test_time_zero_matches_initial_expectations(self):
        params = nn_params()
        init = SpinConfig.from_string("110110110000")
        frag = build_fragment(init, Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        res = evolve(init, h, np.array([0.0, 1.0]))
        assert np.allclose(
            res.densities[0], bit_columns(np.array([init.bits]), 12)[0]
        )
        assert res.imbalance[0] == pytest.approx(1.0)
        assert res.fisher[0] == pytest.approx(0.0, abs=1e-12)
        assert res.entropy[0] == pytest.approx(0.0, abs=1e-10)

    def test_unitarity_energy_and_confinement(self):
        params = nn_params()
        init = SpinConfig.from_string("110110110000")
        frag = build_fragment(init, Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        cpl = analytic_couplings(params)
        res = evolve(init, h, default_time_grid(50), time_scale=1 / cpl.j_p)
        assert res.norm_drift < 1e-8
        assert res.energy_drift < 1e-8
        assert np.all(res.densities >= -1e-12)
        assert np.all(res.densities <= 1 + 1e-12)
        # densities sum to the conserved excitation number at every time
        assert np.allclose(res.densities.sum(axis=1), init.n_r, atol=1e-8)

    def test_initial_outside_basis_rejected(self):
        params = nn_params()
        frag = build_fragment(SpinConfig.from_string("0100"), Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        with pytest.raises(ValueError, match="basis"):
            evolve(SpinConfig.from_string("1100"), h, np.array([0.0]))

    def test_lanczos_matches_eigendecomposition(self):
        import rydfrag.dynamics as dyn

        params = nn_params()
        init = SpinConfig.from_string("110110110000")
        frag = build_fragment(init, Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        times = np.array([0.0, 3.0, 17.0, 60.0])
        dense = evolve(init, h, times)
        old = dyn.DENSE_EVOLVE_LIMIT
        dyn.DENSE_EVOLVE_LIMIT = 1
        try:
            krylov = evolve(init, h, times)
        finally:
            dyn.DENSE_EVOLVE_LIMIT = old
        assert np.abs(krylov.densities - dense.densities).max() < 1e-7
        assert np.abs(krylov.imbalance - dense.imbalance).max() < 1e-7
        assert krylov.norm_drift < 1e-8

    def test_descending_times_rejected(self):
        params = nn_params()
        frag = build_fragment(SpinConfig.from_string("0100"), Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        with pytest.raises(ValueError, match="ascending"):
            evolve(SpinConfig.from_string("0100"), h, np.array([1.0, 0.5]))


class TestEthPrediction:
    def test_frozen_fragment_returns_initial_expectation(self):
        params = nn_params()
        init = SpinConfig.from_string("110011001100")
        frag = build_fragment(init, Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        diag = imbalance_diagonal(frag.basis, 12, init)
        assert eth_prediction(h, init, diag, n_states=1) == pytest.approx(1.0)

    def test_n_states_validation(self):
        params = nn_params()
        init = SpinConfig.from_string("110011001100")
        frag = build_fragment(init, Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        diag = imbalance_diagonal(frag.basis, 12, init)
        with pytest.raises(ValueError, match="n_states"):
            eth_prediction(h, init, diag, n_states=2)

    def test_long_time_average_agrees_with_prediction(self):
        # measurement parameter set; cluster root on sixteen sites
        params = nn_params(delta=4.0, v=0.8)
        init = SpinConfig.from_string("110" * 4 + "0" * 4)
        frag = build_fragment(init, Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        cpl = analytic_couplings(params)
        diag = imbalance_diagonal(frag.basis, 16, init)
        pred = eth_prediction(h, init, diag, n_states=50)
        times = np.linspace(20.0, 40.0, 120)
        res = evolve(init, h, times, time_scale=1 / cpl.j_p)
        avg = time_averaged_imbalance(res, 20.0, 40.0)
        assert abs(avg - pred) < 0.05

    def test_window_selector(self):
        params = nn_params()
        init = SpinConfig.from_string("0100")
        frag = build_fragment(init, Regime.NN_ONLY)
        h = build_effective_hamiltonian(frag, params)
        res = evolve(init, h, np.array([0.0, 1.0, 2.0, 30.0]))
        with pytest.raises(ValueError, match="grid points"):
            time_averaged_imbalance(res, 5.0, 6.0)
