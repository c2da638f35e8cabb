import itertools

import numpy as np
import pytest

from conftest import all_configs, charges_oracle, random_config
from rydfrag.basis import (
    Regime,
    SectorKey,
    SpinConfig,
    charges,
    dimer_counts,
    enumerate_sector,
    largest_sector,
    reverse_bits_array,
    sector_sizes,
    symmetrize_inversion,
)


class TestSpinConfig:
    def test_string_round_trip(self):
        c = SpinConfig.from_string("110100")
        assert c.bits == 0b001011
        assert c.to_string() == "110100"
        assert c.length == 6
        assert c.n_r == 3

    def test_site_indexing_and_virtual_sites(self):
        c = SpinConfig.from_string("10")
        assert c.occupation(1) == 1
        assert c.occupation(2) == 0
        assert c.occupation(0) == 0
        assert c.occupation(3) == 0

    def test_reverse_and_flip(self):
        c = SpinConfig.from_string("1100")
        assert c.reversed().to_string() == "0011"
        assert c.flipped().to_string() == "0011"
        assert SpinConfig.from_string("1010").reversed().to_string() == "0101"

    @pytest.mark.parametrize("bits,length", [(4, 2), (-1, 3), (0, 0)])
    def test_invalid_rejected(self, bits, length):
        with pytest.raises(ValueError):
            SpinConfig(bits, length)

    def test_bad_string_rejected(self):
        with pytest.raises(ValueError):
            SpinConfig.from_string("10x1")


class TestCharges:
    def test_cluster_state(self):
        # three clusters of two excitations: n_R=6, n_NN=3
        key = charges(SpinConfig.from_string("110110110000"), Regime.NN_ONLY)
        assert key == SectorKey(6, (3,), Regime.NN_ONLY)

    def test_all_down(self):
        assert charges(SpinConfig(0, 4), Regime.NN_ONLY) == SectorKey(
            0, (0,), Regime.NN_ONLY
        )

    def test_spaced_excitations(self):
        key = charges(SpinConfig.from_string("100100100100"), Regime.NN_ONLY)
        assert key == SectorKey(4, (0,), Regime.NN_ONLY)

    @pytest.mark.parametrize("regime", list(Regime))
    def test_matches_oracle(self, rng, regime):
        for _ in range(200):
            length = int(rng.integers(1, 15))
            c = random_config(rng, length)
            n_r, ch = charges_oracle(c.to_string(), regime)
            key = charges(c, regime)
            assert (key.n_r, key.charges) == (n_r, ch)

    def test_sector_key_charge_arity(self):
        with pytest.raises(ValueError):
            SectorKey(1, (0, 0), Regime.NN_ONLY)
        with pytest.raises(ValueError):
            SectorKey(1, (0,), Regime.NNN_GENERIC)


class TestEnumerateSector:
    def test_two_adjacent_on_four_sites(self):
        got = enumerate_sector(4, SectorKey(2, (1,), Regime.NN_ONLY))
        assert got.tolist() == [0b0011, 0b0110, 0b1100]
        assert [SpinConfig(int(s), 4).to_string() for s in got] == [
            "1100", "0110", "0011",
        ]

    def test_single_excitation_two_sites(self):
        got = enumerate_sector(2, SectorKey(1, (0,), Regime.NN_ONLY))
        assert got.tolist() == [1, 2]

    def test_matches_brute_force(self):
        key = SectorKey(6, (3,), Regime.NN_ONLY)
        got = {SpinConfig(int(s), 12).to_string() for s in enumerate_sector(12, key)}
        want = {
            s for s in all_configs(12)
            if charges_oracle(s, Regime.NN_ONLY) == (6, (3,))
        }
        assert got == want
        assert len(got) == 350

    def test_empty_sector(self):
        assert len(enumerate_sector(4, SectorKey(4, (0,), Regime.NN_ONLY))) == 0

    def test_ascending_order(self):
        got = enumerate_sector(10, SectorKey(5, (2,), Regime.NN_ONLY))
        assert np.all(np.diff(got) > 0)


class TestSectorSizes:
    @pytest.mark.parametrize("regime", list(Regime))
    @pytest.mark.parametrize("length", [4, 7, 10])
    def test_partition_of_full_space(self, length, regime):
        sizes = sector_sizes(length, regime)
        assert sum(sizes.values()) == 1 << length
        # every key enumerates to its recorded size
        for key, count in list(sizes.items())[:10]:
            assert len(enumerate_sector(length, key)) == count

    def test_largest_sector(self):
        key, size = largest_sector(12, Regime.NN_ONLY)
        assert (key.n_r, key.charges) == (6, (3,))
        assert size == 350


class TestSpinFlip:
    def test_flip_charge_formula(self, rng):
        # n_NN(flip) = n_NN + L - 1 - 2 n_R + occ(1) + occ(L)
        for _ in range(300):
            length = int(rng.integers(2, 16))
            c = random_config(rng, length)
            n_nn, _ = dimer_counts(c.bits)
            flipped_nn, _ = dimer_counts(c.flipped().bits)
            boundary = c.occupation(1) + c.occupation(length)
            assert flipped_nn == n_nn + length - 1 - 2 * c.n_r + boundary

    def test_flipped_magnon_basis_cardinality(self):
        # global flip maps the isolated-excitation sector one-to-one onto
        # the isolated-vacancy set of the same size
        magnon = enumerate_sector(9, SectorKey(3, (0,), Regime.NN_ONLY))
        flipped = np.sort(magnon ^ ((1 << 9) - 1))
        assert len(np.unique(flipped)) == len(magnon) == 35


class TestSymmetrizeInversion:
    def test_single_reflection_pair(self):
        basis = np.array([0b01, 0b10])
        inv = symmetrize_inversion(basis, 2)
        assert inv.dimension == 1
        b = inv.isometry().toarray()
        assert np.allclose(b[:, 0], [1 / np.sqrt(2)] * 2)

    def test_rejects_unclosed_basis(self):
        with pytest.raises(ValueError, match="reversal"):
            symmetrize_inversion(np.array([0b001]), 3)

    def test_counts_match_brute_force(self, rng):
        for _ in range(20):
            length = int(rng.integers(2, 12))
            seeds = {int(rng.integers(0, 1 << length)) for _ in range(6)}
            closed = set()
            for s in seeds:
                closed.add(s)
                closed.add(int(reverse_bits_array(np.array([s]), length)[0]))
            basis = np.array(sorted(closed))
            inv = symmetrize_inversion(basis, length)
            n_pal = sum(
                1 for s in closed
                if int(reverse_bits_array(np.array([s]), length)[0]) == s
            )
            assert inv.dimension == n_pal + (len(closed) - n_pal) // 2

    def test_isometry_is_orthonormal(self):
        basis = enumerate_sector(8, SectorKey(3, (0,), Regime.NN_ONLY))
        inv = symmetrize_inversion(basis, 8)
        b = inv.isometry()
        gram = (b.T @ b).toarray()
        assert np.allclose(gram, np.eye(inv.dimension), atol=1e-14)

    def test_magnon_sector_even_count_small(self):
        # L=12 third-filling sector: check against explicit palindrome count
        basis = enumerate_sector(12, SectorKey(4, (0,), Regime.NN_ONLY))
        inv = symmetrize_inversion(basis, 12)
        pal = sum(
            1 for s in basis
            if int(reverse_bits_array(np.array([int(s)]), 12)[0]) == int(s)
        )
        assert inv.dimension == pal + (len(basis) - pal) // 2
