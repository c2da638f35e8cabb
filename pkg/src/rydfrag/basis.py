"""Bitstring bases for open-boundary spin chains with conserved dimer charges.

A configuration of L spins is stored as an integer bit pattern with bit i
holding site i+1, so bit 0 is site 1 (the leftmost site) and the string
"110100" reads left to right as sites 1..6.  Sites outside [1, L] act as
permanently-down virtual sites, which fixes the open-boundary convention
used by every kinetic rule in this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Exhaustive 2^L enumeration is the deliberate strategy at desk scale.
MAX_ENUM_SITES = 29
_CHUNK = 1 << 22


class Regime(str, Enum):
    """Interaction regime selecting the conserved dimer charges and move set.

    WEAK_NONLOCAL shares the NN_ONLY move set and charges: a nonlocal tail
    below the hopping scale cannot impose new kinetic constraints.
    """

    NN_ONLY = "nn"
    NNN_EQUAL = "nnn-equal"
    NNN_HALF = "nnn-half"
    NNN_GENERIC = "nnn-generic"
    WEAK_NONLOCAL = "weak-nonlocal"

    @property
    def uses_nnn_moves(self) -> bool:
        return self in (Regime.NNN_EQUAL, Regime.NNN_HALF, Regime.NNN_GENERIC)


@dataclass(frozen=True)
class SpinConfig:
    """An L-site classical spin configuration (1 = excited/up)."""

    bits: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"length must be positive, got {self.length}")
        if not 0 <= self.bits < (1 << self.length):
            raise ValueError(
                f"bit pattern {self.bits:#x} has set bits outside {self.length} sites"
            )

    @classmethod
    def from_string(cls, s: str) -> "SpinConfig":
        """Parse "110100": leftmost character is site 1."""
        if not s or set(s) - {"0", "1"}:
            raise ValueError(f"not a 0/1 string: {s!r}")
        bits = 0
        for i, c in enumerate(s):
            if c == "1":
                bits |= 1 << i
        return cls(bits, len(s))

    def to_string(self) -> str:
        return "".join("1" if (self.bits >> i) & 1 else "0" for i in range(self.length))

    def occupation(self, site: int) -> int:
        """Occupation of 1-based `site`; sites outside [1, L] read as down."""
        if site < 1 or site > self.length:
            return 0
        return (self.bits >> (site - 1)) & 1

    @property
    def n_r(self) -> int:
        return self.bits.bit_count()

    def reversed(self) -> "SpinConfig":
        return SpinConfig(reverse_bits(self.bits, self.length), self.length)

    def flipped(self) -> "SpinConfig":
        """Global spin flip (all sites toggled)."""
        return SpinConfig(self.bits ^ ((1 << self.length) - 1), self.length)

    def __str__(self) -> str:
        return self.to_string()


@dataclass(frozen=True)
class SectorKey:
    """Conserved-charge tuple (n_R plus regime-dependent dimer charges)."""

    n_r: int
    charges: tuple[int, ...]
    regime: Regime

    def __post_init__(self):
        want = 2 if self.regime is Regime.NNN_GENERIC else 1
        if len(self.charges) != want:
            raise ValueError(
                f"regime {self.regime.value} expects {want} dimer charge(s), "
                f"got {self.charges}"
            )

    def label(self) -> str:
        return f"nR={self.n_r}," + ",".join(str(c) for c in self.charges)


def reverse_bits(bits: int, length: int) -> int:
    """Mirror the pattern about the chain center (site i -> L+1-i)."""
    out = 0
    for i in range(length):
        if (bits >> i) & 1:
            out |= 1 << (length - 1 - i)
    return out


def dimer_counts(bits: int) -> tuple[int, int]:
    """(n_NN, n_NNN): adjacent and distance-2 pairs of excited sites."""
    return (bits & (bits >> 1)).bit_count(), (bits & (bits >> 2)).bit_count()


def combine_charges(n_nn: int, n_nnn: int, regime: Regime) -> tuple[int, ...]:
    if regime is Regime.NNN_EQUAL:
        return (n_nn + n_nnn,)
    if regime is Regime.NNN_HALF:
        return (2 * n_nn + n_nnn,)
    if regime is Regime.NNN_GENERIC:
        return (n_nn, n_nnn)
    return (n_nn,)


def charges(config: SpinConfig, regime: Regime) -> SectorKey:
    """Conserved charges of a configuration in the given regime."""
    n_nn, n_nnn = dimer_counts(config.bits)
    return SectorKey(config.n_r, combine_charges(n_nn, n_nnn, regime), regime)


# ---------------------------------------------------------------------------
# vectorized helpers over int64 state arrays
# ---------------------------------------------------------------------------

def bit_columns(states: np.ndarray, length: int) -> np.ndarray:
    """(D, L) float64 occupation matrix; column i holds site i+1."""
    states = np.asarray(states, dtype=np.int64)
    return ((states[:, None] >> np.arange(length, dtype=np.int64)[None, :]) & 1).astype(
        np.float64
    )


def charges_arrays(states: np.ndarray, regime: Regime):
    """(n_r, charge columns) for an array of states, as int64 arrays."""
    s = np.asarray(states, dtype=np.int64)
    n_r = np.bitwise_count(s).astype(np.int64)
    n_nn = np.bitwise_count(s & (s >> 1)).astype(np.int64)
    n_nnn = np.bitwise_count(s & (s >> 2)).astype(np.int64)
    if regime is Regime.NNN_EQUAL:
        return n_r, (n_nn + n_nnn,)
    if regime is Regime.NNN_HALF:
        return n_r, (2 * n_nn + n_nnn,)
    if regime is Regime.NNN_GENERIC:
        return n_r, (n_nn, n_nnn)
    return n_r, (n_nn,)


def reverse_bits_array(states: np.ndarray, length: int) -> np.ndarray:
    s = np.asarray(states, dtype=np.int64)
    out = np.zeros_like(s)
    for i in range(length):
        out |= ((s >> i) & 1) << (length - 1 - i)
    return out


def _check_enumerable(length: int):
    if length > MAX_ENUM_SITES:
        raise ValueError(
            f"exhaustive enumeration supports L <= {MAX_ENUM_SITES}, got L={length}"
        )


def enumerate_sector(length: int, key: SectorKey) -> np.ndarray:
    """All configurations with the charges of `key`, ascending by bit pattern.

    Scans the full 2^L space in chunks; the chunked scan preserves the
    canonical ascending order.  An unreachable key yields an empty array.
    """
    _check_enumerable(length)
    if key.n_r > length:
        return np.empty(0, dtype=np.int64)
    parts = []
    for lo in range(0, 1 << length, _CHUNK):
        s = np.arange(lo, min(lo + _CHUNK, 1 << length), dtype=np.int64)
        n_r, cols = charges_arrays(s, key.regime)
        mask = n_r == key.n_r
        for col, want in zip(cols, key.charges):
            mask &= col == want
        parts.append(s[mask])
    return np.concatenate(parts)


def sector_sizes(length: int, regime: Regime) -> dict[SectorKey, int]:
    """Dimension of every non-empty sector; the values sum to 2^L."""
    _check_enumerable(length)
    # pack (n_r, charges...) into one int so a bincount suffices per chunk
    width = 2 * length + 1
    counts: dict[int, int] = {}
    for lo in range(0, 1 << length, _CHUNK):
        s = np.arange(lo, min(lo + _CHUNK, 1 << length), dtype=np.int64)
        n_r, cols = charges_arrays(s, regime)
        packed = n_r
        for col in cols:
            packed = packed * width + col
        bc = np.bincount(packed)
        for k in np.nonzero(bc)[0]:
            counts[int(k)] = counts.get(int(k), 0) + int(bc[k])
    out = {}
    n_charges = 2 if regime is Regime.NNN_GENERIC else 1
    for packed, count in counts.items():
        vals = []
        for _ in range(n_charges):
            vals.append(packed % width)
            packed //= width
        out[SectorKey(packed, tuple(reversed(vals)), regime)] = count
    return out


def largest_sector(length: int, regime: Regime) -> tuple[SectorKey, int]:
    """The sector of maximal dimension.

    Exact dimension ties occur between adjacent dimer charges at half
    filling; ties break toward the larger charge tuple, the conventional
    designation of the maximally fragmented half-filling sector.
    """
    sizes = sector_sizes(length, regime)
    best = max(sizes.items(), key=lambda kv: (kv[1], kv[0].n_r, kv[0].charges))
    return best[0], best[1]


# ---------------------------------------------------------------------------
# inversion symmetrization
# ---------------------------------------------------------------------------

@dataclass
class InversionBasis:
    """Orthonormal inversion-even combinations over a reflection-closed basis.

    Palindromic configurations enter with weight 1; mirror pairs enter as
    (|a> + |b>)/sqrt(2).  `isometry` maps even-sector vectors back into the
    source basis, so H_even = B.T @ H @ B.
    """

    length: int
    source: np.ndarray            # sorted source basis (int64 patterns)
    palindromes: np.ndarray       # indices into source
    pair_lo: np.ndarray           # indices into source, lo < hi per pair
    pair_hi: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.palindromes) + len(self.pair_lo)

    def isometry(self):
        from scipy.sparse import csr_matrix

        n_pal, n_pair = len(self.palindromes), len(self.pair_lo)
        rows = np.concatenate([self.palindromes, self.pair_lo, self.pair_hi])
        cols = np.concatenate(
            [np.arange(n_pal), n_pal + np.arange(n_pair), n_pal + np.arange(n_pair)]
        )
        vals = np.concatenate(
            [np.ones(n_pal), np.full(2 * n_pair, 1.0 / np.sqrt(2.0))]
        )
        return csr_matrix((vals, (rows, cols)), shape=(len(self.source), self.dimension))

    def project_matrix(self, matrix):
        """Restrict a source-basis operator to the even sector (B.T H B)."""
        b = self.isometry()
        return (b.T @ matrix @ b).tocsr()

    def expand(self, even_vector: np.ndarray) -> np.ndarray:
        return self.isometry() @ even_vector


def symmetrize_inversion(basis: np.ndarray, length: int) -> InversionBasis:
    """Build the inversion-even combination basis over `basis`.

    The input must be closed under site reversal i -> L+1-i; otherwise the
    even combinations would leave the spanned space and we reject.
    """
    basis = np.sort(np.asarray(basis, dtype=np.int64))
    mirrored = reverse_bits_array(basis, length)
    pos = np.searchsorted(basis, mirrored)
    ok = (pos < len(basis)) & (basis[np.minimum(pos, len(basis) - 1)] == mirrored)
    if not np.all(ok):
        missing = SpinConfig(int(basis[~ok][0]), length)
        raise ValueError(
            f"basis not closed under site reversal: mirror of {missing} is absent"
        )
    pal = np.nonzero(mirrored == basis)[0]
    lo = np.nonzero(basis < mirrored)[0]
    hi = pos[lo]
    return InversionBasis(length, basis, pal, lo, hi)
