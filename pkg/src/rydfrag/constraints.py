"""Kinetic constraints, Krylov fragments, and fragmentation statistics.

A move exchanges two opposite spins on an NN bond (i, i+1) or an NNN bond
(i, i+2).  Whether a move is allowed depends only on the spins of nearby
sites and on the interaction regime; each regime's rule set is exactly the
condition that the regime's dimer charges are conserved:

    NN bond,  sites read (i-2, i-1 | i+2, i+3):
        NN_ONLY / WEAK_NONLOCAL : occ(i-1) == occ(i+2)
        NNN_EQUAL               : occ(i-2) == occ(i+3)
        NNN_HALF                : occ(i-2)+occ(i-1) == occ(i+2)+occ(i+3)
        NNN_GENERIC             : both NN_ONLY and NNN_EQUAL conditions
    NNN bond, sites read (i-2, i-1 | i+1 | i+3, i+4):
        NN_ONLY / WEAK_NONLOCAL : never
        NNN_EQUAL               : occ(i-2)+occ(i-1) == occ(i+3)+occ(i+4)
        NNN_HALF                : occ(i-2)+2*occ(i-1) == 2*occ(i+3)+occ(i+4)
        NNN_GENERIC             : occ(i-1) == occ(i+3) and occ(i-2) == occ(i+4)

Sites outside the chain count as down.  `derive_rule_chart` re-derives these
tables from diagonal-energy conservation instead of trusting them; the two
routes are cross-checked in the test suite.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .basis import (
    Regime,
    SectorKey,
    SpinConfig,
    charges,
    charges_arrays,
    enumerate_sector,
)
from .errors import ResourceError

DEFAULT_FRAGMENT_CAP = 5_000_000


@dataclass(frozen=True)
class BondMove:
    """Spin exchange on sites (site, site+span); `site` is 1-based."""

    site: int
    span: int  # 1 = NN bond, 2 = NNN bond

    def __post_init__(self):
        if self.span not in (1, 2):
            raise ValueError(f"span must be 1 or 2, got {self.span}")


@dataclass(frozen=True)
class MoveRule:
    """Allowed/forbidden flag for one exchange environment.

    For span 1 the environment lists occupations at sites
    (i-2, i-1, i+2, i+3); for span 2 at (i-2, i-1, i+1, i+3, i+4).  Rules
    come in mirror-symmetric pairs because the exchange is Hermitian and
    the chain rules are reflection covariant.
    """

    span: int
    environment: tuple[int, ...]
    allowed: bool

    def mirrored(self) -> "MoveRule":
        return MoveRule(self.span, tuple(reversed(self.environment)), self.allowed)


def _occ(bits: int, site: int, length: int) -> int:
    if site < 1 or site > length:
        return 0
    return (bits >> (site - 1)) & 1


def _nn_move_allowed(env: tuple[int, int, int, int], regime: Regime) -> bool:
    em2, em1, ep2, ep3 = env
    if regime is Regime.NNN_EQUAL:
        return em2 == ep3
    if regime is Regime.NNN_HALF:
        return em2 + em1 == ep2 + ep3
    if regime is Regime.NNN_GENERIC:
        return em1 == ep2 and em2 == ep3
    return em1 == ep2


def _nnn_move_allowed(env: tuple[int, int, int, int, int], regime: Regime) -> bool:
    em2, em1, _mid, ep3, ep4 = env
    if regime is Regime.NNN_EQUAL:
        return em2 + em1 == ep3 + ep4
    if regime is Regime.NNN_HALF:
        return em2 + 2 * em1 == 2 * ep3 + ep4
    if regime is Regime.NNN_GENERIC:
        return em1 == ep3 and em2 == ep4
    return False


def nn_environment(bits: int, site: int, length: int) -> tuple[int, int, int, int]:
    return (
        _occ(bits, site - 2, length),
        _occ(bits, site - 1, length),
        _occ(bits, site + 2, length),
        _occ(bits, site + 3, length),
    )


def nnn_environment(bits: int, site: int, length: int) -> tuple[int, int, int, int, int]:
    return (
        _occ(bits, site - 2, length),
        _occ(bits, site - 1, length),
        _occ(bits, site + 1, length),
        _occ(bits, site + 3, length),
        _occ(bits, site + 4, length),
    )


def allowed_moves(config: SpinConfig, regime: Regime) -> list[tuple[SpinConfig, BondMove]]:
    """All configurations reachable by one allowed flip-flop."""
    bits, length = config.bits, config.length
    out = []
    for site in range(1, length):
        p = site - 1
        if ((bits >> p) ^ (bits >> (p + 1))) & 1:
            if _nn_move_allowed(nn_environment(bits, site, length), regime):
                out.append(
                    (SpinConfig(bits ^ (0b11 << p), length), BondMove(site, 1))
                )
    if regime.uses_nnn_moves:
        for site in range(1, length - 1):
            p = site - 1
            if ((bits >> p) ^ (bits >> (p + 2))) & 1:
                if _nnn_move_allowed(nnn_environment(bits, site, length), regime):
                    out.append(
                        (SpinConfig(bits ^ (0b101 << p), length), BondMove(site, 2))
                    )
    return out


# ---------------------------------------------------------------------------
# rule chart: hard-coded regime tables vs energy-conservation derivation
# ---------------------------------------------------------------------------

def _canonical_env(span: int, env: tuple[int, ...]) -> tuple[int, ...]:
    """Mirror representative: the lexicographically smaller of env/reversed."""
    rev = tuple(reversed(env))
    return env if env <= rev else rev


def chart_for_regime(regime: Regime) -> dict[tuple[int, tuple[int, ...]], bool]:
    """The regime's move table over mirror-irreducible environments.

    Keys are (span, environment) with the environment canonicalized under
    reflection; 10 NN entries and 20 NNN entries.
    """
    chart = {}
    for env in np.ndindex(2, 2, 2, 2):
        key = (1, _canonical_env(1, tuple(int(e) for e in env)))
        chart[key] = _nn_move_allowed(key[1], regime)
    for env in np.ndindex(2, 2, 2, 2, 2):
        key = (2, _canonical_env(2, tuple(int(e) for e in env)))
        chart[key] = _nnn_move_allowed(key[1], regime)
    return chart


def derive_rule_chart(params, tolerance: float = 0.5) -> dict[tuple[int, tuple[int, ...]], bool]:
    """Derive the move table from diagonal-energy conservation.

    A flip-flop is allowed iff the diagonal energy cost |dE0| of exchanging
    the two spins, evaluated with the interaction strengths of `params`,
    stays below `tolerance * max(J_P, J_Q)`.  The energy differences only
    involve the NN strength V and the NNN strength V'; the exchanged pair
    itself and (for NNN moves) the middle site drop out.

    Raises ValueError when the tolerance window reaches the smallest
    nonzero |dE0| gap, i.e. the parameters sit between regimes.
    """
    from .model import analytic_couplings

    v = params.interaction.strength(1)
    v2 = params.interaction.strength(2)
    cpl = analytic_couplings(params)
    window = tolerance * max(cpl.j_p, cpl.j_q)
    if window <= 0:
        raise ValueError("tolerance window must be positive (is V = 0?)")

    gaps = []
    chart: dict[tuple[int, tuple[int, ...]], bool] = {}
    for env in np.ndindex(2, 2, 2, 2):
        em2, em1, ep2, ep3 = (int(e) for e in env)
        de = v * (em1 - ep2) + v2 * (em2 - em1 + ep2 - ep3)
        key = (1, _canonical_env(1, (em2, em1, ep2, ep3)))
        chart[key] = abs(de) <= window
        if abs(de) > 0:
            gaps.append(abs(de))
    for env in np.ndindex(2, 2, 2, 2, 2):
        em2, em1, mid, ep3, ep4 = (int(e) for e in env)
        de = v * (em1 - ep3) + v2 * (em2 - ep4)
        key = (2, _canonical_env(2, (em2, em1, mid, ep3, ep4)))
        # with V' = 0 the NNN flip-flop term itself is absent at second
        # order, not merely off-resonant
        chart[key] = v2 > 0 and abs(de) <= window
        if abs(de) > 0:
            gaps.append(abs(de))
    if gaps and window >= min(gaps):
        raise ValueError(
            f"tolerance window {window:.3g} reaches the smallest nonzero "
            f"|dE0| gap {min(gaps):.3g}: regime is ambiguous"
        )
    return chart


def rule_set(chart: dict[tuple[int, tuple[int, ...]], bool]) -> frozenset[MoveRule]:
    return frozenset(
        MoveRule(span, env, allowed) for (span, env), allowed in chart.items()
    )


# ---------------------------------------------------------------------------
# fragments
# ---------------------------------------------------------------------------

@dataclass
class KrylovFragment:
    """A connected component of the constrained-hopping graph.

    `basis` is sorted ascending by bit pattern; `edges_*` parallel arrays
    hold one entry per undirected edge with a < b.  The fragment identity
    is the minimal pattern `basis[0]`, reproducible across runs.
    """

    length: int
    regime: Regime
    basis: np.ndarray
    edges_a: np.ndarray
    edges_b: np.ndarray
    edge_site: np.ndarray
    edge_span: np.ndarray
    root: SpinConfig

    _index: dict[int, int] | None = None

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def sector(self) -> SectorKey:
        return charges(self.root, self.regime)

    @property
    def index(self) -> dict[int, int]:
        if self._index is None:
            self._index = {int(s): i for i, s in enumerate(self.basis)}
        return self._index

    def position(self, config: SpinConfig) -> int:
        """Index of `config` in the fragment basis (KeyError if absent)."""
        return self.index[config.bits]

    def configs(self):
        return (SpinConfig(int(s), self.length) for s in self.basis)

    def to_json_dict(self) -> dict:
        return {
            "root": SpinConfig(int(self.basis[0]), self.length).to_string(),
            "dimension": int(self.dimension),
            "length": self.length,
            "regime": self.regime.value,
            "basis": [f"{int(s):#x}" for s in self.basis],
            "edges": [
                [int(a), int(b), int(site), int(span)]
                for a, b, site, span in zip(
                    self.edges_a, self.edges_b, self.edge_site, self.edge_span
                )
            ],
        }


def build_fragment(
    root: SpinConfig, regime: Regime, cap: int | None = DEFAULT_FRAGMENT_CAP
) -> KrylovFragment:
    """Breadth-first closure of `root` under the allowed moves.

    Exceeding `cap` raises ResourceError rather than silently truncating.
    """
    length = root.length
    seen = {root.bits}
    queue = deque([root.bits])
    while queue:
        bits = queue.popleft()
        for nxt, _move in allowed_moves(SpinConfig(bits, length), regime):
            if nxt.bits not in seen:
                seen.add(nxt.bits)
                if cap is not None and len(seen) > cap:
                    raise ResourceError(
                        f"fragment of {root} exceeds cap {cap} states"
                    )
                queue.append(nxt.bits)
    basis = np.array(sorted(seen), dtype=np.int64)
    index = {int(s): i for i, s in enumerate(basis)}
    ea, eb, esite, espan = [], [], [], []
    for a, bits in enumerate(basis):
        for nxt, move in allowed_moves(SpinConfig(int(bits), length), regime):
            b = index[nxt.bits]
            if a < b:
                ea.append(a)
                eb.append(b)
                esite.append(move.site)
                espan.append(move.span)
    return KrylovFragment(
        length=length,
        regime=regime,
        basis=basis,
        edges_a=np.array(ea, dtype=np.int64),
        edges_b=np.array(eb, dtype=np.int64),
        edge_site=np.array(esite, dtype=np.int64),
        edge_span=np.array(espan, dtype=np.int64),
        root=root,
        _index=index,
    )


def fragment_from_states(
    states: np.ndarray, length: int, regime: Regime, root: SpinConfig
) -> KrylovFragment:
    """Package an already-known connected state set as a KrylovFragment."""
    basis = np.sort(np.asarray(states, dtype=np.int64))
    ea, eb, esite, espan = _sector_edges(basis, length, regime)
    keep = ea < eb
    return KrylovFragment(
        length=length,
        regime=regime,
        basis=basis,
        edges_a=ea[keep],
        edges_b=eb[keep],
        edge_site=esite[keep],
        edge_span=espan[keep],
        root=root,
    )


# ---------------------------------------------------------------------------
# whole-sector decomposition (vectorized)
# ---------------------------------------------------------------------------

def _shifted_bit(states: np.ndarray, p: int, length: int) -> np.ndarray:
    """Bit at position p for every state; out-of-range positions are down."""
    if p < 0 or p >= length:
        return np.zeros(len(states), dtype=np.int64)
    return (states >> p) & 1


def _sector_edges(states: np.ndarray, length: int, regime: Regime):
    """Directed allowed-move edges within a charge-closed state set.

    Because every allowed move conserves the regime charges, the target of
    an allowed move is guaranteed to sit inside the sector, so a sorted
    lookup suffices.
    """
    s = states
    ea, eb, esite, espan = [], [], [], []

    def emit(mask, targets, site, span):
        a = np.nonzero(mask)[0]
        if len(a) == 0:
            return
        b = np.searchsorted(s, targets)
        ea.append(a)
        eb.append(b)
        esite.append(np.full(len(a), site, dtype=np.int64))
        espan.append(np.full(len(a), span, dtype=np.int64))

    for site in range(1, length):
        p = site - 1
        differ = ((s >> p) ^ (s >> (p + 1))) & 1 == 1
        em2 = _shifted_bit(s, p - 2, length)
        em1 = _shifted_bit(s, p - 1, length)
        ep2 = _shifted_bit(s, p + 2, length)
        ep3 = _shifted_bit(s, p + 3, length)
        if regime is Regime.NNN_EQUAL:
            ok = em2 == ep3
        elif regime is Regime.NNN_HALF:
            ok = em2 + em1 == ep2 + ep3
        elif regime is Regime.NNN_GENERIC:
            ok = (em1 == ep2) & (em2 == ep3)
        else:
            ok = em1 == ep2
        mask = differ & ok
        emit(mask, s[mask] ^ (0b11 << p), site, 1)

    if regime.uses_nnn_moves:
        for site in range(1, length - 1):
            p = site - 1
            differ = ((s >> p) ^ (s >> (p + 2))) & 1 == 1
            em2 = _shifted_bit(s, p - 2, length)
            em1 = _shifted_bit(s, p - 1, length)
            ep3 = _shifted_bit(s, p + 3, length)
            ep4 = _shifted_bit(s, p + 4, length)
            if regime is Regime.NNN_EQUAL:
                ok = em2 + em1 == ep3 + ep4
            elif regime is Regime.NNN_HALF:
                ok = em2 + 2 * em1 == 2 * ep3 + ep4
            else:
                ok = (em1 == ep3) & (em2 == ep4)
            mask = differ & ok
            emit(mask, s[mask] ^ (0b101 << p), site, 2)

    if not ea:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy(), z.copy(), z.copy()
    return (
        np.concatenate(ea),
        np.concatenate(eb),
        np.concatenate(esite),
        np.concatenate(espan),
    )


def sector_fragment_labels(
    states: np.ndarray, length: int, regime: Regime
) -> np.ndarray:
    """Connected-component label per state of a charge-closed state set."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    states = np.asarray(states, dtype=np.int64)
    n = len(states)
    ea, eb, _, _ = _sector_edges(states, length, regime)
    graph = coo_matrix(
        (np.ones(len(ea), dtype=np.int8), (ea, eb)), shape=(n, n)
    )
    _, labels = connected_components(graph, directed=False)
    return labels


@dataclass(frozen=True)
class FragmentationStats:
    sector: SectorKey
    length: int
    d_s: int
    d_max: int
    n_fragments: int
    n_frozen: int

    @property
    def ratio(self) -> float:
        return self.d_max / self.d_s


def fragmentation_stats(
    length: int, key: SectorKey, states: np.ndarray | None = None
) -> FragmentationStats:
    """Partition a sector into fragments and report the headline counts.

    Frozen states are dimension-1 fragments.  `states` may be passed to
    reuse an existing enumeration.
    """
    if states is None:
        states = enumerate_sector(length, key)
    if len(states) == 0:
        raise ValueError(f"sector {key.label()} is empty for L={length}")
    labels = sector_fragment_labels(states, length, key.regime)
    sizes = np.bincount(labels)
    return FragmentationStats(
        sector=key,
        length=length,
        d_s=int(len(states)),
        d_max=int(sizes.max()),
        n_fragments=int(len(sizes)),
        n_frozen=int((sizes == 1).sum()),
    )


def largest_fragment_of_sector(
    length: int, key: SectorKey
) -> KrylovFragment:
    """The largest fragment of a sector (smallest-pattern tie break)."""
    states = enumerate_sector(length, key)
    if len(states) == 0:
        raise ValueError(f"sector {key.label()} is empty for L={length}")
    labels = sector_fragment_labels(states, length, key.regime)
    sizes = np.bincount(labels)
    winners = np.nonzero(sizes == sizes.max())[0]
    # smallest minimal pattern wins so the choice is reproducible
    chosen = min(winners, key=lambda lab: int(states[labels == lab][0]))
    members = states[labels == chosen]
    root = SpinConfig(int(members[0]), length)
    return fragment_from_states(members, length, key.regime, root)


def largest_sector_key(length: int, regime: Regime) -> SectorKey:
    """Largest sector for the NN-type regimes without a full-space scan.

    For NN_ONLY / WEAK_NONLOCAL the largest sector is (n_R = L/2,
    n_NN = L/4) for even L/2 and (L/2, (L-2)/4) for odd L/2.  Other regimes
    fall back to scanning all sector sizes.
    """
    from .basis import largest_sector

    if regime in (Regime.NN_ONLY, Regime.WEAK_NONLOCAL) and length % 2 == 0:
        n_nn = length // 4 if length % 4 == 0 else (length - 2) // 4
        return SectorKey(length // 2, (n_nn,), regime)
    return largest_sector(length, regime)[0]


def frozen_count_closed_form(length: int) -> int:
    """Frozen-state count L^2/32 + 3L/8 + 1 of the largest NN sector.

    Only stated for L/2 even; other lengths are rejected and must be
    counted empirically via fragmentation_stats.
    """
    if length % 4 != 0:
        raise ValueError(f"closed form requires L/2 even, got L={length}")
    value = length * length + 12 * length + 32
    assert value % 32 == 0
    return value // 32
