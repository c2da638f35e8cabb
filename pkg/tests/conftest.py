"""Shared brute-force oracles, kept deliberately independent of the package
internals: string-based configuration handling and explicit site loops, so
they can cross-check the optimized bit-twiddling implementations.
"""

import itertools

import numpy as np
import pytest

from rydfrag.basis import Regime, SpinConfig


def occ(s: str, site: int) -> int:
    """Occupation of 1-based site in a bitstring; outside the chain is 0."""
    if site < 1 or site > len(s):
        return 0
    return int(s[site - 1])


def charges_oracle(s: str, regime: Regime):
    n_r = s.count("1")
    n_nn = sum(occ(s, i) * occ(s, i + 1) for i in range(1, len(s)))
    n_nnn = sum(occ(s, i) * occ(s, i + 2) for i in range(1, len(s) - 1))
    if regime is Regime.NNN_EQUAL:
        return n_r, (n_nn + n_nnn,)
    if regime is Regime.NNN_HALF:
        return n_r, (2 * n_nn + n_nnn,)
    if regime is Regime.NNN_GENERIC:
        return n_r, (n_nn, n_nnn)
    return n_r, (n_nn,)


def swap_sites(s: str, i: int, j: int) -> str:
    out = list(s)
    out[i - 1], out[j - 1] = out[j - 1], out[i - 1]
    return "".join(out)


def moves_oracle(s: str, regime: Regime) -> set[str]:
    """Allowed one-move targets: exchanges that keep the regime charges."""
    targets = set()
    spans = (1, 2) if regime in (Regime.NNN_EQUAL, Regime.NNN_HALF, Regime.NNN_GENERIC) else (1,)
    for span in spans:
        for i in range(1, len(s) + 1 - span):
            j = i + span
            if s[i - 1] == s[j - 1]:
                continue
            t = swap_sites(s, i, j)
            if charges_oracle(t, regime) == charges_oracle(s, regime):
                targets.add(t)
    return targets


def fragment_oracle(root: str, regime: Regime) -> set[str]:
    seen = {root}
    stack = [root]
    while stack:
        s = stack.pop()
        for t in moves_oracle(s, regime):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def all_configs(length: int):
    for tup in itertools.product("01", repeat=length):
        yield "".join(tup)


def reduced_density_entropy(amplitudes, basis, length, cut):
    """Entropy via the full 2^L embedding and an explicit density matrix."""
    psi = np.zeros(1 << length, dtype=complex)
    for amp, pattern in zip(amplitudes, basis):
        psi[int(pattern)] = amp
    tensor = psi.reshape((1 << cut, 1 << (length - cut)), order="F")
    rho = tensor @ tensor.conj().T
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > 1e-12]
    return float(-(lam * np.log(lam)).sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_config(rng, length: int) -> SpinConfig:
    return SpinConfig(int(rng.integers(0, 1 << length)), length)
