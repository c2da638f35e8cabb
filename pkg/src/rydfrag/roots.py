"""Named root-configuration presets for the commonly studied sectors."""

from __future__ import annotations

from .basis import SpinConfig

TEMPLATE_KINDS = ("eq8", "eq9", "neel3-magnon", "z3-hole")


def root_template(kind: str, length: int) -> SpinConfig:
    """Build a preset root configuration.

    eq8 (L = 4m): m three-site clusters "110" followed by m down spins.
    eq9 (L = 4m+2): the eq8 pattern with an extra "10" before the down
    block.  Both carry half filling and generate the largest fragment of
    the largest NN sector.

    neel3-magnon (L = 3k): "100" repeated, k isolated excitations.
    z3-hole (L = 3k+2): "110" repeated then "11", k isolated vacancies
    kept away from the chain ends.
    """
    if kind == "eq8":
        if length % 4 != 0 or length < 4:
            raise ValueError(f"eq8 template needs L = 4m, got L={length}")
        m = length // 4
        return SpinConfig.from_string("110" * m + "0" * m)
    if kind == "eq9":
        if length % 4 != 2 or length < 6:
            raise ValueError(f"eq9 template needs L = 4m+2, got L={length}")
        m = (length - 2) // 4
        return SpinConfig.from_string("110" * m + "10" + "0" * m)
    if kind == "neel3-magnon":
        if length % 3 != 0 or length < 3:
            raise ValueError(f"neel3-magnon template needs L = 3k, got L={length}")
        return SpinConfig.from_string("100" * (length // 3))
    if kind == "z3-hole":
        if length % 3 != 2 or length < 5:
            raise ValueError(f"z3-hole template needs L = 3k+2, got L={length}")
        return SpinConfig.from_string("110" * ((length - 2) // 3) + "11")
    raise ValueError(f"unknown template kind {kind!r}; choose from {TEMPLATE_KINDS}")


def cluster_root(length: int) -> SpinConfig:
    """eq8 or eq9, whichever parity matches the (even) chain length."""
    if length % 4 == 0:
        return root_template("eq8", length)
    if length % 4 == 2:
        return root_template("eq9", length)
    raise ValueError(f"cluster roots require even L, got L={length}")
