"""Registry of the sixteen ROM formulations."""

from __future__ import annotations

from dataclasses import dataclass

from .assembly import StabilizationKind

K = StabilizationKind


@dataclass(frozen=True)
class Formulation:
    name: str
    family: str  # "continuous", "lspg" or "apg"
    kind: StabilizationKind

    @property
    def uses_tau(self) -> bool:
        return self.kind is not K.NONE

    @property
    def uses_tau_apg(self) -> bool:
        return self.family == "apg"

    @property
    def dt_is_fixed(self) -> bool:
        """Stabilized APG sweeps (tau, tau_apg) at one time step."""
        return self.family == "apg" and self.uses_tau


_ENTRIES = [
    ("galerkin", "continuous", K.NONE),
    ("supg", "continuous", K.SUPG),
    ("gls_ds", "continuous", K.GLS_DS),
    ("adj_ds", "continuous", K.ADJ_DS),
    ("gls_st", "continuous", K.GLS_ST),
    ("adj_st", "continuous", K.ADJ_ST),
    ("g-lspg", "lspg", K.NONE),
    ("supg-lspg", "lspg", K.SUPG),
    ("gls_ds-lspg", "lspg", K.GLS_DS),
    ("adj_ds-lspg", "lspg", K.ADJ_DS),
    ("gls_st-lspg", "lspg", K.GLS_ST),
    ("adj_st-lspg", "lspg", K.ADJ_ST),
    ("g-apg", "apg", K.NONE),
    ("supg-apg", "apg", K.SUPG),
    ("gls_st-apg", "apg", K.GLS_ST),
    ("adj_st-apg", "apg", K.ADJ_ST),
]

FORMULATIONS: dict[str, Formulation] = {name: Formulation(name, fam, kind) for name, fam, kind in _ENTRIES}
FORMULATION_NAMES: tuple[str, ...] = tuple(FORMULATIONS)


def get_formulation(name: str) -> Formulation:
    key = name.strip().lower()
    try:
        return FORMULATIONS[key]
    except KeyError:
        if key in ("gls_ds-apg", "adj_ds-apg"):
            raise ValueError(
                f"{name!r}: APG is only built on the Galerkin, SUPG, GLS_ST and ADJ_ST FOMs"
            ) from None
        raise ValueError(f"unknown formulation {name!r}; expected one of {', '.join(FORMULATION_NAMES)}") from None
