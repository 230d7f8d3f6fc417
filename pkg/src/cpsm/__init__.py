"""Compound Poisson and Ewens-Pitman random partition models.

Exact laws live in :mod:`cpsm.models`, special functions in :mod:`cpsm.specfn`,
samplers in :mod:`cpsm.samplers`, identity checks in :mod:`cpsm.identities`
and large-n diagnostics in :mod:`cpsm.asymptotics`.
"""

from .models import (
    DomainError,
    EpParams,
    Multiplicities,
    NbParams,
    ep_k_pmf,
    ep_pmf,
    ls_pmf,
    nb_k_pmf,
    nb_pmf,
    validate_ep,
    validate_nb,
)
from .samplers import rng_stream
from .specfn import gfc_table

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "EpParams",
    "NbParams",
    "Multiplicities",
    "validate_ep",
    "validate_nb",
    "ep_pmf",
    "ls_pmf",
    "nb_pmf",
    "ep_k_pmf",
    "nb_k_pmf",
    "gfc_table",
    "rng_stream",
]
