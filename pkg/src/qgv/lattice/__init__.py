"""Lattice Monte Carlo for pure gauge U(1)/SU(2)/SU(3) and the 2D Abelian Higgs model."""
from .core import Action, Lattice, LatticeConfig, gauge_transform, plaquette, random_gauge_field, staple, wilson_action
from .ensemble import (
    Ensemble,
    LatticeFunctional,
    composite_correlator,
    generate_ensemble,
    integrated_autocorrelation,
    jackknife,
    load_ensemble,
    os_gram,
    plaquette_average,
    plaquette_string,
    plane_correlator,
    regenerate,
    save_ensemble,
)
from .observables import all_observables, composite_field, reflect
from .updates import sweep

__all__ = [
    "Action", "Lattice", "LatticeConfig", "gauge_transform", "plaquette", "random_gauge_field", "staple",
    "wilson_action", "Ensemble", "LatticeFunctional", "composite_correlator", "generate_ensemble",
    "integrated_autocorrelation", "jackknife", "load_ensemble", "os_gram", "plaquette_average",
    "plaquette_string", "plane_correlator", "regenerate", "save_ensemble", "all_observables",
    "composite_field", "reflect", "sweep",
]
