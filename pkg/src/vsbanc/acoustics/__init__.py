"""Acoustic plant model: cavity modes, baffled monopole radiation, optimal
control ground truth and FIR path synthesis."""

from .fir import PathSet, fir_from_frequency_response, fir_point_to_point, fractional_delay_fir
from .geometry import CavitySpec, EvalGrid, Medium, Opening, SourceLayout, controllable_limit
from .modal import (
    ModalField,
    cavity_pressure,
    eigenfunction,
    opening_volume_velocity,
    primary_modal_field,
    volume_velocity_from_field,
    wavenumber_y,
)
from .optimal import condition_number, control_cost, noise_reduction, optimal_source_strengths
from .plant import PLANT_MODES, build_pathset, fir_response
from .radiation import BAFFLE_FACTOR, equivalent_primary_strength, monopole_transfer, outside_pressure, transfer_matrices

__all__ = [
    "BAFFLE_FACTOR", "CavitySpec", "EvalGrid", "Medium", "ModalField", "Opening", "PathSet", "PLANT_MODES",
    "SourceLayout", "build_pathset", "cavity_pressure", "condition_number", "control_cost",
    "controllable_limit", "eigenfunction", "equivalent_primary_strength",
    "fir_from_frequency_response", "fir_point_to_point", "fir_response", "fractional_delay_fir",
    "monopole_transfer", "noise_reduction", "opening_volume_velocity", "optimal_source_strengths",
    "outside_pressure", "primary_modal_field", "transfer_matrices", "volume_velocity_from_field",
    "wavenumber_y",
]
