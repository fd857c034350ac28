"""Simulation and analysis toolkit for a Kerr-bistable cCPT charge sensor."""

__version__ = "0.1.0"

from .model import (
    BiasPoint,
    CavityConfig,
    DeviceParams,
    Drive,
    calibrate_phi_zp,
    cpt_ground_energy,
    dbm_to_photon_flux,
    paper_device,
    resolve_bias,
)

__all__ = [
    "BiasPoint",
    "CavityConfig",
    "DeviceParams",
    "Drive",
    "calibrate_phi_zp",
    "cpt_ground_energy",
    "dbm_to_photon_flux",
    "paper_device",
    "resolve_bias",
    "__version__",
]
