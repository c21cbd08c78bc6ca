from .fdtd import EmGrid, Source, attenuation_constant, fdtd_solve
from .measure import (RadiometryConfig, ThermoRecord, brightness_temperature, measure_phantom,
                      skin_temperature)
from .power import (PowerDensityField, grid_from_phantom, power_density_analytic,
                    power_density_from_field, power_density_maxwell)

__all__ = ["EmGrid", "Source", "attenuation_constant", "fdtd_solve", "RadiometryConfig",
           "ThermoRecord", "brightness_temperature", "measure_phantom", "skin_temperature",
           "PowerDensityField", "grid_from_phantom", "power_density_analytic",
           "power_density_from_field", "power_density_maxwell"]
