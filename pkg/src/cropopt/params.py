"""Crop parameter container, validation, and file I/O.

A crop file is a flat YAML document whose keys are exactly the
:class:`CropParams` field names.  The loader rejects missing or unknown
fields and invariant violations, reporting every problem at once.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

__all__ = ["CropParams", "ParamError", "load_crop_file", "save_crop_file",
           "packaged_crop", "packaged_crop_path"]


class ParamError(ValueError):
    """Raised on crop-file validation failure; carries per-field messages."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class CropParams:
    """Species/cultivar constants of the daily crop growth model.

    Units: temperatures in deg C, thermal-time quantities in deg C * d,
    rue in g biomass per MJ intercepted radiation.
    """

    t_sum: float            # cumulative temperature until maturity
    harvest_index: float    # marketable fraction of biomass
    i50a: float             # thermal time for leaf development
    i50b_init: float        # initial leaf-senescence state
    t_base: float           # base temperature for thermal-time accrual
    t_opt: float            # optimal growth temperature
    rue: float              # radiation-use efficiency
    i50_max_heat: float     # max daily i50b increase under heat stress
    i50_max_water: float    # max daily i50b increase under drought stress
    t_heat: float           # heat-stress onset temperature
    t_extreme: float        # total heat-induced growth failure
    s_co2: float            # CO2 sensitivity per ppm
    s_water: float          # drought sensitivity
    f_solar_max: float      # max fraction of radiation interception

    def validate(self) -> list[str]:
        """Return a list of invariant violations (empty when valid)."""
        errors = []
        if not (self.t_base < self.t_opt < self.t_heat < self.t_extreme):
            errors.append(
                "require t_base < t_opt < t_heat < t_extreme, got "
                f"t_base={self.t_base}, t_opt={self.t_opt}, "
                f"t_heat={self.t_heat}, t_extreme={self.t_extreme}")
        if not 0.0 < self.harvest_index < 1.0:
            errors.append(f"harvest_index must be in (0, 1), got {self.harvest_index}")
        if not 0.0 < self.f_solar_max <= 1.0:
            errors.append(f"f_solar_max must be in (0, 1], got {self.f_solar_max}")
        if not self.t_sum > self.i50a > 0.0:
            errors.append(f"require t_sum > i50a > 0, got t_sum={self.t_sum}, i50a={self.i50a}")
        if self.i50b_init < 0.0:
            errors.append(f"i50b_init must be >= 0, got {self.i50b_init}")
        if self.rue <= 0.0:
            errors.append(f"rue must be > 0, got {self.rue}")
        if not 0.0 <= self.s_water <= 1.0:
            errors.append(f"s_water must be in [0, 1], got {self.s_water}")
        if self.i50_max_heat < 0.0 or self.i50_max_water < 0.0:
            errors.append("i50_max_heat and i50_max_water must be >= 0")
        if self.s_co2 < 0.0:
            errors.append(f"s_co2 must be >= 0, got {self.s_co2}")
        return errors

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ParamError(errors)


_FIELDS = [f.name for f in dataclasses.fields(CropParams)]


def _params_from_mapping(doc: dict, source: str) -> CropParams:
    errors = []
    if not isinstance(doc, dict):
        raise ParamError([f"{source}: expected a mapping of crop fields"])
    missing = [k for k in _FIELDS if k not in doc]
    unknown = [k for k in doc if k not in _FIELDS]
    errors += [f"{source}: missing field '{k}'" for k in missing]
    errors += [f"{source}: unknown field '{k}'" for k in unknown]
    values = {}
    for k in _FIELDS:
        if k in doc:
            try:
                values[k] = float(doc[k])
            except (TypeError, ValueError):
                errors.append(f"{source}: field '{k}' is not a number: {doc[k]!r}")
    if errors:
        raise ParamError(errors)
    try:
        return CropParams(**values)
    except ParamError as exc:
        raise ParamError([f"{source}: {e}" for e in exc.errors]) from None


def load_crop_file(path: str | Path) -> CropParams:
    """Load and validate a crop parameter file."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ParamError([f"crop file not found: {path}"]) from None
    except yaml.YAMLError as exc:
        raise ParamError([f"{path}: invalid YAML: {exc}"]) from None
    return _params_from_mapping(doc, str(path))


def save_crop_file(params: CropParams, path: str | Path) -> None:
    lines = [f"{k}: {getattr(params, k)!r}" for k in _FIELDS]
    Path(path).write_text("\n".join(lines) + "\n")


def packaged_crop_path(name: str = "wheat_batten"):
    """Filesystem path of a crop file shipped with the package."""
    return resources.files("cropopt.data") / f"{name}.yaml"


def packaged_crop(name: str = "wheat_batten") -> CropParams:
    """Load a crop parameter set shipped with the package."""
    ref = packaged_crop_path(name)
    doc = yaml.safe_load(ref.read_text())
    return _params_from_mapping(doc, f"packaged:{name}")
