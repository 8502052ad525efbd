"""Physical parameters: lasers, cross-sections, and internal NV rates.

All quantities are stored in SI units (Hz, W, m, m2, s). Profile files use
unit-suffixed keys (MHz, MHz/mW, m2) matching the conventions of the
photophysics literature; `load_profile` / `save_profile` do the conversion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources

from .errors import ConfigError, ProfileError

# Effective focal-spot areas, fixed by requiring that each tabulated
# cross-section reproduce its tabulated rate-per-power at the corresponding
# wavelength (A = sigma * lambda / (h c * rate_per_power)).
DEFAULT_SPOT_AREA_GREEN_M2 = 1.9646e-13
DEFAULT_SPOT_AREA_IR_M2 = 7.8559e-13

GREEN_WAVELENGTH_M = 532e-9
IR_WAVELENGTH_M = 1064e-9


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _finite(x):
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(frozen=True)
class LaserField:
    """One excitation line. Intensity (W/m2) is derived, never stored."""

    wavelength_m: float
    power_w: float
    spot_area_m2: float

    def __post_init__(self):
        _require(_finite(self.wavelength_m) and self.wavelength_m > 0,
                 f"wavelength must be finite and > 0, got {self.wavelength_m}")
        _require(_finite(self.power_w) and self.power_w >= 0,
                 f"laser power must be finite and >= 0, got {self.power_w}")
        _require(_finite(self.spot_area_m2) and self.spot_area_m2 > 0,
                 f"spot area must be finite and > 0, got {self.spot_area_m2}")

    @property
    def intensity_w_m2(self):
        return self.power_w / self.spot_area_m2

    def with_power(self, power_w):
        return replace(self, power_w=power_w)


@dataclass(frozen=True)
class CrossSectionSet:
    """Ionization/recombination cross-sections (m2) for green and IR."""

    sigma_ionize_green_m2: float
    sigma_ionize_ir_m2: float
    sigma_recombine_green_m2: float
    sigma_recombine_ir_m2: float

    def __post_init__(self):
        for name in self.field_names():
            v = getattr(self, name)
            _require(_finite(v) and v >= 0, f"{name} must be finite and >= 0, got {v}")

    @staticmethod
    def field_names():
        return ("sigma_ionize_green_m2", "sigma_ionize_ir_m2",
                "sigma_recombine_green_m2", "sigma_recombine_ir_m2")

    def as_array(self):
        import numpy as np
        return np.array([getattr(self, n) for n in self.field_names()])

    @classmethod
    def from_array(cls, a):
        return cls(*[float(v) for v in a])


@dataclass(frozen=True)
class OpticalSetup:
    """Wavelengths and effective focal-spot areas of the two excitation lines."""

    green_wavelength_m: float = GREEN_WAVELENGTH_M
    ir_wavelength_m: float = IR_WAVELENGTH_M
    spot_area_green_m2: float = DEFAULT_SPOT_AREA_GREEN_M2
    spot_area_ir_m2: float = DEFAULT_SPOT_AREA_IR_M2

    def green(self, power_w):
        return LaserField(self.green_wavelength_m, power_w, self.spot_area_green_m2)

    def ir(self, power_w):
        return LaserField(self.ir_wavelength_m, power_w, self.spot_area_ir_m2)


@dataclass(frozen=True)
class PhotophysicsParams:
    """All transition rates of the seven-level model.

    Excitation rates are given per watt of green power (the green beam drives
    both charge states); optically induced ionization/recombination rates come
    from `cross_sections` via the photon-rate formula. The only spin-dependent
    transition is the intersystem crossing from the NV- excited state.
    """

    k_excite_minus_per_w: float   # Hz per W green, NV- ground -> excited
    k_excite_zero_per_w: float    # Hz per W green, NV0 ground -> excited
    k_fluor_minus: float          # Hz, NV- excited -> ground (radiative)
    k_fluor_zero: float           # Hz, NV0 excited -> ground (radiative)
    k_isc_ms0: float              # Hz, NV- excited m_s=0 -> singlet
    k_isc_ms1: float              # Hz, NV- excited m_s=+-1 -> singlet
    k_singlet_decay: float        # Hz, singlet -> ground (total)
    singlet_branch_ms0: float     # fraction of singlet decay into ground m_s=0
    cross_sections: CrossSectionSet
    recombination_branch_ms0: float = 1.0 / 3.0  # spin-blind recombination

    def __post_init__(self):
        for name in ("k_excite_minus_per_w", "k_excite_zero_per_w",
                     "k_fluor_minus", "k_fluor_zero", "k_isc_ms0",
                     "k_isc_ms1", "k_singlet_decay"):
            v = getattr(self, name)
            _require(_finite(v) and v >= 0, f"{name} must be finite and >= 0, got {v}")
        for name in ("singlet_branch_ms0", "recombination_branch_ms0"):
            v = getattr(self, name)
            _require(_finite(v) and 0.0 <= v <= 1.0,
                     f"{name} must lie in [0, 1], got {v}")
        _require(self.k_isc_ms1 >= self.k_isc_ms0,
                 "spin selectivity requires k_isc_ms1 >= k_isc_ms0")
        _require(isinstance(self.cross_sections, CrossSectionSet),
                 "cross_sections must be a CrossSectionSet")

    def with_cross_sections(self, cs: CrossSectionSet) -> "PhotophysicsParams":
        return replace(self, cross_sections=cs)


@dataclass(frozen=True)
class Profile:
    """A named parameter profile: internal rates + beam geometry."""

    label: str
    params: PhotophysicsParams
    setup: OpticalSetup = field(default_factory=OpticalSetup)


_MHZ = 1e6
_MHZ_PER_MW = 1e9  # MHz/mW in Hz/W

# profile key -> (attribute path, scale to SI)
_RATE_KEYS = {
    "k_excite_minus_mhz_per_mw": ("k_excite_minus_per_w", _MHZ_PER_MW),
    "k_excite_zero_mhz_per_mw": ("k_excite_zero_per_w", _MHZ_PER_MW),
    "k_fluor_minus_mhz": ("k_fluor_minus", _MHZ),
    "k_fluor_zero_mhz": ("k_fluor_zero", _MHZ),
    "k_isc_ms0_mhz": ("k_isc_ms0", _MHZ),
    "k_isc_ms1_mhz": ("k_isc_ms1", _MHZ),
    "k_singlet_decay_mhz": ("k_singlet_decay", _MHZ),
    "singlet_branch_ms0": ("singlet_branch_ms0", 1.0),
    "recombination_branch_ms0": ("recombination_branch_ms0", 1.0),
}

_SIGMA_KEYS = {
    "sigma_ionize_green_m2": "sigma_ionize_green_m2",
    "sigma_ionize_ir_m2": "sigma_ionize_ir_m2",
    "sigma_recombine_green_m2": "sigma_recombine_green_m2",
    "sigma_recombine_ir_m2": "sigma_recombine_ir_m2",
}

_SETUP_KEYS = {
    "green_wavelength_nm": ("green_wavelength_m", 1e-9),
    "ir_wavelength_nm": ("ir_wavelength_m", 1e-9),
    "spot_area_green_m2": ("spot_area_green_m2", 1.0),
    "spot_area_ir_m2": ("spot_area_ir_m2", 1.0),
}

_ALLOWED_KEYS = {"label"} | set(_RATE_KEYS) | set(_SIGMA_KEYS) | set(_SETUP_KEYS)


def profile_from_dict(doc: dict) -> Profile:
    unknown = sorted(set(doc) - _ALLOWED_KEYS)
    if unknown:
        raise ProfileError(f"unknown profile keys: {', '.join(unknown)}")
    missing = sorted((set(_RATE_KEYS) | set(_SIGMA_KEYS)) - set(doc))
    if missing:
        raise ProfileError(f"missing profile keys: {', '.join(missing)}")
    try:
        rates = {attr: float(doc[key]) * scale
                 for key, (attr, scale) in _RATE_KEYS.items()}
        sigmas = {attr: float(doc[key]) for key, attr in _SIGMA_KEYS.items()}
        setup_kwargs = {attr: float(doc[key]) * scale
                        for key, (attr, scale) in _SETUP_KEYS.items() if key in doc}
        params = PhotophysicsParams(cross_sections=CrossSectionSet(**sigmas), **rates)
    except ConfigError as exc:
        raise ProfileError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ProfileError(f"bad profile value: {exc}") from exc
    return Profile(label=str(doc.get("label", "custom")), params=params,
                   setup=OpticalSetup(**setup_kwargs))


def profile_to_dict(profile: Profile) -> dict:
    doc = {"label": profile.label}
    for key, (attr, scale) in _RATE_KEYS.items():
        doc[key] = getattr(profile.params, attr) / scale
    for key, attr in _SIGMA_KEYS.items():
        doc[key] = getattr(profile.params.cross_sections, attr)
    for key, (attr, scale) in _SETUP_KEYS.items():
        doc[key] = getattr(profile.setup, attr) / scale
    return doc


def load_profile(path) -> Profile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProfileError(f"cannot read profile {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileError(f"profile {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProfileError(f"profile {path} must be a JSON object")
    return profile_from_dict(doc)


def save_profile(profile: Profile, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile_to_dict(profile), fh, indent=2, sort_keys=True)
        fh.write("\n")


def builtin_profile(name: str) -> Profile:
    """Load one of the shipped profiles ('shallow' or 'bulk')."""
    ref = resources.files("nvcharge").joinpath(f"profiles/{name}.json")
    try:
        doc = json.loads(ref.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ProfileError(f"no builtin profile named {name!r}") from exc
    return profile_from_dict(doc)
