"""Harmonic-space simulation of Gaussian isotropic fields on the sphere.

A mean-zero isotropic Gaussian field is fully described by its angular power
spectrum C_l: the coefficients a_lm are independent complex Gaussians over
l and m >= 0 with E|a_lm|^2 = C_l, a_l0 real, and the negative orders fixed
by a_{l,-m} = (-1)^m conj(a_lm).  Only m >= 0 is ever stored, so the
conjugation symmetry cannot be broken by construction.  The monopole l = 0
is excluded throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "AngularPowerSpectrum",
    "HarmonicCoefficients",
    "sample_alms",
    "estimate_cl",
    "normalize_coeffs",
]


@dataclass(frozen=True)
class AngularPowerSpectrum:
    """Angular power spectrum C_l for l = 1..lmax; strictly positive."""

    values: tuple[float, ...]  # values[l-1] = C_l

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("spectrum needs at least l = 1")
        if any(not np.isfinite(v) or v <= 0.0 for v in self.values):
            raise ValueError("every C_l must be finite and strictly positive")

    @classmethod
    def flat(cls, lmax: int, value: float = 1.0) -> "AngularPowerSpectrum":
        return cls((value,) * lmax)

    @classmethod
    def power_law(
        cls, lmax: int, alpha: float, amplitude: float = 1.0
    ) -> "AngularPowerSpectrum":
        """C_l = amplitude * l^(-alpha)."""
        return cls(tuple(amplitude * float(l) ** -alpha for l in range(1, lmax + 1)))

    @property
    def lmax(self) -> int:
        return len(self.values)

    def __getitem__(self, l: int) -> float:
        if not 1 <= l <= self.lmax:
            raise KeyError(f"C_l undefined for l = {l} (lmax = {self.lmax})")
        return self.values[l - 1]

    def to_array(self) -> np.ndarray:
        """C_l as a float array indexed by l-1."""
        return np.array(self.values)


@dataclass(frozen=True)
class HarmonicCoefficients:
    """Coefficients a_lm for 1 <= l <= lmax, stored for m >= 0 only.

    ``coeffs[l-1]`` is a complex array of length l+1 holding a_l0 .. a_ll;
    negative orders are materialized on read via the conjugation symmetry.
    The arrays are frozen read-only.
    """

    coeffs: tuple[np.ndarray, ...]

    def __post_init__(self):
        arrays = []
        for l, arr in enumerate(self.coeffs, start=1):
            arr = np.asarray(arr, dtype=complex)
            if arr.shape != (l + 1,):
                raise ValueError(f"l = {l} needs {l + 1} coefficients, got {arr.shape}")
            if arr[0].imag != 0.0:
                raise ValueError(f"a_l0 must be real, got {arr[0]} at l = {l}")
            arr = arr.copy()
            arr.flags.writeable = False
            arrays.append(arr)
        if not arrays:
            raise ValueError("need at least l = 1")
        object.__setattr__(self, "coeffs", tuple(arrays))

    @property
    def lmax(self) -> int:
        return len(self.coeffs)

    def get(self, l: int, m: int) -> complex:
        """a_lm, with a_{l,-m} = (-1)^m conj(a_lm) for negative m."""
        if not 1 <= l <= self.lmax:
            raise KeyError(f"no coefficients for l = {l} (lmax = {self.lmax})")
        if abs(m) > l:
            raise KeyError(f"|m| = {abs(m)} exceeds l = {l}")
        if m >= 0:
            return complex(self.coeffs[l - 1][m])
        value = np.conj(self.coeffs[l - 1][-m])
        return complex(-value if m % 2 else value)

    def full_array(self, l: int) -> np.ndarray:
        """All 2l+1 coefficients a_{l,-l}..a_{l,l}, indexed by m + l."""
        if not 1 <= l <= self.lmax:
            raise KeyError(f"no coefficients for l = {l} (lmax = {self.lmax})")
        pos = self.coeffs[l - 1]
        neg = np.conj(pos[1:][::-1])
        neg[(l - 1) % 2 :: 2] *= -1.0  # (-1)^m for m = -l..-1
        return np.concatenate([neg, pos])

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "lmax": self.lmax,
            "coeffs": [
                {
                    "l": l,
                    "re": [float(v.real) for v in self.coeffs[l - 1]],
                    "im": [float(v.imag) for v in self.coeffs[l - 1]],
                }
                for l in range(1, self.lmax + 1)
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "HarmonicCoefficients":
        payload = json.loads(text)
        entries = {entry["l"]: entry for entry in payload["coeffs"]}
        arrays = []
        for l in range(1, payload["lmax"] + 1):
            if l not in entries:
                raise ValueError(f"missing coefficients for l = {l}")
            e = entries[l]
            arrays.append(np.array(e["re"]) + 1j * np.array(e["im"]))
        return cls(tuple(arrays))


def sample_alms(
    spec: AngularPowerSpectrum,
    lmax: int | None = None,
    seed: int | np.random.Generator = 0,
) -> HarmonicCoefficients:
    """Draw one Gaussian field realization up to lmax.

    a_l0 ~ Normal(0, C_l) real; a_lm = (x + iy) sqrt(C_l/2) for m > 0 with
    x, y independent standard normals, so E|a_lm|^2 = C_l for every m.  The
    draw order is fixed (one standard-normal block of 2l+1 values per l), so
    a fixed seed gives bit-identical coefficients.
    """
    if lmax is None:
        lmax = spec.lmax
    if lmax < 1:
        raise ValueError("lmax must be at least 1")
    if lmax > spec.lmax:
        raise ValueError(f"spectrum covers l <= {spec.lmax}, requested lmax = {lmax}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    arrays = []
    for l in range(1, lmax + 1):
        cl = spec[l]
        z = rng.standard_normal(2 * l + 1)
        arr = np.empty(l + 1, dtype=complex)
        arr[0] = z[0] * np.sqrt(cl)
        arr[1:] = (z[1::2] + 1j * z[2::2]) * np.sqrt(cl / 2.0)
        arrays.append(arr)
    return HarmonicCoefficients(tuple(arrays))


def estimate_cl(a: HarmonicCoefficients, l: int) -> float:
    """Unbiased spectrum estimator C^_l = (2l+1)^-1 sum_m |a_lm|^2."""
    if not 1 <= l <= a.lmax:
        raise ValueError(f"l = {l} out of range (lmax = {a.lmax})")
    pos = a.coeffs[l - 1]
    total = np.abs(pos[0]) ** 2 + 2.0 * np.sum(np.abs(pos[1:]) ** 2)
    return float(total) / (2 * l + 1)


def normalize_coeffs(
    a: HarmonicCoefficients,
    spec: AngularPowerSpectrum | None = None,
) -> HarmonicCoefficients:
    """u_lm = a_lm / sqrt(C_l), or the feasible u^_lm = a_lm / sqrt(C^_l).

    With ``spec`` the known spectrum divides; without it each l is divided
    by its estimate from the field itself, which makes
    sum_m |u^_lm|^2 = 2l+1 an exact algebraic identity.
    """
    arrays = []
    for l in range(1, a.lmax + 1):
        cl = spec[l] if spec is not None else estimate_cl(a, l)
        if not cl > 0.0:
            raise ValueError(f"nonpositive spectrum value {cl} at l = {l}")
        arrays.append(a.coeffs[l - 1] / np.sqrt(cl))
    return HarmonicCoefficients(tuple(arrays))
