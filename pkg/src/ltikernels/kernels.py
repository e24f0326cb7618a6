"""Causal kernels for impulse-response spaces.

Every kernel here has the form ``K(t1, t2) = H(t1) H(t2) Kt(t1, t2)`` with
``H`` the Heaviside step (``H(0) = 1``), optionally shifted by a delay ``D``
so that ``K_D(t1, t2) = K(t1 - D, t2 - D)``.

Families
--------
heaviside
    ``Kt = sum(mass)``, a constant; the RKHS holds step functions.
exponential
    ``Kt = sum_j mass_j exp(-omega_j (t1 + t2))``; a discrete completely
    monotone mixture, the single-atom case is the plain exponential kernel.
warped
    ``Kt = (t1 t2)^k sum_j mass_j G(exp(-omega_j t1), exp(-omega_j t2))`` with
    ``G`` either ``min`` (so ``k = 0`` with one atom is the TC kernel) or the
    cubic spline kernel on the unit square.
translation
    ``Kt = f(t1 - t2)`` with ``f`` a cosine mixture or a Gaussian mixture.
    Never BIBO stable; kept for diagnostics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ParseError

__all__ = [
    "HEAVISIDE",
    "EXPONENTIAL",
    "WARPED",
    "TRANSLATION",
    "KernelSpec",
    "heaviside_kernel",
    "exponential_kernel",
    "tc_kernel",
    "warped_kernel",
    "stable_spline_kernel",
    "cosine_kernel",
    "gaussian_kernel",
    "kernel_eval",
    "cubic_spline_G",
    "integrate_exponential_kernel_once",
    "apply_delay",
    "psd_quadratic_form",
    "kernel_matrix",
    "parse_kernel_spec",
    "format_kernel_spec",
]

HEAVISIDE = "heaviside"
EXPONENTIAL = "exponential"
WARPED = "warped"
TRANSLATION = "translation"

FAMILIES = (HEAVISIDE, EXPONENTIAL, WARPED, TRANSLATION)
SHAPES = ("min", "cubicspline")
TI_SHAPES = ("cosine", "gaussian")

_FAMILY_ALIASES = {
    "heaviside": HEAVISIDE,
    "exponential": EXPONENTIAL,
    "exponentialmixture": EXPONENTIAL,
    "warped": WARPED,
    "warpedmixture": WARPED,
    "translation": TRANSLATION,
    "translationinvariant": TRANSLATION,
}


@dataclass(frozen=True)
class KernelSpec:
    """Closed-form description of one kernel.

    ``atoms`` is a tuple of ``(mass, omega)`` pairs describing a discrete
    measure over decay rates (or frequencies for the translation family).
    ``k`` and ``shape`` only matter for the warped family, ``ti_shape`` only
    for the translation family.
    """

    family: str
    atoms: tuple = ((1.0, 0.0),)
    k: int = 0
    shape: str = "min"
    ti_shape: str = "gaussian"
    delay: float = 0.0

    def __post_init__(self):
        family = _FAMILY_ALIASES.get(str(self.family).lower())
        if family is None:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", family)
        atoms = tuple((float(m), float(w)) for m, w in self.atoms)
        if not atoms:
            raise ValueError("a kernel needs at least one atom")
        masses = np.array([m for m, _ in atoms])
        omegas = np.array([w for _, w in atoms])
        if not (np.all(np.isfinite(masses)) and np.all(np.isfinite(omegas))):
            raise ValueError("atom masses and rates must be finite")
        if np.any(masses < 0) or not np.any(masses > 0):
            raise ValueError("atom masses must be nonnegative with one positive")
        if np.any(omegas < 0):
            raise ValueError("atom rates must be nonnegative")
        object.__setattr__(self, "atoms", atoms)
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"warp exponent must be a nonnegative integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        shape = str(self.shape).lower().replace("_", "").replace("-", "")
        if shape not in SHAPES:
            raise ValueError(f"unknown base shape {self.shape!r}")
        object.__setattr__(self, "shape", shape)
        ti_shape = str(self.ti_shape).lower()
        if ti_shape not in TI_SHAPES:
            raise ValueError(f"unknown translation-invariant shape {self.ti_shape!r}")
        object.__setattr__(self, "ti_shape", ti_shape)
        if not (np.isfinite(self.delay) and self.delay >= 0):
            raise ValueError("delay must be a finite nonnegative number")
        object.__setattr__(self, "delay", float(self.delay))

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for m, _ in self.atoms])

    @property
    def omegas(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    @property
    def stable_by_construction(self) -> bool:
        """True when a sufficient integrability condition is met.

        Exponential and warped mixtures are integrable when no atom with
        positive mass sits at rate zero.
        """
        if self.family in (EXPONENTIAL, WARPED):
            return bool(np.all(self.omegas[self.masses > 0] > 0))
        return False

    def __call__(self, t1, t2):
        return kernel_eval(self, t1, t2)

    def __str__(self):
        return format_kernel_spec(self)


def heaviside_kernel(delay: float = 0.0) -> KernelSpec:
    return KernelSpec(HEAVISIDE, ((1.0, 0.0),), delay=delay)


def exponential_kernel(omega, mass=1.0, delay: float = 0.0) -> KernelSpec:
    """Exponential kernel; pass sequences for ``omega``/``mass`` to get a mixture."""
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    masses = np.broadcast_to(np.asarray(mass, dtype=float), omegas.shape)
    return KernelSpec(EXPONENTIAL, tuple(zip(masses, omegas)), delay=delay)


def warped_kernel(omega, k: int = 0, shape: str = "min", mass=1.0, delay=0.0):
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    masses = np.broadcast_to(np.asarray(mass, dtype=float), omegas.shape)
    return KernelSpec(WARPED, tuple(zip(masses, omegas)), k=k, shape=shape, delay=delay)


def tc_kernel(omega: float, delay: float = 0.0) -> KernelSpec:
    return warped_kernel(omega, k=0, shape="min", delay=delay)


def stable_spline_kernel(omega: float, k: int = 0, delay: float = 0.0) -> KernelSpec:
    return warped_kernel(omega, k=k, shape="cubicspline", delay=delay)


def cosine_kernel(omega, mass=1.0, delay: float = 0.0) -> KernelSpec:
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    masses = np.broadcast_to(np.asarray(mass, dtype=float), omegas.shape)
    return KernelSpec(TRANSLATION, tuple(zip(masses, omegas)), ti_shape="cosine", delay=delay)


def gaussian_kernel(omega: float, delay: float = 0.0) -> KernelSpec:
    return KernelSpec(TRANSLATION, ((1.0, float(omega)),), ti_shape="gaussian", delay=delay)


def cubic_spline_G(s1, s2):
    """Cubic spline kernel on the unit square, ``s1 s2 m / 2 - m^3 / 6`` with ``m = min``."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    m = np.minimum(s1, s2)
    out = s1 * s2 * m / 2.0 - m**3 / 6.0
    return out if out.ndim else float(out)


def _warp_base(spec: KernelSpec, a, b, omega, mass):
    # a, b >= 0 already
    if spec.shape == "min":
        # min(exp(-w a), exp(-w b)) = exp(-w max(a, b))
        return mass * np.exp(-omega * np.maximum(a, b))
    return mass * cubic_spline_G(np.exp(-omega * a), np.exp(-omega * b))


def kernel_eval(spec: KernelSpec, t1, t2):
    """Evaluate ``spec`` at ``(t1, t2)``; arrays broadcast."""
    t1 = np.asarray(t1, dtype=float) - spec.delay
    t2 = np.asarray(t2, dtype=float) - spec.delay
    t1, t2 = np.broadcast_arrays(t1, t2)
    causal = (t1 >= 0) & (t2 >= 0)
    a = np.where(causal, t1, 0.0)
    b = np.where(causal, t2, 0.0)
    total = np.zeros(a.shape)
    fam = spec.family
    for mass, omega in spec.atoms:
        if mass == 0.0:
            continue
        if fam == HEAVISIDE:
            total = total + mass
        elif fam == EXPONENTIAL:
            total = total + mass * np.exp(-omega * (a + b))
        elif fam == WARPED:
            total = total + _warp_base(spec, a, b, omega, mass)
        elif spec.ti_shape == "cosine":
            total = total + mass * np.cos(omega * (a - b))
        else:
            total = total + mass * np.exp(-omega * (a - b) ** 2)
    if fam == WARPED and spec.k > 0:
        total = total * (a * b) ** spec.k
    out = np.where(causal, total, 0.0)
    return out if out.ndim else float(out)


def integrate_exponential_kernel_once(omega: float, t1, t2):
    """Double integral of the exponential kernel, ``(1 - e^{-w t1})(1 - e^{-w t2}) / w^2``.

    This is one step of the integrate-twice recursion that raises the
    relative degree; the result is no longer integrable on the quadrant.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    f1 = -np.expm1(-omega * np.maximum(t1, 0.0))
    f2 = -np.expm1(-omega * np.maximum(t2, 0.0))
    out = np.where((t1 >= 0) & (t2 >= 0), f1 * f2 / omega**2, 0.0)
    return out if out.ndim else float(out)


def apply_delay(spec: KernelSpec, D: float) -> KernelSpec:
    """Shift ``spec`` so that it vanishes before ``D`` (delays add up)."""
    if not D >= 0:
        raise ValueError("delay must be nonnegative")
    return replace(spec, delay=spec.delay + float(D))


def kernel_matrix(spec, points) -> np.ndarray:
    """Plain kernel matrix ``[K(t_i, t_j)]`` of a spec or a vectorized callable."""
    p = np.asarray(points, dtype=float).reshape(-1)
    return np.asarray(spec(p[:, None], p[None, :]), dtype=float)


def psd_quadratic_form(spec, points: Sequence[float], coeffs: Sequence[float]) -> float:
    """``sum_ij c_i c_j K(t_i, t_j)``."""
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    if c.size != np.size(points):
        raise ValueError("points and coeffs must have the same length")
    return float(c @ kernel_matrix(spec, points) @ c)


# -- textual format -----------------------------------------------------------

_KEYS = ("family", "atoms", "k", "g", "f", "d")


def parse_kernel_spec(text: str) -> KernelSpec:
    """Parse ``family=<name>; atoms=<mass:omega,...>; k=<int>; G=<min|cubicspline>; D=<real>``.

    Keys are case-insensitive. ``f=<cosine|gaussian>`` selects the shape of
    a translation-invariant kernel. Unknown keys raise :class:`ParseError`.
    """
    fields = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ParseError(f"expected key=value, got {part!r}")
        key, value = (s.strip() for s in part.split("=", 1))
        key = key.lower()
        if key not in _KEYS:
            raise ParseError(f"unknown kernel key {key!r}")
        if key in fields:
            raise ParseError(f"duplicate kernel key {key!r}")
        fields[key] = value
    if "family" not in fields:
        raise ParseError("kernel spec needs a family")
    kwargs = {"family": fields["family"]}
    try:
        if "atoms" in fields:
            atoms = []
            for item in re.split(r"[,\s]+", fields["atoms"].strip()):
                if not item:
                    continue
                mass, omega = item.split(":")
                atoms.append((float(mass), float(omega)))
            kwargs["atoms"] = tuple(atoms)
        if "k" in fields:
            kwargs["k"] = int(fields["k"])
        if "g" in fields:
            kwargs["shape"] = fields["g"]
        if "f" in fields:
            kwargs["ti_shape"] = fields["f"]
        if "d" in fields:
            kwargs["delay"] = float(fields["d"])
        return KernelSpec(**kwargs)
    except ValueError as exc:
        raise ParseError(f"invalid kernel spec {text!r}: {exc}") from None


def format_kernel_spec(spec: KernelSpec) -> str:
    atoms = ",".join(f"{m:.17g}:{w:.17g}" for m, w in spec.atoms)
    parts = [f"family={spec.family}", f"atoms={atoms}"]
    if spec.family == WARPED:
        parts += [f"k={spec.k}", f"G={spec.shape}"]
    if spec.family == TRANSLATION:
        parts.append(f"f={spec.ti_shape}")
    parts.append(f"D={spec.delay:.17g}")
    return "; ".join(parts)
