"""Per-element spectral filtering of element Hessians.

Every filter acts on the eigenvalues of a symmetric element Hessian and
keeps its eigenvectors. ``blend(w)`` maps an eigenvalue ``l`` to
``(1 - w) * l + w * |l|``; ``w = 0.5`` is clamping at zero and ``w = 1`` is
the absolute value, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STRATEGY_KINDS = ("unprojected", "clamp", "abs", "adaptive", "fixed_blend", "threshold_abs", "pod_shift")


class NotSymmetricError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionStrategy:
    kind: str = "adaptive"
    clamp_floor: float = 0.0
    blend_w: float | None = None
    rho_eps: float | None = None
    tau: float | None = None
    shift_growth: float | None = None

    def __post_init__(self):
        k = self.kind
        if k not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {k!r}")
        if self.clamp_floor < 0:
            raise ValueError("clamp_floor must be >= 0")
        # fill kind-specific defaults, reject parameters that do not apply
        own = {"fixed_blend": "blend_w", "adaptive": "rho_eps", "threshold_abs": "tau", "pod_shift": "shift_growth"}
        for kind, name in own.items():
            if k != kind and getattr(self, name) is not None:
                raise ValueError(f"{name} is only valid for strategy {kind!r}")
        if k == "fixed_blend":
            if self.blend_w is None or not 0.0 <= self.blend_w <= 1.0:
                raise ValueError("fixed_blend needs blend_w in [0, 1]")
        elif k == "adaptive":
            eps = 0.01 if self.rho_eps is None else self.rho_eps
            if not 0.0 < eps < 1.0:
                raise ValueError("rho_eps must lie in (0, 1)")
            object.__setattr__(self, "rho_eps", float(eps))
        elif k == "threshold_abs":
            if self.tau is None or not self.tau > 0:
                raise ValueError("threshold_abs needs tau > 0")
        elif k == "pod_shift":
            growth = 10.0 if self.shift_growth is None else self.shift_growth
            if not growth > 1.0:
                raise ValueError("shift_growth must be > 1")
            object.__setattr__(self, "shift_growth", float(growth))

    @property
    def label(self) -> str:
        name = {"fixed_blend": "w", "adaptive": "rho_eps", "threshold_abs": "tau"}.get(self.kind)
        if name is None:
            return self.kind
        value = self.blend_w if name == "w" else getattr(self, name)
        return f"{self.kind}({name}={value:g})"

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "clamp_floor": self.clamp_floor}
        for name in ("blend_w", "rho_eps", "tau", "shift_growth"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        return d


@dataclass(frozen=True)
class SpectralMode:
    """Filter applied to every element in one Newton iteration.

    ``kind`` is 'clamp', 'abs', 'blend' (with ``w``) or 'threshold' (with ``tau``).
    """

    kind: str
    w: float | None = None
    tau: float | None = None

    def __str__(self):
        if self.kind == "blend":
            return f"blend({self.w:g})"
        if self.kind == "threshold":
            return f"threshold({self.tau:g})"
        return self.kind


CLAMP = SpectralMode("clamp")
ABS = SpectralMode("abs")


def eig_sym(H, rtol=1e-8):
    """Ascending eigenvalues and orthonormal eigenvectors; accepts stacks."""
    H = np.asarray(H, dtype=float)
    asym = np.abs(H - np.swapaxes(H, -1, -2)).max() if H.size else 0.0
    if asym > rtol * max(np.abs(H).max(), np.finfo(float).tiny):
        raise NotSymmetricError(f"matrix not symmetric (max asymmetry {asym:g})")
    return np.linalg.eigh(H)


def resolve_threshold_abs(eigs, tau):
    eigs = np.asarray(eigs, dtype=float)
    return np.where(np.abs(eigs) > tau, np.abs(eigs), np.maximum(eigs, 0.0))


def filter_spectrum(eigs, mode: SpectralMode, clamp_floor: float = 0.0):
    eigs = np.asarray(eigs, dtype=float)
    if mode.kind == "clamp":
        return np.maximum(eigs, clamp_floor)
    if mode.kind == "abs":
        return np.abs(eigs)
    if mode.kind == "blend":
        return (1.0 - mode.w) * eigs + mode.w * np.abs(eigs)
    if mode.kind == "threshold":
        return resolve_threshold_abs(eigs, mode.tau)
    raise ValueError(f"unknown spectral mode {mode!r}")


def project_element(H, mode: SpectralMode, clamp_floor: float = 0.0):
    """Rebuild a (stack of) symmetric matrix from its filtered spectrum."""
    lam, U = eig_sym(H)
    lam = filter_spectrum(lam, mode, clamp_floor)
    out = (U * lam[..., None, :]) @ np.swapaxes(U, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def resolve_adaptive(rho: float, rho_eps: float) -> SpectralMode:
    """Clamp when the quadratic model predicted the decrease well, abs otherwise."""
    return CLAMP if abs(rho - 1.0) <= rho_eps else ABS


def static_mode(strategy: ProjectionStrategy) -> SpectralMode | None:
    """Mode for strategies that do not change between iterations, else None."""
    k = strategy.kind
    if k == "clamp":
        return CLAMP
    if k == "abs":
        return ABS
    if k == "fixed_blend":
        return SpectralMode("blend", w=float(strategy.blend_w))
    if k == "threshold_abs":
        return SpectralMode("threshold", tau=float(strategy.tau))
    return None
