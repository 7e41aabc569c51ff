"""Hyperelastic strain energies with analytic element gradients and Hessians.

Three isotropic densities are provided:

``stable_neo_hookean``
    (mu/2)(I_C - 3) + (lam/2)(J - 1 - mu/lam)^2, smooth through inversion.
``arap_vol``
    (mu/2)||F - R||^2 + (lam/2)(J - 1)^2, with R the signed polar rotation.
``symmetric_dirichlet_vol``
    (mu/2)(||F||^2 + ||F^-1||^2 - 6) + (lam/2)(J - 1)^2, +inf for J <= 0.

Derivatives are taken w.r.t. the row-major flattening of F (index 3a+b) and
mapped to the 12 vertex coordinates of a tet (index 3v+c).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._kernels_py import (
    chain_rule,
    cofactor,
    deformation_gradients,
    det_hessian,
    snh_density,
    snh_stress_and_tangent,
)
from .mesh import RestData

MODELS = ("stable_neo_hookean", "arap_vol", "symmetric_dirichlet_vol")

_I9 = np.eye(9).reshape(3, 3, 3, 3)
_TWISTS = np.array(
    [
        [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
        [[0, 0, 0], [0, 0, 1], [0, -1, 0]],
        [[0, 0, 1], [0, 0, 0], [-1, 0, 0]],
    ],
    dtype=float,
) / np.sqrt(2.0)
# singular-value pair coupled by each twist mode above
_TWIST_PAIRS = ((0, 1), (1, 2), (0, 2))


class ParameterError(ValueError):
    pass


class OracleError(ArithmeticError):
    pass


def lame_from_young_poisson(young: float, poisson: float) -> tuple[float, float]:
    if not young > 0:
        raise ParameterError(f"Young's modulus must be positive, got {young}")
    if not 0.0 <= poisson < 0.5:
        raise ParameterError(f"Poisson's ratio must lie in [0, 0.5), got {poisson}")
    mu = young / (2.0 * (1.0 + poisson))
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


@dataclass(frozen=True)
class MaterialParams:
    young: float
    poisson: float
    mu: float
    lam: float

    @classmethod
    def from_young_poisson(cls, young, poisson):
        mu, lam = lame_from_young_poisson(young, poisson)
        return cls(float(young), float(poisson), mu, lam)


@dataclass(frozen=True)
class EnergyModel:
    kind: str = "stable_neo_hookean"

    def __post_init__(self):
        if self.kind not in MODELS:
            raise ParameterError(f"unknown energy model {self.kind!r}")


@dataclass
class ElementQuadratics:
    """Per-element energy, gradient (12,) and Hessian (12, 12).

    Also used in stacked form with a leading element axis.
    """

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


def _model_kind(model) -> str:
    return model.kind if isinstance(model, EnergyModel) else EnergyModel(model).kind


def deformation_gradient(x_elem, dm_inv):
    x_elem = np.asarray(x_elem, dtype=float)
    ds = (x_elem[1:] - x_elem[0]).T
    return ds @ np.asarray(dm_inv, dtype=float)


def signed_svd(F):
    """SVD with det(U) = det(V) = +1; a reflection shows up as a negative sigma_3."""
    U, S, Vt = np.linalg.svd(F)
    U, S, V = U.copy(), S.copy(), np.swapaxes(Vt, -1, -2).copy()
    fu = np.linalg.det(U) < 0
    fv = np.linalg.det(V) < 0
    U[fu, :, 2] *= -1
    S[fu, 2] *= -1
    V[fv, :, 2] *= -1
    S[fv, 2] *= -1
    return U, S, V


def _volume_term(F, lam):
    J = np.linalg.det(F)
    cof = cofactor(F)
    r = J - 1.0
    psi = 0.5 * lam * r**2
    P = lam * r[..., None, None] * cof
    dP = lam * np.einsum("...ab,...cd->...abcd", cof, cof) + (lam * r)[..., None, None, None, None] * det_hessian(F)
    return psi, P, dP


def _arap(F, mu, lam, derivatives):
    U, S, V = signed_svd(F)
    psi = 0.5 * mu * ((S - 1.0) ** 2).sum(axis=-1)
    vpsi, vP, vdP = _volume_term(F, lam)
    if not derivatives:
        return psi + vpsi, None, None
    R = U @ np.swapaxes(V, -1, -2)
    P = mu * (F - R) + vP
    dR = np.zeros(F.shape[:-2] + (3, 3, 3, 3))
    for T, (i, j) in zip(_TWISTS, _TWIST_PAIRS):
        q = U @ T @ np.swapaxes(V, -1, -2)
        den = S[..., i] + S[..., j]
        den = np.where(np.abs(den) < 1e-12, np.copysign(1e-12, den), den)
        dR += (2.0 / den)[..., None, None, None, None] * np.einsum("...ab,...cd->...abcd", q, q)
    dP = mu * (_I9 - dR) + vdP
    return psi + vpsi, P, dP


def _symmetric_dirichlet(F, mu, lam, derivatives):
    J = np.linalg.det(F)
    ok = J > 0
    Fs = np.where(ok[..., None, None], F, np.eye(3))
    G = np.linalg.inv(Fs)
    psi = 0.5 * mu * (np.einsum("...ij,...ij->...", F, F) + np.einsum("...ij,...ij->...", G, G) - 6.0)
    vpsi, vP, vdP = _volume_term(F, lam)
    psi = np.where(ok, psi + vpsi, np.inf)
    if not derivatives:
        return psi, None, None
    Gt = np.swapaxes(G, -1, -2)
    GtG = Gt @ G
    GGt = G @ Gt
    GtGGt = GtG @ Gt
    P = mu * (F - GtGGt) + vP
    dP = mu * (
        _I9
        + np.einsum("...ad,...cb->...abcd", Gt, GtGGt)
        + np.einsum("...ac,...db->...abcd", GtG, GGt)
        + np.einsum("...ad,...cb->...abcd", GtGGt, Gt)
    ) + vdP
    P = np.where(ok[..., None, None], P, np.nan)
    dP = np.where(ok[..., None, None, None, None], dP, np.nan)
    return psi, P, dP


def density_and_derivatives(model, params: MaterialParams, F, derivatives=True):
    """Density, first Piola stress and tangent dP/dF for a stack of F."""
    kind = _model_kind(model)
    F = np.asarray(F, dtype=float)
    mu, lam = params.mu, params.lam
    if kind == "stable_neo_hookean":
        psi = snh_density(F, mu, lam)
        if not derivatives:
            return psi, None, None
        P, dP = snh_stress_and_tangent(F, mu, lam)
        return psi, P, dP
    if kind == "arap_vol":
        return _arap(F, mu, lam, derivatives)
    return _symmetric_dirichlet(F, mu, lam, derivatives)


def energy_density(model, params: MaterialParams, F) -> float:
    psi, _, _ = density_and_derivatives(model, params, np.asarray(F, dtype=float)[None], derivatives=False)
    return float(psi[0])


def _threads() -> int:
    """Worker count for element loops from ``TRN_THREADS`` (0 or unset means auto)."""
    raw = os.environ.get("TRN_THREADS", "").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"TRN_THREADS must be a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise ParameterError(f"TRN_THREADS must be a non-negative integer, got {raw!r}")
    return n if n > 0 else min(os.cpu_count() or 1, 8)


_CHUNK = 4096


def _chunked(fn, m):
    """Run ``fn(lo, hi)`` over element ranges; results merged in index order."""
    threads = _threads()
    if threads <= 1 or m <= _CHUNK:
        return [fn(0, m)]
    bounds = [(lo, min(lo + _CHUNK, m)) for lo in range(0, m, _CHUNK)]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def element_energies(model, params, x, tets, rest) -> np.ndarray:
    """Energy of every element at positions ``x`` (n, 3)."""
    kind = _model_kind(model)
    x = np.ascontiguousarray(x, dtype=np.float64)

    def run(lo, hi):
        if kind == "stable_neo_hookean":
            return kernels.snh_energies(x, tets[lo:hi], rest.dm_inv[lo:hi], rest.volume[lo:hi], params.mu, params.lam)
        F = deformation_gradients(x, tets[lo:hi], rest.dm_inv[lo:hi])
        psi, _, _ = density_and_derivatives(kind, params, F, derivatives=False)
        return rest.volume[lo:hi] * psi

    return np.concatenate(_chunked(run, len(tets)))


def element_quadratics_batch(model, params, x, tets, rest) -> ElementQuadratics:
    """Stacked element quadratics for every tet of a mesh."""
    kind = _model_kind(model)
    x = np.ascontiguousarray(x, dtype=np.float64)

    def run(lo, hi):
        if kind == "stable_neo_hookean":
            return kernels.snh_quadratics(
                x, tets[lo:hi], rest.dm_inv[lo:hi], rest.volume[lo:hi], params.mu, params.lam
            )
        F = deformation_gradients(x, tets[lo:hi], rest.dm_inv[lo:hi])
        psi, P, dP = density_and_derivatives(kind, params, F)
        g, H = chain_rule(P, dP, rest.dm_inv[lo:hi], rest.volume[lo:hi])
        return rest.volume[lo:hi] * psi, g, H

    parts = _chunked(run, len(tets))
    return ElementQuadratics(*(np.concatenate([p[i] for p in parts]) for i in range(3)))


def _single(x_elem, rest):
    x = np.asarray(x_elem, dtype=np.float64).reshape(4, 3)
    tets = np.arange(4, dtype=np.int64)[None]
    dm_inv = np.asarray(rest.dm_inv, dtype=np.float64).reshape(1, 3, 3)
    volume = np.atleast_1d(np.asarray(rest.volume, dtype=np.float64))
    return x, tets, RestData(dm_inv, volume)


def element_value(model, params, x_elem, rest) -> float:
    x, tets, r = _single(x_elem, rest)
    return float(element_energies(model, params, x, tets, r)[0])


def element_quadratics(model, params, x_elem, rest) -> ElementQuadratics:
    """Value, gradient and Hessian of one element's energy w.r.t. its 12 coordinates."""
    x, tets, r = _single(x_elem, rest)
    q = element_quadratics_batch(model, params, x, tets, r)
    return ElementQuadratics(float(q.value[0]), q.gradient[0], q.hessian[0])


def _default_step(x_elem):
    x = np.asarray(x_elem, dtype=float).reshape(4, 3)
    edges = [np.linalg.norm(x[i] - x[j]) for i in range(4) for j in range(i + 1, 4)]
    return 1e-5 * float(np.mean(edges))


def fd_gradient(model, params, x_elem, rest, h=None, value_fn=None) -> np.ndarray:
    """Central-difference gradient of the element energy."""
    x0 = np.asarray(x_elem, dtype=float).reshape(12)
    h = _default_step(x0) if h is None else h
    f = value_fn or (lambda y: element_value(model, params, y, rest))
    g = np.empty(12)
    for i in range(12):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise OracleError(f"non-finite energy within step {h:g} of the evaluation point")
        g[i] = (fp - fm) / (2.0 * h)
    return g


def fd_hessian(model, params, x_elem, rest, h=None, gradient_fn=None) -> np.ndarray:
    """Central differences of the analytic gradient (or of ``gradient_fn``)."""
    x0 = np.asarray(x_elem, dtype=float).reshape(12)
    h = _default_step(x0) if h is None else h
    grad = gradient_fn or (lambda y: element_quadratics(model, params, y, rest).gradient)
    H = np.empty((12, 12))
    for i in range(12):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        gp, gm = grad(xp), grad(xm)
        if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
            raise OracleError(f"non-finite gradient within step {h:g} of the evaluation point")
        H[i] = (gp - gm) / (2.0 * h)
    return 0.5 * (H + H.T)
