"""Pure numpy implementations of the hot element kernels.

Same signatures as the compiled ``_kernels`` module; used when the
extension is not built or when ``TRN_BACKEND=python``.
"""

import numpy as np

LEVI_CIVITA = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_a, _b, _c] = 1.0
    LEVI_CIVITA[_a, _c, _b] = -1.0


def shape_gradients(dm_inv):
    """(m, 4, 3) derivative of F[a, b] w.r.t. vertex v coordinate a, per column b."""
    d = np.empty(dm_inv.shape[:-2] + (4, 3))
    d[..., 1:, :] = dm_inv
    d[..., 0, :] = -dm_inv.sum(axis=-2)
    return d


def deformation_gradients(x, tets, dm_inv):
    xe = x[tets]
    ds = (xe[:, 1:] - xe[:, :1]).transpose(0, 2, 1)
    return ds @ dm_inv


def cofactor(F):
    """dJ/dF, column k is the cross product of the other two columns."""
    f0, f1, f2 = F[..., :, 0], F[..., :, 1], F[..., :, 2]
    return np.stack([np.cross(f1, f2), np.cross(f2, f0), np.cross(f0, f1)], axis=-1)


def det_hessian(F):
    """d^2 J / dF_ab dF_cd as an (..., 3, 3, 3, 3) array."""
    return np.einsum("ace,bdf,...ef->...abcd", LEVI_CIVITA, LEVI_CIVITA, F)


def snh_density(F, mu, lam):
    ic = np.einsum("...ij,...ij->...", F, F)
    J = np.linalg.det(F)
    return 0.5 * mu * (ic - 3.0) + 0.5 * lam * (J - 1.0 - mu / lam) ** 2


def snh_stress_and_tangent(F, mu, lam):
    J = np.linalg.det(F)
    cof = cofactor(F)
    s = lam * (J - 1.0) - mu
    P = mu * F + s[..., None, None] * cof
    dP = (
        mu * np.eye(9).reshape(3, 3, 3, 3)
        + lam * np.einsum("...ab,...cd->...abcd", cof, cof)
        + s[..., None, None, None, None] * det_hessian(F)
    )
    return P, dP


def chain_rule(P, dP, dm_inv, volume):
    """Element gradient (m, 12) and Hessian (m, 12, 12) from stress and tangent."""
    D = shape_gradients(dm_inv)
    g = np.einsum("mcb,mvb->mvc", P, D) * volume[:, None, None]
    H = np.einsum("mcbed,mvb,mwd->mvcwe", dP, D, D) * volume[:, None, None, None, None]
    m = len(volume)
    H = H.reshape(m, 12, 12)
    H = 0.5 * (H + H.transpose(0, 2, 1))
    return g.reshape(m, 12), H


def snh_energies(x, tets, dm_inv, volume, mu, lam):
    F = deformation_gradients(x, tets, dm_inv)
    return volume * snh_density(F, mu, lam)


def snh_quadratics(x, tets, dm_inv, volume, mu, lam):
    F = deformation_gradients(x, tets, dm_inv)
    values = volume * snh_density(F, mu, lam)
    P, dP = snh_stress_and_tangent(F, mu, lam)
    g, H = chain_rule(P, dP, dm_inv, volume)
    return values, g, H


def scatter_add(slots, values, size):
    """Sum ``values`` into ``size`` bins; negative slots are dropped.

    Accumulation runs in input order, so results are bit-reproducible.
    """
    slots = slots.ravel()
    keep = slots >= 0
    return np.bincount(slots[keep], weights=values.ravel()[keep], minlength=size)
