"""Shared fixtures for building random elements and small meshes."""

import numpy as np

from trnewton.mesh import RestData, TetMesh, generate_beam, precompute_rest

CORNER = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def random_rest_tet(rng):
    """A positively oriented, reasonably shaped rest tet."""
    while True:
        x = CORNER * rng.uniform(0.5, 2.0) + 0.15 * rng.standard_normal((4, 3))
        e = (x[1:] - x[0]).T
        if np.linalg.det(e) > 0.05 * np.abs(x).max() ** 3:
            return x


def rest_entry(x_rest):
    dm = (x_rest[1:] - x_rest[0]).T
    return RestData(np.linalg.inv(dm), np.linalg.det(dm) / 6.0)


def random_element(rng, allow_inversion=True, min_det=None):
    """Rest entry plus a random deformed configuration."""
    x_rest = random_rest_tet(rng)
    while True:
        A = np.eye(3) + 0.6 * rng.standard_normal((3, 3))
        if not allow_inversion and np.linalg.det(A) < 0:
            A[:, 0] *= -1
        y = x_rest @ A.T + 0.05 * rng.standard_normal((4, 3))
        F = (y[1:] - y[0]).T @ np.linalg.inv((x_rest[1:] - x_rest[0]).T)
        if min_det is None or np.linalg.det(F) >= min_det:
            return rest_entry(x_rest), y


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def small_meshes():
    """Meshes with at most 20 vertices, with and without fixed vertices."""
    two = TetMesh(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]]),
                  [[0, 1, 2, 3], [1, 2, 3, 4]])
    out = [
        ("single", TetMesh(CORNER.copy(), [[0, 1, 2, 3]]), ()),
        ("two_face_sharing", two, ()),
        ("cube", generate_beam((1, 1, 1)), ()),
        ("cube_one_fixed", generate_beam((1, 1, 1)), (0,)),
        ("beam_1x1x2", generate_beam((1, 1, 2), (1, 1, 2)), (0, 1)),
        ("beam_1x2x2_fixed_end", generate_beam((1, 2, 2)), (0, 3, 6)),
    ]
    for name, mesh, _ in out:
        assert mesh.n_vertices <= 20, name
    return out


def perturbed_positions(mesh, rng, scale=0.2):
    return mesh.rest_positions + scale * rng.standard_normal(mesh.rest_positions.shape)


__all__ = ["CORNER", "precompute_rest", "random_element", "random_rest_tet", "random_rotation",
           "rest_entry", "small_meshes", "perturbed_positions"]


def random_symmetric(rng, n=12, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return 0.5 * (a + a.T)


def filter_scatter_trial(rng):
    """One randomized scatter trial for |x^T A x| <= x^T|A|x and A + |A| = 2 clamp(A).

    Returns (x, A, A_abs, A_clamp, sum of element norms): global matrices
    assembled from random per-element symmetric blocks on a random small mesh.
    """
    from trnewton.assembly import build_pattern, dense_scatter, make_dofmap
    from trnewton.projection import ABS, CLAMP, project_element

    n_vertices = int(rng.integers(4, 9))
    n_tets = int(rng.integers(1, 5))
    tets = np.array([rng.choice(n_vertices, 4, replace=False) for _ in range(n_tets)])
    pattern = build_pattern(tets, make_dofmap(n_vertices, ()))
    blocks = np.stack([random_symmetric(rng, scale=10.0 ** rng.uniform(-2, 2)) for _ in range(n_tets)])
    A = dense_scatter(blocks, pattern)
    A_abs = dense_scatter(project_element(blocks, ABS), pattern)
    A_clamp = dense_scatter(project_element(blocks, CLAMP), pattern)
    x = rng.standard_normal(pattern.size)
    return x, A, A_abs, A_clamp, float(sum(np.linalg.norm(b) for b in blocks))


def filter_bound_violations(trials, seed=0):
    """Counts of trials violating the inequality and the identity."""
    rng = np.random.default_rng(seed)
    bad_ineq = bad_ident = 0
    for _ in range(trials):
        x, A, A_abs, A_clamp, norm_sum = filter_scatter_trial(rng)
        q, q_abs, q_clamp = x @ A @ x, x @ A_abs @ x, x @ A_clamp @ x
        if abs(q) > q_abs + 1e-10 * (x @ x) * norm_sum:
            bad_ineq += 1
        if abs(q + q_abs - 2 * q_clamp) > 1e-9 * max(abs(q_abs), abs(q), 1e-300):
            bad_ident += 1
    return bad_ineq, bad_ident
