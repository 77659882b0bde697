"""Independent dense assemblies used as oracles for the sparse production code.

Bases are monomial coefficient arrays obtained from Vandermonde solves, and
integrals are exact (closed-form monomial moments on the reference simplex).
Only mesh topology and global dof numbering are shared with the code under
test.
"""

from __future__ import annotations

from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.signal import convolve2d

# ----------------------------------------------------------------- triangles

P2_REF_NODES = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]])
P1_REF_NODES = np.array([[0, 0], [1, 0], [0, 1.0]])


def _monomials(deg: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(deg + 1) for b in range(deg + 1 - a)]


def triangle_basis(deg: int) -> list[np.ndarray]:
    """Lagrange basis on the reference triangle as coefficient arrays ``c[a, b]`` of ``x^a y^b``."""
    nodes = P2_REF_NODES if deg == 2 else P1_REF_NODES
    mons = _monomials(deg)
    V = np.array([[x**a * y**b for a, b in mons] for x, y in nodes])
    coef = np.linalg.solve(V, np.eye(len(nodes)))
    out = []
    for k in range(len(nodes)):
        c = np.zeros((deg + 1, deg + 1))
        for (a, b), v in zip(mons, coef[:, k]):
            c[a, b] = v
        out.append(c)
    return out


def d_ref(c: np.ndarray, axis: int) -> np.ndarray:
    out = np.zeros_like(c)
    if axis == 0:
        for a in range(1, c.shape[0]):
            out[a - 1, :] = a * c[a, :]
    else:
        for b in range(1, c.shape[1]):
            out[:, b - 1] = b * c[:, b]
    return out


def tri_integral(c: np.ndarray) -> float:
    """``int_T c`` over the reference triangle."""
    return sum(
        c[a, b] * factorial(a) * factorial(b) / factorial(a + b + 2)
        for a in range(c.shape[0])
        for b in range(c.shape[1])
        if c[a, b] != 0
    )


def tri_product_integral(f: np.ndarray, g: np.ndarray) -> float:
    return tri_integral(convolve2d(f, g))


class TriangleElement:
    """Physical P2 and P1 basis data of one triangle."""

    def __init__(self, X: np.ndarray):
        self.J = np.column_stack([X[1] - X[0], X[2] - X[0]])
        self.det = abs(np.linalg.det(self.J))
        self.Jinv = np.linalg.inv(self.J)
        self.p2 = triangle_basis(2)
        self.p1 = triangle_basis(1)

    def grad(self, c: np.ndarray) -> list[np.ndarray]:
        """Physical gradient components ``d/dx_a = sum_r Jinv[r, a] d/dxi_r``."""
        dr = [d_ref(c, 0), d_ref(c, 1)]
        return [self.Jinv[0, a] * dr[0] + self.Jinv[1, a] * dr[1] for a in range(2)]

    def integral(self, f: np.ndarray, g: np.ndarray) -> float:
        return self.det * tri_product_integral(f, g)


def _vector_grad(el: TriangleElement, basis: list[np.ndarray]) -> list[list[list[list[np.ndarray]]]]:
    """``G[c][i][k][l] = d_k (psi_i e_c)_l`` as polynomials."""
    zero = np.zeros_like(basis[0])
    out = []
    for c in range(2):
        per_basis = []
        for psi in basis:
            g = el.grad(psi)
            per_basis.append([[g[k] if l == c else zero for l in range(2)] for k in range(2)])
        out.append(per_basis)
    return out


def vector_forms(mesh, cell_dofs2: np.ndarray, cell_dofs1: np.ndarray, n2: int, n1: int) -> dict[str, np.ndarray]:
    """Dense P2 mass, ``2 D:D``, ``div div``, ``-div`` and P1 mass/stiffness on a triangle mesh."""
    mass = np.zeros((n2, n2))
    strain = np.zeros((2 * n2, 2 * n2))
    divdiv = np.zeros((2 * n2, 2 * n2))
    div = np.zeros((n1, 2 * n2))
    mass1 = np.zeros((n1, n1))
    stiff1 = np.zeros((n1, n1))
    for t, tri in enumerate(mesh.triangles):
        el = TriangleElement(mesh.vertices[tri])
        d2, d1 = cell_dofs2[t], cell_dofs1[t]
        G = _vector_grad(el, el.p2)
        for i in range(6):
            for j in range(6):
                mass[d2[i], d2[j]] += el.integral(el.p2[i], el.p2[j])
                for c in range(2):
                    for d in range(2):
                        sym_test = [[0.5 * (G[c][i][k][l] + G[c][i][l][k]) for l in range(2)] for k in range(2)]
                        sym_trial = [[0.5 * (G[d][j][k][l] + G[d][j][l][k]) for l in range(2)] for k in range(2)]
                        val = sum(2 * el.integral(sym_trial[k][l], sym_test[k][l]) for k in range(2) for l in range(2))
                        strain[c * n2 + d2[i], d * n2 + d2[j]] += val
                        divdiv[c * n2 + d2[i], d * n2 + d2[j]] += el.integral(el.grad(el.p2[i])[c], el.grad(el.p2[j])[d])
        for m in range(3):
            for j in range(6):
                g = el.grad(el.p2[j])
                for d in range(2):
                    div[d1[m], d * n2 + d2[j]] -= el.integral(el.p1[m], g[d])
            for k in range(3):
                mass1[d1[m], d1[k]] += el.integral(el.p1[m], el.p1[k])
                gm, gk = el.grad(el.p1[m]), el.grad(el.p1[k])
                stiff1[d1[m], d1[k]] += sum(el.integral(gm[a], gk[a]) for a in range(2))
    return {"mass": mass, "strain": strain, "divdiv": divdiv, "div": div, "mass1": mass1, "stiff1": stiff1}


def check_p2_numbering(mesh, cell_dofs2: np.ndarray) -> None:
    """Midpoint dofs must be ``n_vertices + edge index`` of the matching local edge."""
    nv = len(mesh.vertices)
    for t, tri in enumerate(mesh.triangles):
        for k, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
            e = cell_dofs2[t, 3 + k] - nv
            assert set(mesh.edges[e]) == {tri[a], tri[b]}
        assert list(cell_dofs2[t, :3]) == list(tri)


def boundary_row(mesh, y: float) -> tuple[np.ndarray, np.ndarray]:
    """P2 trace dofs ``[left, right, mid]`` of the mesh edges on the line ``y``, sorted by x."""
    V = mesh.vertices
    on = np.flatnonzero(np.isclose(V[:, 1], y))
    on = on[np.argsort(V[on, 0])]
    edges = {frozenset(e): k for k, e in enumerate(mesh.edges.tolist())}
    nv = len(V)
    rows = [[on[c], on[c + 1], nv + edges[frozenset((on[c], on[c + 1]))]] for c in range(len(on) - 1)]
    return np.array(rows), np.diff(V[on, 0])


# ----------------------------------------------------------------- intervals


def p1_interval() -> list[np.ndarray]:
    return [np.array([1.0, -1.0]), np.array([0.0, 1.0])]


def p2_trace() -> list[np.ndarray]:
    """Quadratic Lagrange basis on ``[0, 1]`` with nodes ``(0, 1, 1/2)``."""
    nodes = np.array([0.0, 1.0, 0.5])
    V = np.vander(nodes, 3, increasing=True)
    coef = np.linalg.solve(V, np.eye(3))
    return [coef[:, k] for k in range(3)]


def hermite(h: float) -> list[np.ndarray]:
    """Cubic Hermite basis ``[value0, slope0, value1, slope1]`` in ``s`` on a cell of length ``h``."""
    return [
        np.array([1.0, 0.0, -3.0, 2.0]),
        h * np.array([0.0, 1.0, -2.0, 1.0]),
        np.array([0.0, 0.0, 3.0, -2.0]),
        h * np.array([0.0, 0.0, -1.0, 1.0]),
    ]


def interval_integral(f: np.ndarray, g: np.ndarray, h: float, df: int = 0, dg: int = 0) -> float:
    """``int f^(df) g^(dg) dx`` over a cell of length ``h`` with ``f, g`` given in ``s``."""
    a = P.polyder(f, df) / h**df if df else f
    b = P.polyder(g, dg) / h**dg if dg else g
    prod = P.polyint(P.polymul(a, b))
    return h * float(P.polyval(1.0, prod) - P.polyval(0.0, prod))


# ------------------------------------------------------------------ problems


def plate_matrix(problem, dt: float) -> np.ndarray:
    """Dense unconstrained step matrix of Problem I."""
    params = problem.params
    fl, pc, H = params.fluid, params.plate, params.geometry.H
    mesh = problem.fluid.mesh
    cd2, cd1 = problem.fluid.p2.cell_dofs, problem.fluid.p1.cell_dofs
    check_p2_numbering(mesh, cd2)
    n2, n1 = problem.fluid.n2, problem.fluid.n1
    vol = vector_forms(mesh, cd2, cd1, n2, n1)
    top, hs = boundary_row(mesh, 0.0)
    nc = len(hs)
    nh, ng = 2 * (nc + 1), nc + 1

    A = np.zeros((problem.size, problem.size))
    sl = problem.layout
    ux, uy, pi = sl["ux"].start, sl["uy"].start, sl["pi"].start
    v0, q0, b0 = sl["v"].start, sl["qjump"].start, sl["qbar"].start

    mass2 = np.kron(np.eye(2), vol["mass"])
    A[ux : ux + 2 * n2, ux : ux + 2 * n2] = fl.rho_f / dt * mass2 + fl.mu_f * vol["strain"]
    A[pi : pi + n1, ux : ux + 2 * n2] = vol["div"]
    A[ux : ux + 2 * n2, pi : pi + n1] = vol["div"].T

    p2t, p1, herm = p2_trace(), p1_interval(), None
    for c in range(nc):
        h = hs[c]
        herm = hermite(h)
        hd = [2 * c, 2 * c + 1, 2 * c + 2, 2 * c + 3]
        pd = [c, c + 1]
        for i in range(3):
            for j in range(3):
                A[ux + top[c, i], ux + top[c, j]] += fl.beta * interval_integral(p2t[i], p2t[j], h)
        for a in range(4):
            for b in range(4):
                mh = interval_integral(herm[a], herm[b], h)
                kh = interval_integral(herm[a], herm[b], h, 2, 2)
                A[v0 + hd[a], v0 + hd[b]] += (H * pc.rho_p / dt + H * pc.gamma_p * dt) * mh + H**3 * pc.D * dt * kh
            for m in range(2):
                g = H**2 * pc.alpha_p / 12 * interval_integral(herm[a], p1[m], h, 2, 0) + interval_integral(
                    herm[a], p1[m], h
                )
                A[v0 + hd[a], q0 + pd[m]] += g
                A[q0 + pd[m], v0 + hd[a]] -= g
        for m in range(2):
            for k in range(2):
                m1 = interval_integral(p1[m], p1[k], h)
                A[q0 + pd[m], q0 + pd[k]] += (H * pc.c0_p / (12 * dt) + 4 * pc.kappa_p / H) * m1
                A[q0 + pd[m], b0 + pd[k]] += 6 * pc.kappa_p / H * m1
                A[b0 + pd[m], q0 + pd[k]] += 6 * pc.kappa_p / H * m1
                A[b0 + pd[m], b0 + pd[k]] += (H * pc.c0_p / dt + 12 * pc.kappa_p / H) * m1
            for j in range(3):
                cval = interval_integral(p1[m], p2t[j], h)
                A[q0 + pd[m], uy + top[c, j]] += cval
                A[uy + top[c, j], q0 + pd[m]] -= cval
    assert nh == problem.hermite.n_dofs and ng == problem.p1.n_dofs
    return A


def _p1_gradient(X: np.ndarray) -> np.ndarray:
    """Gradients of the three P1 hat functions of the triangle ``X`` (rows)."""
    V = np.column_stack([np.ones(3), X])
    return np.linalg.inv(V)[1:, :].T


def biot_matrix(problem, dt: float) -> np.ndarray:
    """Dense unconstrained step matrix of Problem II."""
    params = problem.params
    fl, bulk = params.fluid, params.bulk
    fmesh, bmesh = problem.fluid.mesh, problem.mesh
    n2, n1 = problem.fluid.n2, problem.fluid.n1
    nb2, nb1 = problem.nb2, problem.nb1
    check_p2_numbering(fmesh, problem.fluid.p2.cell_dofs)
    check_p2_numbering(bmesh, problem.p2.cell_dofs)
    fv = vector_forms(fmesh, problem.fluid.p2.cell_dofs, problem.fluid.p1.cell_dofs, n2, n1)
    bv = vector_forms(bmesh, problem.p2.cell_dofs, problem.p1.cell_dofs, nb2, nb1)

    A = np.zeros((problem.size, problem.size))
    sl = problem.layout
    ux, uy, pi = sl["ux"].start, sl["uy"].start, sl["pi"].start
    xx, xy, q0 = sl["xix"].start, sl["xiy"].start, sl["q"].start

    A[ux : ux + 2 * n2, ux : ux + 2 * n2] = fl.rho_f / dt * np.kron(np.eye(2), fv["mass"]) + fl.mu_f * fv["strain"]
    A[pi : pi + n1, ux : ux + 2 * n2] = fv["div"]
    A[ux : ux + 2 * n2, pi : pi + n1] = fv["div"].T

    bmass = np.kron(np.eye(2), bv["mass"])
    elastic = bulk.mu_b * bv["strain"] + bulk.lambda_b * bv["divdiv"]
    A[xx : xx + 2 * nb2, xx : xx + 2 * nb2] = bulk.rho_b / dt * bmass + dt * (elastic + bulk.gamma * bmass)
    couple = -bulk.alpha * bv["div"]  # +alpha (div xi, s)
    A[q0 : q0 + nb1, xx : xx + 2 * nb2] = couple
    A[xx : xx + 2 * nb2, q0 : q0 + nb1] = -couple.T
    A[q0 : q0 + nb1, q0 : q0 + nb1] = bulk.c0 / dt * bv["mass1"] + bulk.kappa * bv["stiff1"]

    ftop, hs = boundary_row(fmesh, 0.0)
    bbot, _ = boundary_row(bmesh, 0.0)
    p2t, p1 = p2_trace(), p1_interval()
    gamma_n = problem.nitsche.penalty
    for c in range(len(hs)):
        h = hs[c]
        # triangle of the Biot mesh that owns the bottom edge
        a, b = bbot[c, 0], bbot[c, 1]
        owner = [t for t, tri in enumerate(bmesh.triangles) if a in tri and b in tri]
        assert len(owner) == 1
        tri = bmesh.triangles[owner[0]]
        dqy = dict(zip(tri.tolist(), _p1_gradient(bmesh.vertices[tri])[:, 1]))
        for i in range(3):
            for m in range(2):
                val = interval_integral(p2t[i], p1[m], h)
                A[uy + ftop[c, i], q0 + bbot[c, m]] += val
                A[xy + bbot[c, i], q0 + bbot[c, m]] -= val
                A[q0 + bbot[c, m], uy + ftop[c, i]] -= val
                A[q0 + bbot[c, m], xy + bbot[c, i]] += val
            for j in range(3):
                tt = fl.beta * interval_integral(p2t[i], p2t[j], h)
                A[ux + ftop[c, i], ux + ftop[c, j]] += tt
                A[ux + ftop[c, i], xx + bbot[c, j]] -= tt
                A[xx + bbot[c, i], ux + ftop[c, j]] -= tt
                A[xx + bbot[c, i], xx + bbot[c, j]] += tt
        # penalty on r = u_y - xi_y + kappa d_y q
        terms = [(uy + ftop[c, i], p2t[i]) for i in range(3)]
        terms += [(xy + bbot[c, i], -p2t[i]) for i in range(3)]
        terms += [(q0 + v, np.array([bulk.kappa * g])) for v, g in dqy.items()]
        w = gamma_n / h
        for r, f in terms:
            for s, g in terms:
                A[r, s] += w * interval_integral(f, g, h)
    return A


# --------------------------------------------------------------- mode pencil


def _p2_cell() -> list[np.ndarray]:
    """Quadratic basis on ``[0, 1]`` with nodes ``(0, 1, 1/2)`` in the interval dof order."""
    return p2_trace()


def mode_pencil(k: tuple[float, float], cfg) -> tuple[np.ndarray, np.ndarray]:
    """Dense pencil of one Fourier mode from hand-derived strain blocks.

    For ``u = psi_b e_d`` and ``phi = psi_a e_c`` the form ``2 D(u) : conj D(phi)``
    splits into ``delta_cd (|k|^2 M + K)`` plus ``g_c(psi_b) conj(g_d(psi_a))``
    with ``g = (i k1, i k2, d/dz)``; every integral is exact.
    """
    nz = cfg.nz
    h = 1.0 / nz
    nfull = 2 * nz + 1
    Mz, Kz, Gz = (np.zeros((nfull, nfull)) for _ in range(3))  # Gz[a, b] = int psi_a psi_b'
    Pm, Pd = np.zeros((nz + 1, nfull)), np.zeros((nz + 1, nfull))
    p2, p1 = _p2_cell(), p1_interval()
    for c in range(nz):
        d2 = [c, c + 1, nz + 1 + c]
        d1 = [c, c + 1]
        for a in range(3):
            for b in range(3):
                Mz[d2[a], d2[b]] += interval_integral(p2[a], p2[b], h)
                Kz[d2[a], d2[b]] += interval_integral(p2[a], p2[b], h, 1, 1)
                Gz[d2[a], d2[b]] += interval_integral(p2[a], p2[b], h, 0, 1)
            for m in range(2):
                Pm[d1[m], d2[a]] += interval_integral(p1[m], p2[a], h)
                Pd[d1[m], d2[a]] += interval_integral(p1[m], p2[a], h, 0, 1)
    keep = np.arange(1, nfull)
    Mz, Kz, Gz = Mz[np.ix_(keep, keep)], Kz[np.ix_(keep, keep)], Gz[np.ix_(keep, keep)]
    Pm, Pd = Pm[:, keep], Pd[:, keep]
    nu = nfull - 1
    k1, k2 = k
    kv = (k1, k2)
    kk = k1 * k1 + k2 * k2

    # 2 D(u):conj D(phi) for u = psi_b e_d, phi = psi_a e_c
    S = np.zeros((3 * nu, 3 * nu), dtype=complex)
    for c in range(3):
        for d in range(3):
            blk = np.zeros((nu, nu), dtype=complex)
            if c == d:
                blk += kk * Mz + Kz
            if c < 2 and d < 2:
                blk += kv[c] * kv[d] * Mz
            elif c < 2 and d == 2:
                blk += 1j * kv[c] * Gz.T  # i k_c int psi_a' psi_b
            elif c == 2 and d < 2:
                blk += -1j * kv[d] * Gz  # -i k_d int psi_a psi_b'
            else:
                blk += Kz
            S[c * nu : (c + 1) * nu, d * nu : (d + 1) * nu] = blk
    # -int div(u) chi
    B = np.hstack([-1j * k1 * Pm, -1j * k2 * Pm, -Pd]).astype(complex)

    n = 4 + 3 * nu + nz + 1
    K = np.zeros((n, n), dtype=complex)
    top = nz - 1
    u1, u2, u3 = 4 + top, 4 + nu + top, 4 + 2 * nu + top
    K[0, 1] = -1
    K[1, 0] = kk**2 + cfg.gamma_p
    K[1, 1] = cfg.eps1 * kk**2
    K[1, 2] = 1 - kk / 12
    K[2, 1] = kk - 12
    K[2, 2] = cfg.eps2 * kk + 48
    K[2, 3] = 72
    K[2, u3] = 12
    K[3, 2] = 6
    K[3, 3] = 12
    vel = slice(4, 4 + 3 * nu)
    pres = slice(4 + 3 * nu, n)
    K[vel, vel] = S
    K[u1, u1] += cfg.beta
    K[u2, u2] += cfg.beta
    K[u3, 2] = -1
    K[pres, vel] = B
    K[vel, pres] = B.conj().T
    M = np.zeros((n, n))
    M[0, 0] = M[1, 1] = M[2, 2] = M[3, 3] = 1
    for f in range(3):
        M[4 + f * nu : 4 + (f + 1) * nu, 4 + f * nu : 4 + (f + 1) * nu] = Mz
    return -K, M
