"""Per-Fourier-mode spectra of the regularized linear FPSI operator.

The three-dimensional fluid layer ``(-1, 0)`` sits under a plate that is
periodic in both horizontal directions. For a horizontal wave vector
``k = 2 pi (m1, m2)`` every unknown is ``f(z) exp(i k . x)`` and the
operator reduces to a one-dimensional problem in ``z``. With the plate
coefficients normalized to one, the mode problem for ``(lambda + A) X = 0`` is

* ``lambda w - v = 0``
* ``lambda v + (|k|^4 + gamma_p) w + eps1 |k|^4 v + (1 - |k|^2 / 12) [q] = 0``
* ``lambda [q] + (|k|^2 - 12) v + (eps2 |k|^2 + 48) [q] + 72 qbar + 12 u_3(0) = 0``
* ``lambda qbar + 6 [q] + 12 qbar = 0``
* ``lambda u - div sigma(u, pi) = 0``, ``div u = 0``, ``u(-1) = 0``

with the traction ``sigma n = [q] n - beta u_tau`` on ``z = 0`` and
``sigma = -pi I + 2 D(u)``. Velocities are P2 and the pressure P1 in ``z``.
The discrete pencil is ``A X = lambda M X`` with ``A = -K``.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .fem import ElementKind, build_dof_map, quadrature_rule, tabulate
from .mesh import build_interval_mesh

logger = logging.getLogger(__name__)

P1I, P2I = ElementKind.P1Int, ElementKind.P2Int

DEFAULT_CUTOFF = 1e9
RESIDUAL_TOL = 1e-8

CAVEAT = (
    "Discrete per-mode spectra of a truncated Fourier sweep; "
    "they cannot detect continuous or essential spectrum of the unbounded operator."
)


@dataclass(frozen=True)
class SpectralConfig:
    """Parameters of the normalized mode problems.

    Attributes
    ----------
    eps1, eps2 : float
        Plate viscoelastic and pressure-jump regularization.
    gamma_p, beta : float
        Spring and slip coefficients.
    k_max : int
        Modes ``m1, m2`` range over ``-k_max .. k_max``.
    nz : int
        Cells on ``(-1, 0)``.
    """

    eps1: float = 1.0
    eps2: float = 1.0
    gamma_p: float = 1.0
    beta: float = 1.0
    k_max: int = 4
    nz: int = 32

    def validate(self) -> None:
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("eps1 and eps2 must be positive")
        if self.gamma_p < 0 or self.beta < 0:
            raise ValueError("gamma_p and beta must be nonnegative")
        if self.nz < 4:
            raise ValueError("nz must be at least 4")
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")


@dataclass(frozen=True, eq=False)
class ModePencil:
    """Dense pencil ``(A, M)`` of one mode with its unknown layout.

    ``layout`` maps ``w, v, qjump, qbar, u1, u2, u3, pi`` to slices.
    ``top`` is the index of ``z = 0`` within each velocity block.
    """

    k: tuple[float, float]
    A: np.ndarray
    M: np.ndarray
    layout: dict[str, slice]
    top: int
    cfg: SpectralConfig
    blocks: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class EigenPair:
    eigenvalue: complex
    vector: np.ndarray
    residual: float


class SpectralError(RuntimeError):
    """Eigensolver failure for a pencil."""


def _layout(nz: int) -> tuple[dict[str, slice], int]:
    nu = 2 * nz
    names = [("w", 1), ("v", 1), ("qjump", 1), ("qbar", 1), ("u1", nu), ("u2", nu), ("u3", nu), ("pi", nz + 1)]
    layout, start = {}, 0
    for name, n in names:
        layout[name] = slice(start, start + n)
        start += n
    return layout, start


def _vertical_blocks(k: tuple[float, float], nz: int) -> dict[str, np.ndarray]:
    """Velocity mass, strain form and divergence for the mode ``k``.

    The clamped vertex ``z = -1`` is removed, so velocity dof ``j`` of the
    full P2 numbering becomes ``j - 1``.

    Returns
    -------
    dict
        ``mass`` (nu x nu, real), ``strain`` (3nu x 3nu) with
        ``strain[(c, i), (d, j)] = 2 int D(psi_j e_d) : conj(D(psi_i e_c))``, and
        ``div`` (np x 3nu) with ``div[m, (d, j)] = -int div(psi_j e_d) chi_m``.
    """
    mesh = build_interval_mesh(nz, 1.0)
    p2 = build_dof_map(mesh, P2I)
    p1 = build_dof_map(mesh, P1I)
    h = 1.0 / nz
    rule = quadrature_rule("interval", 5)
    t2 = tabulate(P2I, rule.points)
    psi = t2.values  # (nq, 3)
    dpsi = t2.gradients[:, :, 0] / h
    chi = tabulate(P1I, rule.points).values  # (nq, 2)
    w = rule.weights * h

    k1, k2 = k
    # grad of (psi_b e_d): column d holds (i k1 psi, i k2 psi, psi')
    g = np.stack([1j * k1 * psi, 1j * k2 * psi, dpsi.astype(complex)], axis=-1)  # (nq, 3, 3): q, b, i
    G = np.zeros((3, 3, len(w), 3, 3), dtype=complex)  # d, b, q, i, j
    for d in range(3):
        G[d, :, :, :, d] = g.transpose(1, 0, 2)
    D = 0.5 * (G + np.swapaxes(G, -1, -2))
    strain_loc = 2.0 * np.einsum("q,dbqij,caqij->cadb", w, D, D.conj())
    div_basis = np.stack([g[:, :, d] for d in range(3)], axis=0)  # d, q, b
    div_loc = -np.einsum("q,qm,dqb->mdb", w, chi, div_basis)
    mass_loc = np.einsum("q,qa,qb->ab", w, psi, psi)

    nfull = p2.n_dofs
    nu = nfull - 1
    npres = p1.n_dofs
    mass = np.zeros((nfull, nfull))
    strain = np.zeros((3, nfull, 3, nfull), dtype=complex)
    div = np.zeros((npres, 3, nfull), dtype=complex)
    for dofs2, dofs1 in zip(p2.cell_dofs, p1.cell_dofs):
        mass[np.ix_(dofs2, dofs2)] += mass_loc
        for c in range(3):
            for d in range(3):
                strain[c][np.ix_(dofs2, [d], dofs2)] += strain_loc[c, :, d, :][:, None, :]
            div[np.ix_(dofs1, [c], dofs2)] += div_loc[:, c, :][:, None, :]
    keep = np.arange(1, nfull)
    return {
        "mass": mass[np.ix_(keep, keep)],
        "strain": strain[:, keep][:, :, :, keep].reshape(3 * nu, 3 * nu),
        "div": div[:, :, keep].reshape(npres, 3 * nu),
        "top": np.array(nz - 1),
    }


def assemble_mode_pencil(k: tuple[float, float], cfg: SpectralConfig) -> ModePencil:
    """Pencil ``(A, M)`` of the mode ``k`` with ``A = -K`` (see module docstring)."""
    cfg.validate()
    nz = cfg.nz
    layout, n = _layout(nz)
    blocks = _vertical_blocks(k, nz)
    nu = 2 * nz
    top = int(blocks["top"])
    kk = float(k[0] ** 2 + k[1] ** 2)
    k4 = kk * kk

    K = np.zeros((n, n), dtype=complex)
    M = np.zeros((n, n))
    iw, iv, iq, ib = 0, 1, 2, 3
    vel = slice(layout["u1"].start, layout["u3"].stop)
    u1, u2, u3 = (layout[f].start + top for f in ("u1", "u2", "u3"))
    pres = layout["pi"]

    K[iw, iv] = -1.0
    K[iv, iw] = k4 + cfg.gamma_p
    K[iv, iv] = cfg.eps1 * k4
    K[iv, iq] = 1.0 - kk / 12.0
    K[iq, iv] = kk - 12.0
    K[iq, iq] = cfg.eps2 * kk + 48.0
    K[iq, ib] = 72.0
    K[iq, u3] = 12.0
    K[ib, iq] = 6.0
    K[ib, ib] = 12.0

    K[vel, vel] = blocks["strain"]
    K[u1, u1] += cfg.beta
    K[u2, u2] += cfg.beta
    K[u3, iq] = -1.0
    K[pres, vel] = blocks["div"]
    K[vel, pres] = blocks["div"].conj().T

    M[iw, iw] = M[iv, iv] = M[iq, iq] = M[ib, ib] = 1.0
    for f in ("u1", "u2", "u3"):
        M[layout[f], layout[f]] = blocks["mass"]
    return ModePencil(
        (float(k[0]), float(k[1])), -K, M.astype(complex), layout, top, cfg, {"nu": np.array(nu), **blocks}
    )


def _residual(A: np.ndarray, M: np.ndarray, lam: complex, x: np.ndarray) -> float:
    return float(np.linalg.norm(A @ x - lam * (M @ x)) / np.linalg.norm(x))


def mode_eigenvalues(pencil: ModePencil, cutoff: float = DEFAULT_CUTOFF) -> list[EigenPair]:
    """Finite generalized eigenpairs of ``A x = lambda M x``.

    Eigenvalues with ``|lambda| > cutoff`` (the infinite eigenvalues of the
    constraint rows) are discarded. Vectors are normalized to unit length
    and, when the residual exceeds ``RESIDUAL_TOL``, improved by one step
    of inverse iteration if that lowers it.
    """
    A = np.asarray(pencil.A)
    M = np.asarray(pencil.M)
    try:
        ab, vecs = scipy.linalg.eig(A, M, right=True, homogeneous_eigvals=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"QZ failed for mode {pencil.k}: {exc}") from None
    alpha, beta = ab
    pairs = []
    for j in range(len(alpha)):
        if abs(beta[j]) == 0 or abs(alpha[j]) > cutoff * abs(beta[j]):
            continue
        lam = complex(alpha[j] / beta[j])
        x = vecs[:, j] / np.linalg.norm(vecs[:, j])
        res = _residual(A, M, lam, x)
        if res > RESIDUAL_TOL:
            x, res = _refine(A, M, lam, x, res)
        pairs.append(EigenPair(lam, x, res))
    pairs.sort(key=lambda p: (-p.eigenvalue.real, p.eigenvalue.imag))
    return pairs


def _refine(A: np.ndarray, M: np.ndarray, lam: complex, x: np.ndarray, res: float) -> tuple[np.ndarray, float]:
    """One inverse-iteration step at the computed eigenvalue."""
    try:
        with warnings.catch_warnings():
            # the shifted matrix is singular by construction
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            y = scipy.linalg.solve(A - lam * M, M @ x)
    except np.linalg.LinAlgError:
        return x, res
    if not np.all(np.isfinite(y)) or np.linalg.norm(y) == 0:
        return x, res
    y = y / np.linalg.norm(y)
    new = _residual(A, M, lam, y)
    return (y, new) if new < res else (x, res)


def energy_terms(pencil: ModePencil, pair: EigenPair) -> dict[str, complex]:
    """Terms of the tested identity for one eigenpair.

    Testing the plate rows with ``conj(v)``, the jump row with
    ``conj([q]) / 12``, the average row with ``conj(qbar)`` and the fluid rows
    with ``conj(u)`` gives terms that sum to zero for an exact pair. The
    ``skew`` entry collects the purely imaginary exchange terms.
    """
    x = np.asarray(pair.vector)
    if not np.any(x):
        raise ValueError("eigenvector must be nonzero")
    lam = pair.eigenvalue
    cfg = pencil.cfg
    lay = pencil.layout
    kk = pencil.k[0] ** 2 + pencil.k[1] ** 2
    k4 = kk * kk
    w, v, qj, qb = x[0], x[1], x[2], x[3]
    nu = int(pencil.blocks["nu"])
    u = x[lay["u1"].start : lay["u3"].stop]
    pi = x[lay["pi"]]
    top = pencil.top
    u_top = [x[lay[f].start + top] for f in ("u1", "u2", "u3")]
    mass = pencil.blocks["mass"]
    mass3 = np.kron(np.eye(3), mass)
    strain = pencil.blocks["strain"]
    div = pencil.blocks["div"]
    return {
        "kinetic_plate": lam * abs(v) ** 2,
        "elastic_plate": np.conj(lam) * (k4 + cfg.gamma_p) * abs(w) ** 2,
        "viscous_plate": cfg.eps1 * k4 * abs(v) ** 2,
        "storage_jump": lam / 12.0 * abs(qj) ** 2,
        "diffusion_jump": cfg.eps2 / 12.0 * kk * abs(qj) ** 2,
        "storage_mean": lam * abs(qb) ** 2,
        "leakage": abs(qj) ** 2 + 12.0 * abs(qb + 0.5 * qj) ** 2,
        "kinetic_fluid": lam * np.vdot(u, mass3 @ u),
        "viscous_fluid": np.vdot(u, strain @ u),
        "slip": cfg.beta * (abs(u_top[0]) ** 2 + abs(u_top[1]) ** 2),
        "skew": (1.0 - kk / 12.0) * qj * np.conj(v)
        + (kk - 12.0) / 12.0 * v * np.conj(qj)
        + u_top[2] * np.conj(qj)
        - qj * np.conj(u_top[2]),
        "pressure": np.vdot(u, div.conj().T @ pi),
    }


def eigen_energy_residual(pencil: ModePencil, pair: EigenPair) -> float:
    """``|sum of terms| / sum |terms|`` of the tested identity."""
    terms = energy_terms(pencil, pair)
    values = np.array(list(terms.values()), dtype=complex)
    scale = float(np.abs(values).sum())
    if scale == 0:
        raise ValueError("all identity terms vanish")
    return float(abs(values.sum()) / scale)


@dataclass(frozen=True)
class ModeSummary:
    """Per-mode row of the spectral sweep."""

    m: tuple[int, int]
    k: tuple[float, float]
    max_real: float
    n_finite: int
    max_residual: float
    max_energy_residual: float
    pairs: tuple[EigenPair, ...] = ()


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FPSI_NUM_THREADS", "1")))
    except ValueError:
        return 1


def analyze_mode(m: tuple[int, int], cfg: SpectralConfig, cutoff: float = DEFAULT_CUTOFF) -> ModeSummary:
    k = (2.0 * np.pi * m[0], 2.0 * np.pi * m[1])
    pencil = assemble_mode_pencil(k, cfg)
    pairs = mode_eigenvalues(pencil, cutoff)
    if not pairs:
        raise SpectralError(f"no finite eigenvalues for mode {m}")
    energy = [eigen_energy_residual(pencil, p) for p in pairs]
    return ModeSummary(
        m=m,
        k=k,
        max_real=max(p.eigenvalue.real for p in pairs),
        n_finite=len(pairs),
        max_residual=max(p.residual for p in pairs),
        max_energy_residual=max(energy),
        pairs=tuple(pairs),
    )


def spectral_abscissa(cfg: SpectralConfig | None = None, cutoff: float = DEFAULT_CUTOFF) -> tuple[float, list[ModeSummary]]:
    """Sweep all modes with ``|m1|, |m2| <= k_max``.

    Returns
    -------
    mu0_estimate : float
        ``-max Re lambda`` over all computed finite eigenvalues.
    table : list of ModeSummary
    """
    cfg = SpectralConfig() if cfg is None else cfg
    cfg.validate()
    r = range(-cfg.k_max, cfg.k_max + 1)
    modes = [(a, b) for a in r for b in r]
    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            table = list(pool.map(lambda m: analyze_mode(m, cfg, cutoff), modes))
    else:
        table = [analyze_mode(m, cfg, cutoff) for m in modes]
    worst = max(row.max_real for row in table)
    return -worst, table
