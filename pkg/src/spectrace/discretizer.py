"""Finite-element oracle for the linearized operator.

Each channel contributes the unknowns y(t_1), ..., y(t_n) on a uniform grid
(y(0) = 0 is eliminated, t_n = 1) and the auxiliary component y1. The forms

    a(Y, Y) = int y'^2 + (gamma + q) y^2 dt - 2 y(1) y1
    b(Y, Y) = int y^2 dt + y1^2 + y(1)^2

are discretized with piecewise-linear elements. The third component of the
direct sum is y(1) itself, so it adds a unit weight on the boundary node of
B instead of a new unknown. The natural boundary conditions of the discrete
problem are then y'(1) = lam y(1) + y1 and lam y1 = -y(1), which together
reproduce y'(1) = (lam - 1/lam) y(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .charroots import has_low_oscillatory_root
from .errors import InvariantError, NonConvergenceError, SpecError
from .model import Branch, ChannelPotential, OperatorSpec, PotentialSpec

JACOBI_LIMIT = 256
_GL3 = (np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)]), np.array([5.0, 8.0, 5.0]) / 9.0)


@dataclass(frozen=True, eq=False)
class FormPair:
    A: np.ndarray
    B: np.ndarray
    n: int
    channels: tuple[int, ...]
    gammas: tuple[float, ...]

    @property
    def dof(self) -> int:
        return self.A.shape[0]

    def block(self, i: int) -> slice:
        """Index range of the i-th channel block (0-based)."""
        size = self.n + 1
        return slice(i * size, (i + 1) * size)


def _element_moments(q: Callable, n: int):
    """int q phi_i phi_j over each element, for the two local hat functions.

    Returns arrays (LL, LR, RR) of length n, element e spanning [e h, (e+1) h].
    """
    h = 1.0 / n
    s = 0.5 * (_GL3[0] + 1.0)
    w = 0.5 * _GL3[1]
    t = (np.arange(n)[:, None] + s[None, :]) * h
    qv = np.broadcast_to(np.asarray(q(t), dtype=float), t.shape)
    L = 1.0 - s
    R = s
    return h * (qv @ (w * L * L)), h * (qv @ (w * L * R)), h * (qv @ (w * R * R))


def _channel_block(gamma: float, q: ChannelPotential | None, n: int):
    if n < 8:
        raise SpecError("grid size n must be at least 8")
    h = 1.0 / n
    size = n + 1
    A = np.zeros((size, size))
    B = np.zeros((size, size))
    i = np.arange(n)
    # stiffness and gamma-mass on the n free nodes (node j <-> t_{j+1})
    Ad = np.full(n, 2.0 / h + gamma * 4.0 * h / 6.0)
    Ad[-1] = 1.0 / h + gamma * 2.0 * h / 6.0
    Ao = np.full(n - 1, -1.0 / h + gamma * h / 6.0)
    Bd = np.full(n, 4.0 * h / 6.0)
    Bd[-1] = 2.0 * h / 6.0
    Bo = np.full(n - 1, h / 6.0)
    if q is not None and not (isinstance(q, ChannelPotential) and q.is_zero):
        LL, LR, RR = _element_moments(q, n)
        # element e couples free nodes e-1 (left, absent for e = 0) and e (right)
        Ad += RR
        Ad[:-1] += LL[1:]
        Ao += LR[1:]
    A[i, i] = Ad
    A[i[:-1], i[1:]] = Ao
    A[i[1:], i[:-1]] = Ao
    B[i, i] = Bd
    B[i[:-1], i[1:]] = Bo
    B[i[1:], i[:-1]] = Bo
    # boundary coupling with y1 and the unit weights of the two extra components
    A[n - 1, n] = A[n, n - 1] = -1.0
    B[n - 1, n - 1] += 1.0
    B[n, n] = 1.0
    return A, B


def assemble_forms(gammas: Sequence[float], q: PotentialSpec | None = None, n: int = 1000,
                   coupling: Mapping[tuple[int, int], Callable] | None = None,
                   channels: Sequence[int] | None = None) -> FormPair:
    """Assemble (A_h, B_h) for the given channels (1-based indices into gammas order).

    `coupling` maps unordered channel pairs (k, l), k != l, to a function
    q_kl(t) = q_lk(t); it adds off-diagonal potential blocks between the y
    unknowns of the two channels.
    """
    gammas = tuple(float(g) for g in gammas)
    chans = tuple(channels) if channels is not None else tuple(range(1, len(gammas) + 1))
    if len(chans) != len(gammas):
        raise SpecError("one channel index per gamma is required")
    q = q or PotentialSpec()
    size = n + 1
    dof = size * len(gammas)
    A = np.zeros((dof, dof))
    B = np.zeros((dof, dof))
    for b, (k, g) in enumerate(zip(chans, gammas)):
        Ab, Bb = _channel_block(g, q.channel(k), n)
        sl = slice(b * size, (b + 1) * size)
        A[sl, sl] = Ab
        B[sl, sl] = Bb
    for (k, l), qkl in (coupling or {}).items():
        if k == l or k not in chans or l not in chans:
            raise SpecError(f"invalid coupling pair ({k}, {l})")
        LL, LR, RR = _element_moments(qkl, n)
        C = np.zeros((n, n))
        i = np.arange(n)
        C[i, i] = RR
        C[i[:-1], i[:-1]] += LL[1:]
        C[i[:-1], i[1:]] = LR[1:]
        C[i[1:], i[:-1]] = LR[1:]
        bk, bl = chans.index(k) * size, chans.index(l) * size
        A[bk:bk + n, bl:bl + n] += C
        A[bl:bl + n, bk:bk + n] += C.T
    return FormPair(A, B, n, chans, gammas)


def _round_robin(N: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint index pairs covering every (p, q) once per sweep."""
    idx = list(range(N)) + ([-1] if N % 2 else [])
    M = len(idx)
    rounds = []
    for _ in range(M - 1):
        P, Q = [], []
        for j in range(M // 2):
            a, b = idx[j], idx[M - 1 - j]
            if a >= 0 and b >= 0:
                P.append(min(a, b))
                Q.append(max(a, b))
        rounds.append((np.array(P, dtype=int), np.array(Q, dtype=int)))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def jacobi_eigenvalues(C: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60,
                       vectors: bool = False):
    """Cyclic Jacobi for a dense symmetric matrix.

    Each round applies a set of disjoint rotations at once (round-robin
    ordering). Stops when the off-diagonal Frobenius norm drops below
    tol times the Frobenius norm of C.
    """
    C = np.array(C, dtype=float, copy=True)
    N = C.shape[0]
    V = np.eye(N) if vectors else None
    if N == 1:
        return (C.diagonal().copy(), V) if vectors else C.diagonal().copy()
    scale = np.linalg.norm(C)
    rounds = _round_robin(N)

    def off():
        return float(np.linalg.norm(C - np.diag(C.diagonal())))

    for _ in range(max_sweeps):
        if off() <= tol * scale:
            break
        for P, Q in rounds:
            apq = C[P, Q]
            live = np.abs(apq) > 0.0
            if not live.any():
                continue
            P, Q, apq = P[live], Q[live], apq[live]
            with np.errstate(over="ignore"):
                theta = (C[Q, Q] - C[P, P]) / (2.0 * apq)
                # theta = inf gives t = 0: the entry is negligible
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rp, rq = C[P, :], C[Q, :]
            C[P, :] = c[:, None] * rp - s[:, None] * rq
            C[Q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = C[:, P], C[:, Q]
            C[:, P] = cp * c - cq * s
            C[:, Q] = cp * s + cq * c
            C[P, Q] = 0.0
            C[Q, P] = 0.0
            if vectors:
                vp, vq = V[:, P], V[:, Q]
                V[:, P] = vp * c - vq * s
                V[:, Q] = vp * s + vq * c
    else:
        raise NonConvergenceError("Jacobi sweeps did not converge")
    w = C.diagonal().copy()
    order = np.argsort(w, kind="stable")
    if vectors:
        return w[order], V[:, order]
    return w[order]


def solve_gevp(forms: FormPair | tuple, count: int | None = None, vectors: bool = False,
               method: str = "auto"):
    """Eigenvalues (ascending) of A u = lam B u.

    B is Cholesky-factored and the reduced symmetric matrix is diagonalized by
    cyclic Jacobi up to JACOBI_LIMIT unknowns; larger systems go to LAPACK.
    `count` keeps only the lowest eigenvalues.
    """
    A, B = (forms.A, forms.B) if isinstance(forms, FormPair) else forms
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    N = A.shape[0]
    use_jacobi = method == "jacobi" or (method == "auto" and N <= JACOBI_LIMIT)
    try:
        L = scipy.linalg.cholesky(B, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InvariantError("mass matrix is not positive definite") from exc
    if use_jacobi:
        Linv = scipy.linalg.solve_triangular(L, np.eye(N), lower=True)
        C = Linv @ A @ Linv.T
        C = 0.5 * (C + C.T)
        if vectors:
            w, Y = jacobi_eigenvalues(C, vectors=True)
            U = Linv.T @ Y
        else:
            w = jacobi_eigenvalues(C)
    else:
        sub = None if count is None else [0, min(count, N) - 1]
        if vectors:
            w, U = scipy.linalg.eigh(A, B, subset_by_index=sub)
        else:
            w = scipy.linalg.eigh(A, B, eigvals_only=True, subset_by_index=sub)
    if count is not None:
        w = w[:count]
        if vectors:
            U = U[:, :count]
    return (w, U) if vectors else w


@dataclass(frozen=True)
class OracleChannel:
    """Discrete eigenvalues of one channel block with inferred branch tags."""

    k: int
    gamma: float
    lams: tuple[float, ...]
    branches: tuple[str, ...]
    ms: tuple[int | None, ...]

    def census(self) -> dict[str, int]:
        out = {b.value: 0 for b in Branch}
        for b in self.branches:
            out[b] += 1
        return out


def tag_branches(gamma: float, lams: Sequence[float]) -> tuple[tuple[str, ...], tuple[int | None, ...]]:
    """Branch and mode index from the eigenvalue's position relative to 0 and gamma."""
    branches, ms = [], []
    m = 0 if has_low_oscillatory_root(gamma) else 1
    for lam in lams:
        if lam < 0.0:
            branches.append(Branch.NEGATIVE.value)
            ms.append(None)
        elif lam < gamma:
            branches.append(Branch.PRINCIPAL.value)
            ms.append(None)
        else:
            branches.append(Branch.OSCILLATORY.value)
            ms.append(m)
            m += 1
    return tuple(branches), tuple(ms)


def oracle_spectrum(spec: OperatorSpec | Sequence[float], q: PotentialSpec | None = None, n: int = 1000,
                    per_channel_count: int = 10,
                    coupling: Mapping[tuple[int, int], Callable] | None = None) -> list[OracleChannel]:
    """Lowest eigenvalues per channel; coupled q is solved as one system."""
    gammas = spec.gammas if isinstance(spec, OperatorSpec) else tuple(spec)
    q = q or PotentialSpec()
    out = []
    if coupling:
        forms = assemble_forms(gammas, q, n, coupling)
        lams = solve_gevp(forms, count=per_channel_count * len(gammas))
        # coupled eigenvalues do not belong to one channel; report them under k = 0
        br, ms = tag_branches(min(gammas), lams)
        return [OracleChannel(0, float(min(gammas)), tuple(float(v) for v in lams), br, ms)]
    for k, g in enumerate(gammas, start=1):
        forms = assemble_forms([g], q, n, channels=[k])
        lams = solve_gevp(forms, count=per_channel_count)
        br, ms = tag_branches(g, lams)
        out.append(OracleChannel(k, float(g), tuple(float(v) for v in lams), br, ms))
    return out


def green_identity_residuals(forms: FormPair, pairs: int = 100, seed: int = 0) -> np.ndarray:
    """|u^T A v - v^T A u| for random vector pairs.

    Both bilinear forms are summed exactly (fsum) over the nonzero entries of
    A, so the residual is exactly zero when A is exactly symmetric.
    """
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((pairs, forms.dof))
    V = rng.standard_normal((pairs, forms.dof))
    i, j = np.nonzero(forms.A)
    a = forms.A[i, j]
    out = np.empty(pairs)
    for r in range(pairs):
        u, v = U[r], V[r]
        out[r] = abs(math.fsum(u[i] * v[j] * a) - math.fsum(v[i] * u[j] * a))
    return out


def eigenpair_checks(forms: FormPair, count: int = 10) -> dict:
    """Rayleigh-quotient and boundary-relation residuals for the lowest eigenpairs of a single block."""
    lams, U = solve_gevp(forms, count=count, vectors=True)
    n = forms.n
    rq = np.einsum("ij,ik,kj->j", U, forms.A, U) / np.einsum("ij,ik,kj->j", U, forms.B, U)
    y_end = U[n - 1, :]
    y_aux = U[n, :]
    scale = np.maximum(np.abs(y_end), np.abs(lams * y_aux))
    bc = np.abs(lams * y_aux + y_end) / np.where(scale > 0, scale, 1.0)
    return {
        "lams": lams,
        "rayleigh_residual": np.abs(rq - lams),
        "boundary_relation": bc,
    }


def dump_matrix(M: np.ndarray, path) -> None:
    """Dense text dump, row-major, one row per line."""
    np.savetxt(path, M, fmt="%.17g", delimiter=" ")


def convergence_orders(errors: Sequence[float]) -> list[float]:
    """log2 of successive error ratios under grid doubling."""
    e = np.asarray(errors, dtype=float)
    return [float(math.log2(a / b)) for a, b in zip(e, e[1:])]
