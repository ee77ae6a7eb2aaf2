"""Conley-Zehnder index of a sampled symplectic path, computed as a loop degree.

The path ``psi: [0, 1] -> Sp(2d)`` is extended through matrices without
eigenvalue 1 to one of two standard endpoints,

    W+ = -I                                  (det(psi(1) - I) > 0)
    W- = diag(2, -1, ..., -1, 1/2, -1, ..., -1)   (det(psi(1) - I) < 0)

and the index is the winding number of ``t -> det(u(t))**2``, where
``u(t)`` is the unitary factor of the polar decomposition of the extended
path, read as a complex ``d x d`` matrix.  On loops this degree agrees with
the one defined through the normalised rotation function, so no rotation
function is implemented.

The extension never uses straight lines in matrix space.  The endpoint is
first moved by a spectral flow ``f_s(A)`` that slides every eigenvalue
along a curve avoiding 1 and commuting with ``lambda -> 1/lambda`` and
complex conjugation (so each intermediate matrix stays real symplectic),
ending with eigenvalues in {2, 1/2, -1}.  A conjugation path then brings it
to block-diagonal form, and pairs of positive hyperbolic blocks are rotated
into ``-I`` two at a time.

Coordinates are ``(x_1..x_d, y_1..y_d)`` with ``J = [[0, I], [-I, 0]]``;
a rotation block ``R(a)`` acts on the ``(x_j, y_j)`` plane and corresponds
to multiplication by ``exp(i a)`` on ``z_j = x_j + i y_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

from .arith import NumberExpr, as_expr, floor_certified, frac_certified
from .index import RotationDecomposition

DEFAULT_SAMPLES = 512
UNWRAP_LIMIT = math.pi / 2
_SEGMENT_STEP = math.pi / 4


class CZPathError(ValueError):
    pass


class ExtensionFailure(CZPathError):
    pass


class UndersampledPath(CZPathError):
    pass


class NonIntegerWinding(CZPathError):
    pass


def standard_J(d: int) -> np.ndarray:
    eye = np.eye(d)
    zero = np.zeros((d, d))
    return np.block([[zero, eye], [-eye, zero]])


def w_plus(d: int) -> np.ndarray:
    return -np.eye(2 * d)


def w_minus(d: int) -> np.ndarray:
    diag = np.full(2 * d, -1.0)
    diag[0] = 2.0
    diag[d] = 0.5
    return np.diag(diag)


def _symplectic_defect(mats: np.ndarray) -> np.ndarray:
    d = mats.shape[-1] // 2
    J = standard_J(d)
    lhs = np.swapaxes(mats, -1, -2) @ J @ mats
    scale = np.maximum(1.0, np.linalg.norm(mats, axis=(-2, -1)) ** 2)
    return np.abs(lhs - J).max(axis=(-2, -1)) / scale


def _distance_to_eigen_one(mats: np.ndarray) -> np.ndarray:
    eye = np.eye(mats.shape[-1])
    smin = np.linalg.svd(mats - eye, compute_uv=False)[..., -1]
    scale = np.maximum(1.0, np.linalg.norm(mats, ord=2, axis=(-2, -1)))
    return smin / scale


@dataclass(frozen=True)
class HyperbolicBlock:
    """``R(pi * half_turns * t) @ diag(stretch**t, stretch**-t)``.

    A negative stretch factor in the signed convention is
    ``HyperbolicBlock(|lambda|, 1)``.
    """

    stretch: float
    half_turns: int = 0

    def __post_init__(self):
        if not self.stretch > 0 or self.stretch == 1.0:
            raise ValueError("stretch must be positive and different from 1")

    @classmethod
    def signed(cls, factor: float) -> "HyperbolicBlock":
        if factor == 0 or abs(factor) == 1.0:
            raise ValueError(f"hyperbolic factor {factor} is degenerate")
        return cls(abs(float(factor)), 0 if factor > 0 else 1)

    def iterate(self, ell: int) -> "HyperbolicBlock":
        return HyperbolicBlock(self.stretch ** ell, self.half_turns * ell)


@dataclass(frozen=True)
class BlockSpec:
    """Block-diagonal path of elementary normal-form blocks.

    ``rotations`` are angles in turns: block ``j`` is ``R(2 pi theta_j t)``.
    """

    rotations: tuple = ()
    hyperbolic: tuple[HyperbolicBlock, ...] = ()
    samples_per_unit: int = DEFAULT_SAMPLES

    def __post_init__(self):
        object.__setattr__(self, "rotations", tuple(as_expr(r) for r in self.rotations))
        hyp = tuple(h if isinstance(h, HyperbolicBlock) else HyperbolicBlock.signed(h) for h in self.hyperbolic)
        object.__setattr__(self, "hyperbolic", hyp)
        if not self.rotations and not self.hyperbolic:
            raise ValueError("a block path needs at least one block")

    @property
    def d(self) -> int:
        return len(self.rotations) + len(self.hyperbolic)

    def iterate(self, ell: int) -> "BlockSpec":
        if ell < 1:
            raise ValueError("iterate must be positive")
        return BlockSpec(
            tuple(ell * r for r in self.rotations),
            tuple(h.iterate(ell) for h in self.hyperbolic),
            self.samples_per_unit,
        )

    def total_turns(self) -> float:
        return sum(abs(float(r)) for r in self.rotations) + sum(h.half_turns for h in self.hyperbolic) / 2

    def rotation_decomposition(self) -> RotationDecomposition:
        """``(p, q, theta)`` predicted by the iteration formula for this path.

        Rotation blocks contribute ``2 * floor(theta)`` to ``p`` and their
        fractional part to ``theta``; hyperbolic blocks contribute their
        half-turn count.
        """
        p = sum(h.half_turns for h in self.hyperbolic)
        thetas = []
        for r in self.rotations:
            p += 2 * floor_certified(r)
            thetas.append(frac_certified(r))
        return RotationDecomposition(p, tuple(thetas))


@dataclass(frozen=True, eq=False)
class SymplecticPath:
    d: int
    ts: np.ndarray
    mats: np.ndarray
    tol: float = 1e-8
    spec: BlockSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        mats = np.asarray(self.mats, dtype=float)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "mats", mats)
        m = len(ts)
        if mats.shape != (m, 2 * self.d, 2 * self.d):
            raise CZPathError(f"expected {m} matrices of size {2 * self.d}, got shape {mats.shape}")
        if m < 2 or ts[0] != 0.0 or ts[-1] != 1.0 or np.any(np.diff(ts) <= 0):
            raise CZPathError("sample times must increase from 0 to 1")
        if np.abs(mats[0] - np.eye(2 * self.d)).max() > self.tol:
            raise CZPathError("path must start at the identity")
        bad = np.nonzero(_symplectic_defect(mats) > self.tol)[0]
        if bad.size:
            raise CZPathError(f"sample {bad[0]} (t={ts[bad[0]]:.6g}) is not symplectic within {self.tol:g}")
        if _distance_to_eigen_one(mats[-1:])[0] <= self.tol:
            raise CZPathError("endpoint has eigenvalue 1 (degenerate path)")

    @property
    def endpoint(self) -> np.ndarray:
        return self.mats[-1]


@dataclass(frozen=True, eq=False)
class ExtendedPath:
    d: int
    ts: np.ndarray
    mats: np.ndarray
    target: str  # "W+" or "W-"
    n_original: int


# -- block paths -------------------------------------------------------------


def _block_matrices(spec: BlockSpec, ts: np.ndarray) -> np.ndarray:
    d = spec.d
    m = len(ts)
    mats = np.zeros((m, 2 * d, 2 * d))
    j = 0
    for r in spec.rotations:
        a = 2 * math.pi * float(r) * ts
        c, s = np.cos(a), np.sin(a)
        mats[:, j, j] = c
        mats[:, j, d + j] = -s
        mats[:, d + j, j] = s
        mats[:, d + j, d + j] = c
        j += 1
    for h in spec.hyperbolic:
        a = math.pi * h.half_turns * ts
        c, s = np.cos(a), np.sin(a)
        e = h.stretch ** ts
        # R(a) @ diag(e, 1/e)
        mats[:, j, j] = c * e
        mats[:, j, d + j] = -s / e
        mats[:, d + j, j] = s * e
        mats[:, d + j, d + j] = c / e
        j += 1
    return mats


def path_from_blocks(
    rotations: Sequence = (),
    hyperbolic: Sequence = (),
    samples_per_unit: int = DEFAULT_SAMPLES,
) -> SymplecticPath:
    """Sampled block-diagonal path; sampling is raised automatically so
    consecutive phase steps stay well under the unwrapping limit."""
    spec = BlockSpec(tuple(rotations), tuple(hyperbolic), samples_per_unit)
    return _path_from_spec(spec)


def _path_from_spec(spec: BlockSpec) -> SymplecticPath:
    m = max(spec.samples_per_unit, math.ceil(16 * spec.total_turns())) + 1
    ts = np.linspace(0.0, 1.0, m)
    return SymplecticPath(spec.d, ts, _block_matrices(spec, ts), spec=spec)


def iterate_block_path(spec: BlockSpec | SymplecticPath, ell: int) -> SymplecticPath:
    if isinstance(spec, SymplecticPath):
        if spec.spec is None:
            raise CZPathError("only block-spec paths can be iterated")
        spec = spec.spec
    return _path_from_spec(spec.iterate(ell))


# -- polar phase -------------------------------------------------------------


def unitary_part(mats: np.ndarray) -> np.ndarray:
    w, _, vt = np.linalg.svd(mats)
    return w @ vt


def det_phase_squared(mats: np.ndarray) -> np.ndarray:
    """``2 * arg det(u)`` for the unitary polar factor of each sample."""
    U = unitary_part(mats)
    d = mats.shape[-1] // 2
    X = (U[..., :d, :d] + U[..., d:, d:]) / 2
    Y = (U[..., d:, :d] - U[..., :d, d:]) / 2
    return 2 * np.angle(np.linalg.det(X + 1j * Y))


def _wrap(a: np.ndarray) -> np.ndarray:
    return (a + np.pi) % (2 * np.pi) - np.pi


# -- admissible extension ----------------------------------------------------


def _spectral_flow(A: np.ndarray, tol: float):
    lam, V = np.linalg.eig(A)
    if np.min(np.abs(lam - 1)) <= tol * max(1.0, np.abs(lam).max()):
        raise ExtensionFailure("endpoint has an eigenvalue within tolerance of 1")
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e8:
        raise ExtensionFailure(f"endpoint is not safely diagonalizable (eigenvector condition {cond:.3g})")
    Vinv = np.linalg.inv(V)
    r = np.abs(lam)
    phi = np.angle(lam)
    real = np.abs(lam.imag) <= 1e-9 * np.maximum(1.0, r)
    positive = real & (lam.real > 0)
    negative = real & (lam.real < 0)
    phi = np.where(negative, np.pi, phi)
    phi = np.where(positive, 0.0, phi)
    log_r = np.log(r)
    ln2 = math.log(2.0)

    def flow(ss: np.ndarray) -> np.ndarray:
        ss = np.asarray(ss)[:, None]
        hyper = np.exp(np.sign(log_r) * ((1 - ss) * np.abs(log_r) + ss * ln2))
        sgn = np.where(phi >= 0, 1.0, -1.0)
        ang = sgn * (np.abs(phi) + ss * (np.pi - np.abs(phi)))
        ell = np.exp((1 - ss) * log_r) * np.exp(1j * ang)
        vals = np.where(positive, hyper, ell)
        out = np.einsum("ij,sj,jk->sik", V, vals, Vinv)
        if np.abs(out.imag).max() > 1e-6 * max(1.0, np.abs(out.real).max()):
            raise ExtensionFailure("spectral flow left the real symplectic group")
        return out.real

    start = flow(np.array([0.0]))[0]
    if np.abs(start - A).max() > 1e-8 * max(1.0, np.abs(A).max()):
        raise ExtensionFailure("endpoint is not diagonalizable (eigen-decomposition does not reproduce it)")
    k = int(np.count_nonzero(positive & (log_r > 0)))
    return flow, k


def _eigenspace(B: np.ndarray, value: float, dim: int) -> np.ndarray:
    if dim == 0:
        return np.zeros((B.shape[0], 0))
    _, _, vt = np.linalg.svd(B - value * np.eye(B.shape[0]))
    return vt[-dim:].T


def _symplectic_gram_schmidt(Z: np.ndarray, J: np.ndarray):
    vecs = [Z[:, i] for i in range(Z.shape[1])]
    xs, ys = [], []
    while vecs:
        a = vecs.pop(0)
        pairings = [abs(a @ J @ v) for v in vecs]
        if not pairings or max(pairings) < 1e-10:
            raise ExtensionFailure("eigenspace of -1 is not symplectic")
        i = int(np.argmax(pairings))
        b = vecs.pop(i)
        b = b / (a @ J @ b)
        rest = []
        for z in vecs:
            z = z + (z @ J @ a) * b - (z @ J @ b) * a
            rest.append(z)
        vecs = rest
        xs.append(a)
        ys.append(b)
    return xs, ys


def _normal_form_basis(B1: np.ndarray, k: int) -> np.ndarray:
    """Symplectic S with ``S^-1 B1 S = diag(2 x k, -1.., 1/2 x k, -1..)``."""
    n2 = B1.shape[0]
    d = n2 // 2
    J = standard_J(d)
    X = _eigenspace(B1, 2.0, k)
    Y = _eigenspace(B1, 0.5, k)
    if k:
        G = X.T @ J @ Y
        Y = Y @ np.linalg.inv(G)
    Z = _eigenspace(B1, -1.0, n2 - 2 * k)
    xs, ys = _symplectic_gram_schmidt(Z, J) if Z.shape[1] else ([], [])
    cols_x = [X[:, i] for i in range(k)] + xs
    cols_y = [Y[:, i] for i in range(k)] + ys
    S = np.column_stack(cols_x + cols_y)
    if np.abs(S.T @ J @ S - J).max() > 1e-6 * max(1.0, np.linalg.norm(S) ** 2):
        raise ExtensionFailure("could not build a symplectic normal-form basis")
    return S


def _diag_form(d: int, k: int) -> np.ndarray:
    diag = np.full(2 * d, -1.0)
    diag[:k] = 2.0
    diag[d : d + k] = 0.5
    return np.diag(diag)


def _conjugation_path(S: np.ndarray, D: np.ndarray):
    d = S.shape[0] // 2
    ev, Q = np.linalg.eigh(S @ S.T)
    ev = np.maximum(ev, 1e-300)
    P = (Q * np.sqrt(ev)) @ Q.T
    U = np.linalg.solve(P, S)
    u = (U[:d, :d] + U[d:, d:]) / 2 + 1j * (U[d:, :d] - U[:d, d:]) / 2
    T, Zs = scipy.linalg.schur(u, output="complex")
    theta = np.angle(np.diag(T))

    def path(ss: np.ndarray) -> np.ndarray:
        out = []
        for s in ss:
            Ps = (Q * ev ** ((1 - s) / 2)) @ Q.T
            us = (Zs * np.exp(1j * (1 - s) * theta)) @ Zs.conj().T
            Us = np.block([[us.real, -us.imag], [us.imag, us.real]])
            C = Ps @ Us
            out.append(C @ D @ np.linalg.inv(C))
        return np.array(out)

    return path


def _pair_collapse_path(d: int, k: int):
    """Rotate the last two positive hyperbolic blocks of D_k into -I."""
    base = _diag_form(d, k)
    i, j = k - 2, k - 1

    def path(ss: np.ndarray) -> np.ndarray:
        out = np.repeat(base[None], len(ss), axis=0)
        for idx, s in enumerate(ss):
            a = 2.0 ** (1 - s)
            c, sn = math.cos(math.pi * s), math.sin(math.pi * s)
            R = np.array([[c, -sn], [sn, c]])
            top = R * a
            bot = R / a
            M = out[idx]
            M[np.ix_([i, j], [i, j])] = top
            M[np.ix_([d + i, d + j], [d + i, d + j])] = bot
        return out

    return path


def _sample_segment(seg: Callable[[np.ndarray], np.ndarray], tol: float, max_samples: int = 1 << 15):
    m = 33
    while True:
        ss = np.linspace(0.0, 1.0, m)
        mats = seg(ss)
        steps = np.abs(_wrap(np.diff(det_phase_squared(mats))))
        if steps.max(initial=0.0) < _SEGMENT_STEP:
            break
        if m > max_samples:
            raise ExtensionFailure("extension segment could not be sampled finely enough")
        m = 2 * m - 1
    if np.min(_distance_to_eigen_one(mats[1:]), initial=np.inf) <= tol:
        raise ExtensionFailure("extension passes within tolerance of eigenvalue 1")
    return mats


def admissible_extension(path: SymplecticPath) -> ExtendedPath:
    d = path.d
    A = path.endpoint
    flow, k = _spectral_flow(A, path.tol)
    segments = [flow]
    B1 = flow(np.array([1.0]))[0]
    S = _normal_form_basis(B1, k)
    D = _diag_form(d, k)
    if np.abs(S - np.eye(2 * d)).max() > 1e-12:
        segments.append(_conjugation_path(S, D))
    while k >= 2:
        segments.append(_pair_collapse_path(d, k))
        k -= 2
    target = "W-" if k == 1 else "W+"
    end = w_minus(d) if k == 1 else w_plus(d)

    sampled = [_sample_segment(seg, path.tol) for seg in segments]
    previous = A
    for block in sampled:
        scale = max(1.0, np.abs(previous).max())
        if np.abs(block[0] - previous).max() > 1e-6 * scale:
            raise ExtensionFailure("extension segments do not join continuously")
        previous = block[-1]
    width = 1.0 / len(sampled)
    ts = [path.ts]
    mats = [path.mats]
    for i, block in enumerate(sampled):
        local = np.linspace(0.0, 1.0, len(block))[1:]
        ts.append(1.0 + width * (i + local))
        mats.append(block[1:])
    all_ts = np.concatenate(ts)
    all_ts[-1] = 2.0
    all_mats = np.concatenate(mats)
    if np.abs(all_mats[-1] - end).max() > 1e-6:
        raise ExtensionFailure("extension did not reach the standard endpoint")
    all_mats[-1] = end
    return ExtendedPath(d, all_ts, all_mats, target, len(path.ts))


def rho_squared_degree(ext: ExtendedPath) -> int:
    phases = det_phase_squared(ext.mats)
    steps = _wrap(np.diff(phases))
    worst = int(np.argmax(np.abs(steps))) if steps.size else 0
    if steps.size and abs(steps[worst]) > UNWRAP_LIMIT:
        raise UndersampledPath(
            f"phase jumps by {abs(steps[worst]):.3f} rad between t={ext.ts[worst]:.6g} and t={ext.ts[worst + 1]:.6g}"
        )
    winding = steps.sum() / (2 * math.pi)
    nearest = round(winding)
    if abs(winding - nearest) > 0.1:
        raise NonIntegerWinding(f"winding {winding:.4f} is not close to an integer")
    return int(nearest)


def conley_zehnder(path: SymplecticPath) -> int:
    return rho_squared_degree(admissible_extension(path))


def block_index(spec: BlockSpec, ell: int = 1) -> int:
    return conley_zehnder(iterate_block_path(spec, ell))


# -- text import -------------------------------------------------------------


def parse_path_text(lines: Iterable[str], tol: float = 1e-8) -> SymplecticPath:
    """One sample per line: ``t m11 m12 ... m_{2d,2d}`` (row-major)."""
    rows = []
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(tok) for tok in line.split()])
        except ValueError:
            raise CZPathError(f"line {lineno}: non-numeric entry") from None
    if not rows:
        raise CZPathError("empty path file")
    width = len(rows[0])
    side = math.isqrt(width - 1)
    if side * side != width - 1 or side % 2:
        raise CZPathError(f"line 1: expected 1 + (2d)^2 numbers, got {width}")
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise CZPathError(f"sample {i}: expected {width} numbers, got {len(r)}")
    arr = np.array(rows)
    return SymplecticPath(side // 2, arr[:, 0], arr[:, 1:].reshape(-1, side, side), tol)


def format_path_text(path: SymplecticPath) -> str:
    out = []
    for t, M in zip(path.ts, path.mats):
        out.append(" ".join([repr(float(t))] + [repr(float(x)) for x in M.ravel()]))
    return "\n".join(out) + "\n"
