"""Continuous 2D basis functions, OMP sparse coding and dictionary learning.

Because mesh patches sample the surface irregularly, the dictionary is
continuous: every atom is a linear combination of fixed smooth basis
functions over the patch domain, d_i = sum_j A[j, i] * phi_j.  Evaluating
the basis at a patch's (u, v) coordinates gives a per-patch matrix Phi, so
the per-patch dictionary is Phi @ A and standard pursuit applies unchanged.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"MDLD"
FORMAT_VERSION = 1
_KIND_CODES = {"gaussian": 0, "cosine": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


@dataclass
class BasisSet:
    """Grid of smooth functions over the disk of the patch domain."""

    kind: str
    m_basis: int
    domain_radius: float
    centers: np.ndarray = None   # (m, 2) gaussian centers
    width: float = 0.0           # gaussian standard deviation
    freqs: np.ndarray = None     # (m, 2) cosine frequency indices

    def evaluate(self, uv):
        """Phi matrix: rows follow ``uv``, one column per basis function."""
        uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
        r = self.domain_radius
        if self.kind == "gaussian":
            d2 = ((uv[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
            return np.exp(-d2 / (2.0 * self.width**2))
        arg_u = np.pi * (uv[:, 0:1] + r) / (2.0 * r)
        arg_v = np.pi * (uv[:, 1:2] + r) / (2.0 * r)
        return np.cos(self.freqs[None, :, 0] * arg_u) * np.cos(self.freqs[None, :, 1] * arg_v)

    def evaluate_one(self, j, u, v):
        """Scalar evaluation of basis function j; independent of ``evaluate``."""
        if self.kind == "gaussian":
            cu, cv = self.centers[j]
            return math.exp(-((u - cu) ** 2 + (v - cv) ** 2) / (2.0 * self.width**2))
        r = self.domain_radius
        k, l = self.freqs[j]
        return math.cos(k * math.pi * (u + r) / (2 * r)) * math.cos(l * math.pi * (v + r) / (2 * r))


@dataclass
class SampledBasis:
    phi: np.ndarray  # (|patch|, m_basis)


@dataclass
class Dictionary:
    basis: BasisSet
    coefficients: np.ndarray  # (m_basis, n_atoms), columns unit norm
    training_residuals: list = field(default_factory=list)

    @property
    def n_atoms(self):
        return self.coefficients.shape[1]


@dataclass
class SparseCode:
    alpha: np.ndarray
    support: np.ndarray
    residual_norm: float


def make_basis(kind, m_basis=16, domain_radius=1.0):
    """Square grid of ``m_basis`` gaussian bumps or separable cosines."""
    if kind not in _KIND_CODES:
        raise ValueError(f"unknown basis kind {kind!r}")
    if m_basis < 1:
        raise ValueError("m_basis must be >= 1")
    g = math.isqrt(m_basis)
    if g * g != m_basis:
        raise ValueError(f"m_basis must be a perfect square for grid layouts, got {m_basis}")
    r = float(domain_radius)
    if r <= 0:
        raise ValueError("domain_radius must be positive")
    if kind == "gaussian":
        axis = np.linspace(-r, r, g) if g > 1 else np.zeros(1)
        cu, cv = np.meshgrid(axis, axis, indexing="ij")
        centers = np.stack([cu.reshape(-1), cv.reshape(-1)], axis=1)
        width = (2.0 * r / (g - 1)) if g > 1 else 2.0 * r
        return BasisSet("gaussian", m_basis, r, centers=centers, width=width)
    k, l = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    freqs = np.stack([k.reshape(-1), l.reshape(-1)], axis=1).astype(np.float64)
    return BasisSet("cosine", m_basis, r, freqs=freqs)


def sample_basis(basis, signal):
    """Evaluate the basis at a patch's uv samples (clipped to the domain)."""
    uv = np.asarray(signal.uv, dtype=np.float64)
    if uv.size == 0:
        raise ValueError("cannot sample the basis on an empty patch")
    norms = np.linalg.norm(uv, axis=1)
    outside = norms > basis.domain_radius
    if outside.any():
        warnings.warn(f"{int(outside.sum())} uv samples outside the basis domain; clipping")
        uv = uv.copy()
        uv[outside] *= (basis.domain_radius / norms[outside])[:, None]
    return SampledBasis(basis.evaluate(uv))


def omp(y, D, L, eps=0.0):
    """Orthogonal matching pursuit: greedy atoms, least squares on the support.

    Stops at ``L`` selected atoms or when the residual norm drops to ``eps``,
    whichever comes first.  Zero-norm columns are skipped; ties go to the
    lowest atom index.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    D = np.asarray(D, dtype=np.float64)
    if L < 1:
        raise ValueError("sparsity budget L must be >= 1")
    if D.ndim != 2 or D.shape[0] != len(y):
        raise ValueError("dictionary shape does not match the signal")
    n_atoms = D.shape[1]
    col_norm = np.linalg.norm(D, axis=0)
    usable = col_norm > 1e-12 * max(col_norm.max(), 1e-300)
    if not usable.any():
        raise ValueError("dictionary has no nonzero atoms")

    alpha = np.zeros(n_atoms)
    support = []
    residual = y.copy()
    coef = np.zeros(0)
    budget = min(L, int(usable.sum()))
    while len(support) < budget:
        rnorm = np.linalg.norm(residual)
        if rnorm <= eps:
            break
        corr = np.abs(D.T @ residual)
        corr[usable] /= col_norm[usable]
        corr[~usable] = -np.inf
        corr[support] = -np.inf
        best = int(np.argmax(corr))
        if not np.isfinite(corr[best]) or corr[best] <= 1e-14 * rnorm:
            break
        support.append(best)
        coef, *_ = np.linalg.lstsq(D[:, support], y, rcond=None)
        residual = y - D[:, support] @ coef
    alpha[support] = coef
    return SparseCode(alpha, np.asarray(support, dtype=np.int64),
                      float(np.linalg.norm(residual)))


def _ls_basis_coefficients(phi, z):
    coef, *_ = np.linalg.lstsq(phi, z, rcond=None)
    return coef


def init_dictionary(signals, basis, n_atoms, seed=0):
    """Seed the coefficient matrix from randomly chosen training patches.

    Each column is the least-squares basis fit of one distinct patch signal,
    normalized; degenerate (all-flat) patches are passed over.
    """
    if n_atoms > len(signals):
        raise ValueError(f"need at least {n_atoms} training patches, have {len(signals)}")
    rng = np.random.default_rng(seed)
    columns = []
    for idx in rng.permutation(len(signals)):
        sig, sampled = signals[idx]
        coef = _ls_basis_coefficients(sampled.phi, sig.z)
        norm = np.linalg.norm(coef)
        if norm > 1e-12:
            columns.append(coef / norm)
            if len(columns) == n_atoms:
                break
    if len(columns) < n_atoms:
        raise ValueError(
            f"only {len(columns)} non-degenerate patches available for {n_atoms} atoms"
        )
    return Dictionary(basis, np.stack(columns, axis=1))


def _mean_residual(zs, phis, A, alphas):
    """Root-mean-square residual norm over the training patches."""
    sq = [np.linalg.norm(z - phi @ (A @ a)) ** 2 for z, phi, a in zip(zs, phis, alphas)]
    return float(np.sqrt(np.mean(sq)))


def ksvd_train(signals, basis, n_atoms, L=4, eps=None, iterations=20,
               dictionary=None, seed=0, inner_iterations=3):
    """Alternate sparse coding and atom-wise updates of the coefficient matrix.

    Every patch carries its own sampled basis, so the classical rank-1 SVD
    update is replaced by alternating least squares on (atom column,
    coefficient row) over the patches that use the atom.  Codes are refreshed
    every sweep; if a sweep would raise the total squared residual, the worst
    per-patch regressions are reverted, so the logged residual (RMS over
    patches) never increases.
    """
    if not signals:
        raise ValueError("no training signals")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    zs = [np.asarray(sig.z, dtype=np.float64) for sig, _ in signals]
    phis = [np.asarray(sb.phi, dtype=np.float64) for _, sb in signals]
    if max(np.linalg.norm(z) for z in zs) <= 1e-12 * basis.domain_radius:
        raise ValueError("all training signals are zero; nothing to learn")
    eps_each = [1e-4 * np.linalg.norm(z) if eps is None else float(eps) for z in zs]

    if dictionary is None:
        dictionary = init_dictionary(signals, basis, n_atoms, seed=seed)
    A = dictionary.coefficients.copy()
    grams = [phi.T @ phi for phi in phis]
    alphas = None
    residuals = []
    for _ in range(iterations):
        # fresh sparse codes, but never let a sweep raise the total objective
        new_alphas, new_sq = [], []
        for p, (z, phi) in enumerate(zip(zs, phis)):
            code = omp(z, phi @ A, L, eps_each[p])
            new_alphas.append(code.alpha)
            new_sq.append(code.residual_norm ** 2)
        if alphas is not None:
            old_sq = [np.linalg.norm(z - phi @ (A @ a)) ** 2
                      for z, phi, a in zip(zs, phis, alphas)]
            deltas = np.asarray(new_sq) - np.asarray(old_sq)
            total = deltas.sum()
            if total > 0:
                for p in np.argsort(-deltas):
                    if total <= 0 or deltas[p] <= 0:
                        break
                    new_alphas[p] = alphas[p]
                    total -= deltas[p]
        alphas = new_alphas

        _update_atoms(A, zs, phis, grams, alphas, inner_iterations)
        residuals.append(_mean_residual(zs, phis, A, alphas))
    return Dictionary(basis, A, training_residuals=residuals)


def _update_atoms(A, zs, phis, grams, alphas, inner_iterations):
    n_atoms = A.shape[1]
    m = A.shape[0]
    for i in range(n_atoms):
        users = [p for p in range(len(zs)) if alphas[p][i] != 0.0]
        if not users:
            _revive_atom(A, i, zs, phis, alphas)
            continue
        # residuals with atom i's contribution removed
        errs = []
        for p in users:
            contrib = A @ alphas[p]
            contrib -= A[:, i] * alphas[p][i]
            errs.append(zs[p] - phis[p] @ contrib)
        a0 = A[:, i].copy()
        c0 = np.array([alphas[p][i] for p in users])
        a, c = a0.copy(), c0.copy()
        for _ in range(inner_iterations):
            # coefficients given the atom
            for k, p in enumerate(users):
                g = phis[p] @ a
                gg = g @ g
                c[k] = (errs[k] @ g) / gg if gg > 1e-300 else 0.0
            # atom given the coefficients
            lhs = np.zeros((m, m))
            rhs = np.zeros(m)
            for k, p in enumerate(users):
                lhs += c[k] ** 2 * grams[p]
                rhs += c[k] * (phis[p].T @ errs[k])
            try:
                a_new = np.linalg.solve(lhs + 1e-12 * np.eye(m), rhs)
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(a_new) > 1e-300:
                a = a_new
        # close the pair with a final coefficient half-step
        for k, p in enumerate(users):
            g = phis[p] @ a
            gg = g @ g
            c[k] = (errs[k] @ g) / gg if gg > 1e-300 else 0.0

        def fit(av, cv):
            return sum(np.linalg.norm(errs[k] - cv[k] * (phis[p] @ av)) ** 2
                       for k, p in enumerate(users))

        if fit(a, c) > fit(a0, c0):
            a, c = a0, c0  # regularized solve went sideways; keep the old atom
        norm = np.linalg.norm(a)
        if norm <= 1e-12:
            for p in users:
                alphas[p][i] = 0.0
            _revive_atom(A, i, zs, phis, alphas)
            continue
        A[:, i] = a / norm
        for k, p in enumerate(users):
            alphas[p][i] = c[k] * norm


def _revive_atom(A, i, zs, phis, alphas):
    """Re-seed an unused atom from the worst-reconstructed patch."""
    res = [np.linalg.norm(z - phi @ (A @ a)) for z, phi, a in zip(zs, phis, alphas)]
    worst = int(np.argmax(res))
    coef = _ls_basis_coefficients(phis[worst], zs[worst])
    norm = np.linalg.norm(coef)
    if norm > 1e-12:
        A[:, i] = coef / norm


# -- dictionary file format -------------------------------------------------

_HEADER = struct.Struct("<4sIBIId")


def save_dictionary(dictionary, path):
    """Binary dictionary file: fixed header, basis parameters, then A."""
    basis = dictionary.basis
    blob = [_HEADER.pack(MAGIC, FORMAT_VERSION, _KIND_CODES[basis.kind],
                         basis.m_basis, dictionary.n_atoms, basis.domain_radius)]
    if basis.kind == "gaussian":
        blob.append(np.ascontiguousarray(basis.centers, dtype="<f8").tobytes())
        blob.append(struct.pack("<d", basis.width))
    else:
        blob.append(np.ascontiguousarray(basis.freqs, dtype="<f8").tobytes())
    blob.append(np.ascontiguousarray(dictionary.coefficients, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))


def load_dictionary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated dictionary file")
    magic, version, kind_code, m_basis, n_atoms, radius = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a dictionary file (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported dictionary version {version}")
    if kind_code not in _KIND_NAMES:
        raise ValueError(f"{path}: unknown basis kind code {kind_code}")
    kind = _KIND_NAMES[kind_code]
    offset = _HEADER.size

    def take(count):
        nonlocal offset
        end = offset + count * 8
        if end > len(raw):
            raise ValueError(f"{path}: truncated dictionary file")
        out = np.frombuffer(raw, "<f8", count, offset).copy()
        offset = end
        return out

    if kind == "gaussian":
        centers = take(2 * m_basis).reshape(m_basis, 2)
        width = float(take(1)[0])
        basis = BasisSet("gaussian", m_basis, radius, centers=centers, width=width)
    else:
        freqs = take(2 * m_basis).reshape(m_basis, 2)
        basis = BasisSet("cosine", m_basis, radius, freqs=freqs)
    A = take(m_basis * n_atoms).reshape(m_basis, n_atoms)
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after dictionary payload")
    return Dictionary(basis, A)
