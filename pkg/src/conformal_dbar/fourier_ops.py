"""Truncated Fourier basis, operator matrices and data push-forward.

Matrices act on the mean-free coefficient space spanned by ``phi_n``,
``n = -N, ..., -1, 1, ..., N`` (in this row/column order).  Entries are
dual pairings ``A[m, n] = <A phi_n, conj(phi_m)>`` evaluated with the
trapezoid rule.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssemblyError,
    BasisIndexError,
    IllConditionedError,
    InvalidParameterError,
)

DEFAULT_QUAD_NODES = 256
DEFAULT_COND_CAP = 1e12


@dataclass(frozen=True)
class BasisSpec:
    """Mean-free truncated Fourier basis of order ``N`` on a closed curve."""

    N: int
    boundary_length: float = 2 * np.pi
    mean_free: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameterError(f"N must be a positive integer, got {self.N!r}")
        if not self.boundary_length > 0:
            raise InvalidParameterError("boundary_length must be positive")

    @property
    def indices(self):
        n = np.arange(-self.N, self.N + 1)
        return n[n != 0] if self.mean_free else n

    @property
    def size(self):
        return len(self.indices)

    def position(self, n):
        """Row/column of index ``n``."""
        n = int(n)
        if abs(n) > self.N or (n == 0 and self.mean_free):
            raise BasisIndexError(f"index {n} not in basis of order {self.N}")
        pos = n + self.N
        if self.mean_free and n > 0:
            pos -= 1
        return pos


def disk_spec(N):
    return BasisSpec(N)


def basis_eval(spec, n, s):
    """phi_n(s) = exp(2 pi i n s / L) / sqrt(L), with ``L`` the boundary length."""
    if n == 0 and spec.mean_free:
        raise BasisIndexError("n = 0 is excluded from the mean-free basis")
    if abs(n) > spec.N:
        raise BasisIndexError(f"|n| = {abs(n)} exceeds N = {spec.N}")
    L = spec.boundary_length
    return np.exp(2j * np.pi * n * np.asarray(s) / L) / np.sqrt(L)


def quad_params(spec, quad_nodes=DEFAULT_QUAD_NODES, shift=0.0):
    """Equispaced arclength nodes (optionally shifted by a fraction of a step)."""
    h = spec.boundary_length / quad_nodes
    return (np.arange(quad_nodes) + shift) * h, h


def basis_samples(spec, quad_nodes=DEFAULT_QUAD_NODES, shift=0.0):
    """Array of shape ``(quad_nodes, 2N)`` holding phi_n at the nodes."""
    s, _ = quad_params(spec, quad_nodes, shift)
    L = spec.boundary_length
    return np.exp(2j * np.pi * np.outer(s, spec.indices) / L) / np.sqrt(L)


def project(spec, samples, quad_nodes=None, shift=0.0):
    """Coefficients ``<f, conj(phi_m)>`` of sampled functions (columns)."""
    samples = np.asarray(samples)
    Q = samples.shape[0] if quad_nodes is None else quad_nodes
    B = basis_samples(spec, Q, shift)
    h = spec.boundary_length / Q
    return h * (B.conj().T @ samples)


def synthesize(spec, coeffs, quad_nodes=DEFAULT_QUAD_NODES, shift=0.0):
    """Samples of sum_n coeffs[n] phi_n."""
    return basis_samples(spec, quad_nodes, shift) @ np.asarray(coeffs)


@dataclass
class OperatorMatrix:
    """A boundary operator in the mean-free truncated Fourier basis."""

    entries: np.ndarray
    spec: BasisSpec
    role: str = "generic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        n = self.spec.size
        if self.entries.shape != (n, n):
            raise InvalidParameterError(
                f"entries have shape {self.entries.shape}, expected {(n, n)}")

    @property
    def N(self):
        return self.spec.N

    def entry(self, m, n):
        return self.entries[self.spec.position(m), self.spec.position(n)]

    def __sub__(self, other):
        return OperatorMatrix(self.entries - other.entries, self.spec, "generic")

    def __add__(self, other):
        return OperatorMatrix(self.entries + other.entries, self.spec, "generic")

    def truncate(self, N):
        """Sub-block of a lower order ``N``."""
        if N > self.spec.N:
            raise InvalidParameterError("cannot truncate to a larger order")
        sub = BasisSpec(N, self.spec.boundary_length)
        idx = [self.spec.position(n) for n in sub.indices]
        return OperatorMatrix(self.entries[np.ix_(idx, idx)], sub, self.role, dict(self.meta))


def assemble_matrix(apply, spec, quad_nodes=DEFAULT_QUAD_NODES, role="generic"):
    """Matrix of a black-box operator acting on sampled boundary functions.

    ``apply`` receives an array ``(quad_nodes, 2N)`` whose columns are the
    sampled basis functions and must return outputs of the same shape.
    """
    B = basis_samples(spec, quad_nodes)
    out = np.asarray(apply(B))
    if out.shape != B.shape:
        raise AssemblyError(f"apply returned shape {out.shape}, expected {B.shape}")
    if not np.all(np.isfinite(out)):
        raise AssemblyError("apply returned non-finite samples")
    h = spec.boundary_length / quad_nodes
    return OperatorMatrix(h * (B.conj().T @ out), spec, role)


def unit_disk_nd(N):
    """R_1 = diag(1/|n|) for the homogeneous unit disk."""
    spec = BasisSpec(N)
    return OperatorMatrix(np.diag(1.0 / np.abs(spec.indices)), spec, "ND")


def unit_disk_dn(N):
    """Lambda_1 = diag(|n|) for the homogeneous unit disk."""
    spec = BasisSpec(N)
    return OperatorMatrix(np.diag(np.abs(spec.indices).astype(float)), spec, "DN")


def apply_unit_disk_dn(samples):
    """Lambda_1 on equispaced samples of the unit circle, via FFT."""
    samples = np.asarray(samples)
    Q = samples.shape[0]
    freq = np.fft.fftfreq(Q, 1.0 / Q)
    return np.fft.ifft(np.abs(freq)[:, None] * np.fft.fft(samples, axis=0), axis=0) \
        if samples.ndim == 2 else np.fft.ifft(np.abs(freq) * np.fft.fft(samples))


def nd_to_dn(R, cond_cap=DEFAULT_COND_CAP):
    """Invert an ND matrix; refuses when the condition number exceeds ``cond_cap``."""
    cond = np.linalg.cond(R.entries)
    if not np.isfinite(cond) or cond > cond_cap:
        raise IllConditionedError(
            f"ND matrix condition number {cond:.3e} exceeds cap {cond_cap:.1e}", cond)
    L = np.linalg.solve(R.entries, np.eye(R.spec.size))
    role = {"ND": "DN", "relative-ND": "generic"}.get(R.role, "generic")
    return OperatorMatrix(L, R.spec, role, {"condition": cond})


def transformed_current(cmap, n, z, spec=None):
    """Conformally transformed basis current |Phi'(z)| phi_n(Phi(z)) on the true boundary."""
    spec = spec or BasisSpec(max(abs(int(n)), 1))
    z = np.asarray(z, dtype=complex)
    w = cmap.forward(z)
    theta = np.mod(np.angle(w), 2 * np.pi)
    return cmap.dphi_abs(z) * basis_eval(spec, n, theta)


def pushforward_nd(measured, cmap, spec, quad_nodes=DEFAULT_QUAD_NODES, role="ND"):
    """Virtual-disk ND matrix from true-domain boundary potentials.

    ``measured(points)`` returns an array ``(len(points), 2N)`` with the
    potential produced by each transformed current ``phi_n`` (column order of
    ``spec``), read at the true-boundary points.  The potentials are sampled at
    ``Psi`` of equiangular disk nodes, ground-fixed by mean subtraction and
    projected onto the disk basis.
    """
    shift = 0.5 if getattr(cmap, "has_corners", False) else 0.0
    theta, _ = quad_params(BasisSpec(spec.N), quad_nodes, shift)
    pts = cmap.inverse(np.exp(1j * theta))
    U = np.asarray(measured(pts))
    if U.shape != (quad_nodes, spec.size):
        raise AssemblyError(f"measured returned shape {U.shape}")
    U = U - U.mean(axis=0)
    disk = BasisSpec(spec.N)
    M = project(disk, U, quad_nodes, shift)
    return OperatorMatrix(M, disk, role, {"node_shift": shift})


def rotation_phases(spec, theta):
    """Diagonal of the phase matrix exp(i n theta)."""
    return np.exp(1j * spec.indices * theta)
