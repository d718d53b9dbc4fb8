"""Nonlocal machinery on the aperture line y = 0.

The exterior half-space is eliminated through a Dirichlet-to-Neumann map
whose Fourier symbol is ``beta(xi, s) = -sqrt(xi**2 + s**2/c**2)`` with the
root chosen so that ``Re beta < 0`` for every admissible frequency
``Re s > 0``.  All operators here act on a uniform periodic sampling of the
line, with apertures marked by boolean masks and the conducting ground plane
realized as exact zeros between them.

Transform convention, fixed here and used everywhere in the package:

    coefficients   c_m = (1/N) * sum_k u(x_k) exp(-i xi_m x_k)
    synthesis      u(x_k) = sum_m c_m exp(+i xi_m x_k)

with ``xi_m = 2*pi*m/L`` for ``m in [-N/2, N/2)``.  The symbol is even in
``xi``, so applying a multiplier ``g(xi)`` reduces to
``ifft(g(xi) * fft(u))`` with numpy's default ordering; the origin phase
cancels identically.  The dense oracle `dtn_dense` is built from the same
mode set, so FFT/dense agreement is a convention-free check.

Quadrature on the line is the periodic trapezoidal rule (uniform weight
``dx`` per sample).  For vectors supported on the apertures this coincides
with the aperture-interval pairing and keeps the discrete passivity
identity exact.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, GridMismatch, SizeError

__all__ = [
    "FULL_LINE",
    "UNION",
    "TraceGrid",
    "DtnSymbol",
    "TraceVector",
    "beta",
    "apply_B",
    "dtn_dense",
    "restrict",
    "restrict_union",
    "coupled_B_row",
    "trace_norm",
    "passivity_defect",
    "propagate_exterior",
    "save_trace_csv",
    "load_trace_csv",
    "save_symbol_table",
]

# Support flags for TraceVector; integers denote "supported on aperture j".
FULL_LINE = "full"
UNION = "union"

MIN_SAMPLES_PER_APERTURE = 16
DENSE_ORACLE_MAX = 1024


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TraceGrid:
    """Uniform periodic sampling of the truncated ground line.

    Parameters
    ----------
    L : float
        Period of the truncated line; samples live on [-L/2, L/2).
    N : int
        Number of samples, a power of two.
    apertures : tuple of (float, float)
        Aperture intervals on y = 0, ordered and pairwise disjoint.

    All apertures must fit inside [-L/4, L/4] so the zero-extension tail
    has at least a quarter period of conducting plane on each side, and
    each aperture must contain at least MIN_SAMPLES_PER_APERTURE samples.
    """

    L: float
    N: int
    apertures: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.L <= 0.0:
            raise ValueError(f"period must be positive, got L={self.L}")
        if not _is_power_of_two(self.N):
            raise ValueError(f"sample count must be a power of two, got N={self.N}")
        aps = tuple((float(a), float(b)) for a, b in self.apertures)
        object.__setattr__(self, "apertures", aps)
        quarter = self.L / 4.0 + 1e-12 * self.L
        prev_end = None
        for a, b in aps:
            if not a < b:
                raise ValueError(f"empty aperture interval [{a}, {b}]")
            if a < -quarter or b > quarter:
                raise ValueError(
                    f"aperture [{a}, {b}] leaves the zero-extension margin "
                    f"[-L/4, L/4] = [{-self.L / 4}, {self.L / 4}]"
                )
            if prev_end is not None and a <= prev_end:
                raise ValueError("apertures must be ordered with positive gaps")
            prev_end = b
        for j, m in enumerate(self.masks):
            if int(m.sum()) < MIN_SAMPLES_PER_APERTURE:
                raise ValueError(
                    f"aperture {j} contains {int(m.sum())} samples; "
                    f"at least {MIN_SAMPLES_PER_APERTURE} required (increase N)"
                )

    @cached_property
    def dx(self) -> float:
        return self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L / 2.0 + self.dx * np.arange(self.N)

    @cached_property
    def xi(self) -> np.ndarray:
        """Angular frequencies 2*pi*m/L in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @cached_property
    def masks(self) -> tuple[np.ndarray, ...]:
        out = []
        for a, b in self.apertures:
            out.append((self.x >= a) & (self.x <= b))
        return tuple(out)

    @cached_property
    def union_mask(self) -> np.ndarray:
        m = np.zeros(self.N, dtype=bool)
        for mask in self.masks:
            m |= mask
        return m

    @property
    def n_apertures(self) -> int:
        return len(self.apertures)

    def mask(self, j: int) -> np.ndarray:
        return self.masks[j]

    @classmethod
    def for_apertures(
        cls,
        apertures: Sequence[tuple[float, float]],
        min_samples: int = 32,
        min_size: int = 64,
    ) -> "TraceGrid":
        """Choose L and N automatically for the given apertures.

        L is the smallest value with every aperture inside [-L/4, L/4]
        (at least four times the widest half-extent), N the smallest power
        of two giving `min_samples` samples in the narrowest aperture.
        """
        if not apertures:
            raise ValueError("at least one aperture required")
        reach = max(max(abs(a), abs(b)) for a, b in apertures)
        width = min(b - a for a, b in apertures)
        L = 4.0 * max(reach, width)
        n = min_size
        while n * width / L < min_samples and n < 1 << 20:
            n *= 2
        return cls(L=L, N=n, apertures=tuple(apertures))


@dataclass(frozen=True)
class DtnSymbol:
    """Evaluator for the half-space DtN symbol at exterior light speed c."""

    c: float

    def __post_init__(self) -> None:
        if self.c <= 0.0:
            raise ValueError(f"light speed must be positive, got {self.c}")

    def __call__(self, xi, s: complex):
        return beta(xi, s, self.c)


def beta(xi, s: complex, c: float):
    """Root of xi**2 + s**2/c**2 with strictly negative real part.

    Accepts scalar or array ``xi``.  Raises DomainError if Re s <= 0, or if
    the principal root lands on the imaginary axis (unreachable for
    Re s > 0; an explicit failure beats a silent branch flip).
    """
    s = complex(s)
    if s.real <= 0.0:
        raise DomainError(f"frequency must satisfy Re s > 0, got s={s}")
    if c <= 0.0:
        raise DomainError(f"light speed must be positive, got {c}")
    if np.isscalar(xi):
        root = cmath.sqrt(xi * xi + (s / c) ** 2)
        if root.real <= 0.0:
            raise DomainError(f"principal root degenerated at xi={xi}, s={s}")
        return -root
    xi = np.asarray(xi, dtype=float)
    root = np.sqrt(xi * xi + np.complex128((s / c) ** 2))
    if np.any(root.real <= 0.0):
        raise DomainError(f"principal root degenerated on the grid at s={s}")
    return -root


@dataclass(frozen=True)
class TraceVector:
    """Complex samples on a TraceGrid plus a support flag.

    ``support`` is FULL_LINE, UNION (zero off the aperture union) or an
    integer j (zero off aperture j, exact zeros).
    """

    values: np.ndarray
    support: str | int = FULL_LINE

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", v)

    @classmethod
    def full(cls, values) -> "TraceVector":
        return cls(np.asarray(values, dtype=np.complex128), FULL_LINE)

    @classmethod
    def zero(cls, grid: TraceGrid, support: str | int = FULL_LINE) -> "TraceVector":
        return cls(np.zeros(grid.N, dtype=np.complex128), support)

    def __len__(self) -> int:
        return self.values.shape[0]


def _check_grid(u: TraceVector, grid: TraceGrid) -> None:
    if u.values.shape != (grid.N,):
        raise GridMismatch(
            f"trace vector of length {u.values.shape} does not match grid N={grid.N}"
        )


def apply_B(u: TraceVector, s: complex, grid: TraceGrid, sym: DtnSymbol) -> TraceVector:
    """Apply the DtN boundary operator: multiply mode m by beta(xi_m, s).

    Linear in u; O(N log N).  The dense counterpart `dtn_dense` reproduces
    this exactly (same modes, same normalization).
    """
    _check_grid(u, grid)
    b = beta(grid.xi, s, sym.c)
    out = np.fft.ifft(b * np.fft.fft(u.values))
    return TraceVector(out, FULL_LINE)


def apply_B_columns(cols: np.ndarray, s: complex, grid: TraceGrid, sym: DtnSymbol) -> np.ndarray:
    """apply_B over the columns of an (N, k) array in one vectorized pass."""
    if cols.shape[0] != grid.N:
        raise GridMismatch(f"column length {cols.shape[0]} does not match grid N={grid.N}")
    b = beta(grid.xi, s, sym.c)
    return np.fft.ifft(b[:, None] * np.fft.fft(cols, axis=0), axis=0)


def dtn_dense(grid: TraceGrid, s: complex, sym: DtnSymbol) -> np.ndarray:
    """Dense N x N realization of the boundary operator (independent oracle).

    Entry (p, q) = (1/N) * sum_m beta(xi_m, s) e^{-i xi_m x_p} e^{+i xi_m x_q}.
    O(N^2) memory by construction; capped at N <= 1024.
    """
    if grid.N > DENSE_ORACLE_MAX:
        raise SizeError(f"dense oracle capped at N={DENSE_ORACLE_MAX}, got N={grid.N}")
    b = beta(grid.xi, s, sym.c)
    phase = np.exp(-1j * np.outer(grid.x, grid.xi))
    return (phase * b) @ phase.conj().T / grid.N


def restrict(u: TraceVector, j: int, grid: TraceGrid) -> TraceVector:
    """Copy values on aperture j's samples, exact zeros elsewhere."""
    _check_grid(u, grid)
    if not 0 <= j < grid.n_apertures:
        raise IndexError(f"aperture index {j} out of range [0, {grid.n_apertures})")
    out = np.zeros(grid.N, dtype=np.complex128)
    m = grid.masks[j]
    out[m] = u.values[m]
    return TraceVector(out, j)


def restrict_union(u: TraceVector, grid: TraceGrid) -> TraceVector:
    """Zero-extend u across the ground plane: keep aperture samples only."""
    _check_grid(u, grid)
    out = np.zeros(grid.N, dtype=np.complex128)
    m = grid.union_mask
    out[m] = u.values[m]
    return TraceVector(out, UNION)


def coupled_B_row(
    traces: Sequence[TraceVector],
    j: int,
    s: complex,
    grid: TraceGrid,
    sym: DtnSymbol,
) -> TraceVector:
    """Row j of the coupled aperture boundary condition.

    Sums the zero-extended traces of all cavities, applies the boundary
    operator once, and restricts to aperture j: the self term and every
    cross-cavity term in a single FFT pass.
    """
    if len(traces) != grid.n_apertures:
        raise GridMismatch(
            f"{len(traces)} traces for a grid with {grid.n_apertures} apertures"
        )
    total = np.zeros(grid.N, dtype=np.complex128)
    for t in traces:
        _check_grid(t, grid)
        total += t.values
    return restrict(apply_B(TraceVector(total), s, grid, sym), j, grid)


def multiplier_norm_rows(rows: np.ndarray, order: float, grid: TraceGrid) -> np.ndarray:
    """Row-wise Fourier-multiplier norm; the single definition behind every
    trace-norm evaluation in the package (scalar and batched)."""
    if rows.shape[-1] != grid.N:
        raise GridMismatch(
            f"row length {rows.shape[-1]} does not match grid N={grid.N}"
        )
    coeff = np.fft.fft(rows, axis=-1) / grid.N
    weight = (1.0 + grid.xi**2) ** order
    return np.sqrt(grid.L * np.sum(weight * np.abs(coeff) ** 2, axis=-1))


def trace_norm(u: TraceVector, order: float, grid: TraceGrid) -> float:
    """Fourier-multiplier Sobolev norm with weight (1 + xi^2)**order.

    Normalized so that order = 0 reproduces the discrete L2 norm
    sqrt(dx * sum |u_k|^2); orders +-1/2 are the trace norms paired by the
    boundary-operator continuity estimate.  Homogeneous of degree one.
    """
    _check_grid(u, grid)
    return float(multiplier_norm_rows(u.values[None, :], order, grid)[0])


def passivity_defect(
    traces: Sequence[TraceVector],
    s: complex,
    mu0: float,
    grid: TraceGrid,
    sym: DtnSymbol,
) -> float:
    """Negated real part of the coupled boundary quadratic form.

    D = -Re sum_j sum_i <(s mu0)^{-1} B u_i, u_j>_{Gamma_j} with the
    periodic-trapezoid pairing.  Because the traces vanish off their own
    apertures, the double sum collapses onto the full-line form of the
    summed trace, and the mode-wise sign identity of the symbol makes
    D >= 0 exact up to roundoff.
    """
    s = complex(s)
    if s.real <= 0.0:
        raise DomainError(f"frequency must satisfy Re s > 0, got s={s}")
    total = np.zeros(grid.N, dtype=np.complex128)
    for t in traces:
        _check_grid(t, grid)
        total += t.values
    bw = apply_B(TraceVector(total), s, grid, sym).values
    pairing = grid.dx * np.sum(bw * np.conj(total))
    return float(-np.real(pairing / (s * mu0)))


def propagate_exterior(
    trace: TraceVector, s: complex, y: float, grid: TraceGrid, sym: DtnSymbol
) -> TraceVector:
    """Lift an aperture-line trace to height y in the exterior half-space.

    Multiplies mode m by exp(beta(xi_m, s) * y); since Re beta < 0 every
    mode magnitude is non-increasing in y.
    """
    if y < 0.0:
        raise DomainError(f"exterior height must satisfy y >= 0, got {y}")
    _check_grid(trace, grid)
    b = beta(grid.xi, s, sym.c)
    out = np.fft.ifft(np.exp(b * y) * np.fft.fft(trace.values))
    return TraceVector(out, FULL_LINE)


# ---------------------------------------------------------------------------
# CSV import/export
# ---------------------------------------------------------------------------

def save_trace_csv(path: str | Path, grid: TraceGrid, u: TraceVector) -> None:
    _check_grid(u, grid)
    with open(path, "w", encoding="utf-8") as f:
        f.write("x,re_u,im_u\n")
        for xk, vk in zip(grid.x, u.values):
            f.write(f"{xk:.17g},{vk.real:.17g},{vk.imag:.17g}\n")


def load_trace_csv(path: str | Path, grid: TraceGrid) -> TraceVector:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[0] != grid.N:
        raise GridMismatch(
            f"file holds {data.shape[0]} samples, grid expects {grid.N}"
        )
    return TraceVector(data[:, 1] + 1j * data[:, 2], FULL_LINE)


def save_symbol_table(path: str | Path, grid: TraceGrid, s: complex, sym: DtnSymbol) -> None:
    b = beta(grid.xi, s, sym.c)
    order = np.argsort(grid.xi)
    with open(path, "w", encoding="utf-8") as f:
        f.write("xi,re_beta,im_beta\n")
        for m in order:
            f.write(f"{grid.xi[m]:.17g},{b[m].real:.17g},{b[m].imag:.17g}\n")
