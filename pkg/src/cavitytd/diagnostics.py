"""Energy functionals and numerical certification of the stability theory.

Every inequality checked here has an unquantified analytic constant, so
each check measures its ratio on a pinned reference configuration and
asserts non-regression afterwards: the pins below were recorded on the
shipped reference scenes and subsequent runs may not exceed them by more
than PIN_MARGIN.

The passivity suite exercises the sign-definiteness of the boundary
quadratic form three ways: single trace, coupled two-trace, and n-trace
random configurations in the frequency domain, plus the time-domain
quadratic form evaluated through the contour-weighted transform, whose
discrete positivity is exact (the weight lambda^(2n) plays the role of
the vanishing exponential factor in the continuous argument).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .cq import CqScheme, TimeSolution, cq_frequencies, run_time_domain, time_derivative
from .errors import DimensionMismatch
from .fem import FemMatrices, assemble_all
from .incident import BoundaryDataSeries, PlaneWave, WaveProfile, boundary_data_bundle
from .scene import Mesh, Scene
from .trace import (
    DtnSymbol,
    TraceGrid,
    TraceVector,
    apply_B_columns,
    multiplier_norm_rows,
    passivity_defect,
    restrict,
)

__all__ = [
    "EnergyTrace",
    "StabilityRecord",
    "AprioriRecord",
    "PassivityReport",
    "energy",
    "stability_check",
    "apriori_check",
    "passivity_suite",
    "dissipation_violation",
    "shutoff_time",
    "growth_study",
    "save_energy_csv",
]

# ---------------------------------------------------------------------------
# Regression pins, measured on the shipped reference configurations.
# ---------------------------------------------------------------------------
PIN_MARGIN = 1.05
# reference_single.json, 20-point sweep s1 in [0.25, 8]: max measured ratio.
PINNED_FREQ_RATIO_MAX = 2.417
# Worst stability ratio across the three reference time runs
# (single 0.2973, two 0.2426, three 0.2102).
PINNED_STABILITY_RATIO = 0.2974
# Sustained-data growth study on reference_single at the base horizon T=6.
PINNED_APRIORI_LINF = 0.229

_DEFECT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Energy
# ---------------------------------------------------------------------------

@dataclass
class EnergyTrace:
    """Sampled energy e(t_n) with its kinetic/potential split.

    kinetic = |eps^(1/2) du/dt|^2, potential = |mu^(-1/2) grad u|^2, both
    by finite-element quadrature.  When the boundary data series is
    supplied the cumulative data norms feeding the stability right-hand
    sides are attached: running L1-in-time of the -1/2 trace norm of g and
    of its second derivative, and the running max for the first.
    """

    times: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    g_l1: np.ndarray | None = None
    dg_max: np.ndarray | None = None
    d2g_l1: np.ndarray | None = None

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.potential


def energy(
    sol: TimeSolution,
    meshes: list[Mesh],
    scene: Scene,
    fems: list[FemMatrices] | None = None,
    series: BoundaryDataSeries | None = None,
    grid: TraceGrid | None = None,
) -> EnergyTrace:
    """Energy functional of a time solution, step by step."""
    if fems is None:
        fems = assemble_all(scene, meshes)
    if len(fems) != len(sol.fields):
        raise DimensionMismatch(
            f"{len(fems)} cavities vs {len(sol.fields)} solution blocks"
        )
    derivs = time_derivative(sol)
    n1 = sol.times.size
    kin = np.zeros(n1)
    pot = np.zeros(n1)
    for f, u, du in zip(fems, sol.fields, derivs):
        kin += np.einsum("ni,ni->n", du, (f.mass @ du.T).T)
        pot += np.einsum("ni,ni->n", u, (f.stiffness @ u.T).T)
    et = EnergyTrace(times=sol.times.copy(), kinetic=kin, potential=pot)
    if series is not None and grid is not None:
        _attach_data_norms(et, series, grid)
    return et


def _trace_norm_rows(rows: np.ndarray, grid: TraceGrid, order: float) -> np.ndarray:
    """Trace norm of each row, zero-extended across the ground plane."""
    masked = np.where(grid.union_mask[None, :], rows, 0.0).astype(np.complex128)
    return multiplier_norm_rows(masked, order, grid)


def _attach_data_norms(et: EnergyTrace, series: BoundaryDataSeries, grid: TraceGrid) -> None:
    t = series.times
    g_n = _trace_norm_rows(series.g, grid, -0.5)
    dg_n = _trace_norm_rows(series.dg, grid, -0.5)
    d2g_n = _trace_norm_rows(series.d2g, grid, -0.5)
    et.g_l1 = _cumulative_trapezoid(g_n, t)
    et.d2g_l1 = _cumulative_trapezoid(d2g_n, t)
    et.dg_max = np.maximum.accumulate(dg_n)


def _cumulative_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


# ---------------------------------------------------------------------------
# Stability and a-priori ratio checks
# ---------------------------------------------------------------------------

@dataclass
class StabilityRecord:
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    pinned: float


@dataclass
class AprioriRecord:
    linf_ratio: float
    l2_ratio: float
    horizon: float


def stability_check(
    et: EnergyTrace,
    sol: TimeSolution,
    series: BoundaryDataSeries,
    grid: TraceGrid,
    meshes: list[Mesh],
    scene: Scene,
    fems: list[FemMatrices] | None = None,
    pinned: float = PINNED_STABILITY_RATIO,
) -> StabilityRecord:
    """Discrete form of the main stability estimate.

    lhs = max_n (|du/dt|_L2 + |grad du/dt|_L2); rhs combines the L1-in-time
    data norm, the max first-derivative norm and the L1 second-derivative
    norm, all in the zero-extended -1/2 trace norm.  Both sides are
    1-homogeneous in the data, so the ratio is amplitude invariant.
    """
    if fems is None:
        fems = assemble_all(scene, meshes)
    derivs = time_derivative(sol)
    n1 = sol.times.size
    du_l2 = np.zeros(n1)
    du_h1 = np.zeros(n1)
    for f, du in zip(fems, derivs):
        du_l2 += np.einsum("ni,ni->n", du, (f.mass_unit @ du.T).T)
        du_h1 += np.einsum("ni,ni->n", du, (f.stiffness_unit @ du.T).T)
    lhs = float(np.max(np.sqrt(du_l2) + np.sqrt(du_h1)))

    t = series.times
    g_n = _trace_norm_rows(series.g, grid, -0.5)
    dg_n = _trace_norm_rows(series.dg, grid, -0.5)
    d2g_n = _trace_norm_rows(series.d2g, grid, -0.5)
    rhs = float(np.trapezoid(g_n, t) + np.max(dg_n) + np.trapezoid(d2g_n, t))
    ratio = lhs / rhs if rhs > 0.0 else 0.0
    return StabilityRecord(
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        passed=ratio <= pinned * PIN_MARGIN,
        pinned=pinned,
    )


def apriori_check(
    et: EnergyTrace,
    sol: TimeSolution,
    series: BoundaryDataSeries,
    grid: TraceGrid,
    meshes: list[Mesh],
    scene: Scene,
    horizon: float | None = None,
    fems: list[FemMatrices] | None = None,
) -> AprioriRecord:
    """Field-level bounds with explicit horizon weights.

    linf_ratio divides the max-in-time L2 norms by the T-weighted data
    norm; l2_ratio uses the time-integrated norms against T^(3/2), T^(1/2)
    weights.  The growth study reruns this at doubled horizons with a
    sustained data family and expects no growth of linf_ratio.
    """
    if fems is None:
        fems = assemble_all(scene, meshes)
    if horizon is None:
        horizon = float(sol.times[-1])
    n1 = sol.times.size
    u_l2 = np.zeros(n1)
    u_h1 = np.zeros(n1)
    for f, u in zip(fems, sol.fields):
        u_l2 += np.einsum("ni,ni->n", u, (f.mass_unit @ u.T).T)
        u_h1 += np.einsum("ni,ni->n", u, (f.stiffness_unit @ u.T).T)

    t = series.times
    g_l1 = float(np.trapezoid(_trace_norm_rows(series.g, grid, -0.5), t))
    dg_l1 = float(np.trapezoid(_trace_norm_rows(series.dg, grid, -0.5), t))

    linf_lhs = float(np.max(np.sqrt(u_l2)) + np.max(np.sqrt(u_h1)))
    linf_rhs = horizon * g_l1 + dg_l1
    l2_lhs = float(
        np.sqrt(np.trapezoid(u_l2, t)) + np.sqrt(np.trapezoid(u_h1, t))
    )
    l2_rhs = horizon**1.5 * g_l1 + horizon**0.5 * dg_l1
    return AprioriRecord(
        linf_ratio=linf_lhs / linf_rhs if linf_rhs > 0.0 else 0.0,
        l2_ratio=l2_lhs / l2_rhs if l2_rhs > 0.0 else 0.0,
        horizon=horizon,
    )


def shutoff_time(pw: PlaneWave, grid: TraceGrid) -> float:
    """Time after which the aperture data is numerically zero everywhere."""
    xs = grid.x[grid.union_mask]
    return float(pw.profile.tail_time + np.max(-pw.c1 * xs))


def dissipation_violation(et: EnergyTrace, t_star: float) -> float:
    """Worst relative per-step energy increase after the data shutoff.

    Returns max_n (e(t_{n+1}) - e(t_n)) / e(t_n) over steps with
    t_n >= t_star (0 when the energy only decreases); steps with
    negligible energy relative to the trace peak are skipped.
    """
    e = et.total
    peak = float(np.max(e))
    if peak == 0.0:
        return 0.0
    idx = np.nonzero(et.times >= t_star)[0]
    worst = 0.0
    for n in idx[:-1]:
        if e[n] <= 1e-13 * peak:
            continue
        worst = max(worst, (e[n + 1] - e[n]) / e[n])
    return worst


# ---------------------------------------------------------------------------
# Passivity suite
# ---------------------------------------------------------------------------

@dataclass
class PassivityReport:
    trials: int
    seed: int
    min_defects: dict[str, float] = dc_field(default_factory=dict)
    failures: dict[str, int] = dc_field(default_factory=dict)

    @property
    def total_failures(self) -> int:
        return sum(self.failures.values())

    def summary(self) -> str:
        lines = [f"passivity suite: {self.trials} trials, seed {self.seed}"]
        for name in self.min_defects:
            lines.append(
                f"  {name:12s} min defect {self.min_defects[name]: .3e}  "
                f"failures {self.failures[name]}"
            )
        return "\n".join(lines)


def _random_trace(rng: np.random.Generator, grid: TraceGrid, j: int) -> TraceVector:
    vals = rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N)
    return restrict(TraceVector(vals), j, grid)


def _random_s(rng: np.random.Generator) -> complex:
    return complex(10.0 * (1.0 - rng.random()), rng.uniform(-10.0, 10.0))


def passivity_suite(
    grid: TraceGrid,
    sym: DtnSymbol,
    trials: int = 1000,
    seed: int = 0,
    mu0: float = 1.0,
) -> PassivityReport:
    """Randomized sign checks of the boundary quadratic form.

    Frequency-domain configurations run with one trace, two traces and all
    apertures of the grid (whichever exist); the time-domain configuration
    drives random causal trace histories through the contour-weighted
    transform.  Failures (defect < -1e-12 * scale) are report content, not
    exceptions.
    """
    if trials < 1:
        raise ValueError("at least one trial required")
    rng = np.random.default_rng(seed)
    report = PassivityReport(trials=trials, seed=seed)

    configs = [("single", 1)]
    if grid.n_apertures >= 2:
        configs.append(("two-trace", 2))
    if grid.n_apertures > 2:
        configs.append((f"{grid.n_apertures}-trace", grid.n_apertures))

    for name, n_traces in configs:
        worst = math.inf
        fails = 0
        for _ in range(trials):
            s = _random_s(rng)
            traces = [_random_trace(rng, grid, j) for j in range(n_traces)]
            scale = max(
                sum(float(np.linalg.norm(t.values)) ** 2 for t in traces), 1.0
            )
            d = passivity_defect(traces, s, mu0, grid, sym) / scale
            worst = min(worst, d)
            if d < -_DEFECT_TOL:
                fails += 1
        report.min_defects[name] = worst
        report.failures[name] = fails

    worst = math.inf
    fails = 0
    td_trials = max(1, trials // 10)  # each trial is a full space-time history
    for _ in range(td_trials):
        d = _time_domain_defect(rng, grid, sym, mu0)
        worst = min(worst, d)
        if d < -1e-10:
            fails += 1
    report.min_defects["time-domain"] = worst
    report.failures["time-domain"] = fails
    return report


def _time_domain_defect(
    rng: np.random.Generator, grid: TraceGrid, sym: DtnSymbol, mu0: float
) -> float:
    """Contour-weighted discrete form of the time-domain passivity pairing.

    For a causal history u_n the weighted sum
        -Re sum_n lambda^(2n) <T u (t_n), du/dt (t_n)>
    diagonalizes over the contour frequencies into mode-wise nonnegative
    terms; this evaluates it in that diagonal form, normalized by the
    history size.
    """
    steps = 32
    scheme = CqScheme(dt=0.1, steps=steps, contour_tol=1e-10)
    s_nodes = cq_frequencies(scheme)
    n1 = steps + 1

    # Smooth causal random history on the apertures: random spatial traces
    # modulated by a ramped random trig signal, zero at t = 0.
    t = scheme.times()
    envelope = np.sin(np.pi * np.minimum(t / t[-1], 1.0)) ** 2
    hist = np.zeros((n1, grid.N), dtype=np.complex128)
    for j in range(grid.n_apertures):
        base = _random_trace(rng, grid, j).values
        signal = np.zeros(n1)
        for _ in range(3):
            om = rng.uniform(0.5, 4.0)
            signal += rng.standard_normal() * np.sin(om * t + rng.uniform(0, 2 * np.pi))
        hist += (envelope * signal)[:, None] * base[None, :]

    lam = scheme.lam
    u_hat = np.fft.fft(hist * lam ** np.arange(n1)[:, None], axis=0)
    total = 0.0
    scale = 0.0
    for l, s in enumerate(s_nodes):
        bu = apply_B_columns(u_hat[l][:, None], s, grid, sym)[:, 0]
        pair = grid.dx * np.sum(bu * np.conj(s * u_hat[l]))
        total += -pair.real
        scale += abs(s) * grid.dx * float(np.linalg.norm(u_hat[l])) ** 2
    if scale == 0.0:
        return 0.0
    return float(total / scale)


# ---------------------------------------------------------------------------
# Sustained-data growth study
# ---------------------------------------------------------------------------

def growth_study(
    scene: Scene,
    meshes: list[Mesh],
    grid: TraceGrid,
    horizons: tuple[float, ...],
    steps_per_horizon: int = 128,
    theta: float = math.pi / 2,
    amplitude: float = 1.0,
    contour_tol: float = 1e-20,
) -> list[AprioriRecord]:
    """A-priori ratios for a data family sustained over growing horizons.

    The family at horizon H is a wide pulse (width H/14, centered at H/2)
    that keeps the apertures driven through most of the window; the
    field-level ratio must not grow as the horizon doubles.
    """
    records = []
    fems = assemble_all(scene, meshes, grid)
    for horizon in horizons:
        profile = WaveProfile(
            kind="gaussian-pulse",
            center=horizon / 2.0,
            width=horizon / 14.0,
            amplitude=amplitude,
        )
        pw = PlaneWave(
            profile=profile, theta=theta, eps0=scene.eps0, mu0=scene.mu0
        )
        scheme = CqScheme(
            dt=horizon / steps_per_horizon,
            steps=steps_per_horizon,
            contour_tol=contour_tol,
        )
        sol = run_time_domain(scene, meshes, grid, pw, scheme)
        series = boundary_data_bundle(pw, grid, sol.times)
        et = energy(sol, meshes, scene, fems=fems, series=series, grid=grid)
        records.append(
            apriori_check(et, sol, series, grid, meshes, scene, fems=fems)
        )
    return records


def save_energy_csv(path: str | Path, et: EnergyTrace) -> None:
    has_data = et.g_l1 is not None
    with open(path, "w", encoding="utf-8") as f:
        header = "t,total,kinetic,potential"
        if has_data:
            header += ",g_l1,dg_max,d2g_l1"
        f.write(header + "\n")
        for n, t in enumerate(et.times):
            row = (
                f"{t:.17g},{et.total[n]:.17g},{et.kinetic[n]:.17g},"
                f"{et.potential[n]:.17g}"
            )
            if has_data:
                row += f",{et.g_l1[n]:.17g},{et.dg_max[n]:.17g},{et.d2g_l1[n]:.17g}"
            f.write(row + "\n")
