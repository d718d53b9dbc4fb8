import numpy as np
import pytest

import cavitytd as ct
from cavitytd.errors import DomainError
from cavitytd.freq import FrequencySolver, estimate_report, save_solution_csv, sweep_estimate
from cavitytd.trace import TraceVector


@pytest.fixture(scope="module")
def unit_solver(unit_scene, unit_meshes, unit_grid):
    return FrequencySolver(unit_scene, unit_meshes, unit_grid)


class TestSolveFrequency:
    def test_zero_data_zero_solution(self, unit_solver, unit_grid):
        sol = unit_solver.solve(1.0 + 1.0j, TraceVector.zero(unit_grid))
        assert sol.norm() == 0.0
        assert sol.residual == 0.0

    def test_rejects_bad_frequency(self, unit_solver, unit_grid):
        with pytest.raises(DomainError):
            unit_solver.solve(-1.0 + 0.0j, TraceVector.zero(unit_grid))

    def test_residual_small(self, unit_solver, unit_grid, gaussian_wave):
        s = 1.3 + 0.9j
        data = ct.boundary_data_freq(gaussian_wave, unit_grid, s)
        sol = unit_solver.solve(s, data)
        assert sol.residual <= 1e-10
        assert sol.norm() > 0.0

    def test_linearity_in_data(self, unit_solver, unit_grid, gaussian_wave):
        s = 2.0 + 0.4j
        data = ct.boundary_data_freq(gaussian_wave, unit_grid, s)
        sol1 = unit_solver.solve(s, data)
        sol2 = unit_solver.solve(s, TraceVector(2.0 * data.values))
        for f1, f2 in zip(sol1.fields, sol2.fields):
            assert np.allclose(f2, 2.0 * f1, rtol=1e-12, atol=1e-15)

    def test_mirror_symmetry(self, unit_scene, unit_meshes, unit_grid, gaussian_wave):
        # Symmetric scene + even data (normal incidence): the solution is
        # even about x = 0; compare against the x-reflected nodal field.
        s = 1.0 + 1.5j
        data = ct.boundary_data_freq(gaussian_wave, unit_grid, s)
        sol = ct.solve_frequency(unit_scene, unit_meshes, unit_grid, s, data)
        mesh = unit_meshes[0]
        field = sol.fields[0]
        order = np.lexsort((mesh.vertices[:, 1], np.round(mesh.vertices[:, 0], 12)))
        mirror = np.lexsort((mesh.vertices[:, 1], np.round(-mesh.vertices[:, 0], 12)))
        diff = np.max(np.abs(field[order] - field[mirror]))
        assert diff <= 1e-10 * max(1.0, np.max(np.abs(field)))

    def test_factorization_cache_reused(self, unit_scene, unit_meshes, unit_grid, gaussian_wave):
        solver = FrequencySolver(unit_scene, unit_meshes, unit_grid)
        s = 1.1 + 2.2j
        op1 = solver.operator(s)
        op2 = solver.operator(s)
        assert op1 is op2

    def test_ordering_invariance(self, unit_scene, unit_meshes, unit_grid, gaussian_wave):
        s = 1.7 + 1.1j
        data = ct.boundary_data_freq(gaussian_wave, unit_grid, s)
        sols = [
            FrequencySolver(unit_scene, unit_meshes, unit_grid, ordering=o).solve(s, data)
            for o in ("COLAMD", "NATURAL")
        ]
        scale = np.max(np.abs(sols[0].fields[0]))
        assert np.max(np.abs(sols[0].fields[0] - sols[1].fields[0])) <= 1e-10 * scale


class TestEstimateReport:
    def test_zero_data_reports_zero_ratio(self, unit_solver, unit_grid):
        sol = unit_solver.solve(1.0 + 0.0j, TraceVector.zero(unit_grid))
        rec = estimate_report(sol, TraceVector.zero(unit_grid), unit_grid, unit_solver.fems)
        assert rec["ratio"] == 0.0
        assert rec["lhs"] == 0.0

    def test_ratio_invariant_under_scaling(self, unit_solver, unit_grid, gaussian_wave):
        s = 1.2 + 0.6j
        data = ct.boundary_data_freq(gaussian_wave, unit_grid, s)
        r1 = estimate_report(unit_solver.solve(s, data), data, unit_grid, unit_solver.fems)
        doubled = TraceVector(2.0 * data.values)
        r2 = estimate_report(unit_solver.solve(s, doubled), doubled, unit_grid, unit_solver.fems)
        assert r2["ratio"] == pytest.approx(r1["ratio"], rel=1e-12)

    def test_sweep_band(self, unit_solver, unit_grid, gaussian_wave):
        s_values = [complex(v, 0.0) for v in np.geomspace(0.25, 8.0, 20)]
        records = sweep_estimate(
            unit_solver,
            s_values,
            lambda s: ct.boundary_data_freq(gaussian_wave, unit_grid, s),
        )
        ratios = [r["ratio"] for r in records]
        assert all(r > 0 for r in ratios)
        assert max(ratios) / min(ratios) <= 50.0

    def test_solution_csv(self, unit_solver, unit_meshes, unit_grid, gaussian_wave, tmp_path):
        s = 1.0 + 0.5j
        data = ct.boundary_data_freq(gaussian_wave, unit_grid, s)
        sol = unit_solver.solve(s, data)
        path = tmp_path / "sol.csv"
        save_solution_csv(path, unit_meshes[0], sol.fields[0])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x,y,re_u,im_u"
        assert len(lines) == unit_meshes[0].n_vertices + 1


class TestMultiCavity:
    def test_coupled_vs_independent_decay(self, gaussian_wave):
        # Cross-cavity influence shrinks monotonically as the separation
        # doubles (2w, 4w, 8w for aperture width w).
        s = 1.0 + 1.0j
        diffs = []
        for sep in (2.0, 4.0, 8.0):
            w = 1.0
            cav1 = {"aperture": [-sep / 2 - w, -sep / 2], "depth": 1.0,
                    "epsilon": 1.0, "mu": 1.0}
            cav2 = {"aperture": [sep / 2, sep / 2 + w], "depth": 0.8,
                    "epsilon": 1.0, "mu": 1.0}
            coupled = ct.build_scene(
                {"scene": {"eps0": 1.0, "mu0": 1.0, "polarization": "TE",
                           "cavities": [cav1, cav2]}}
            )
            meshes = ct.mesh_scene(coupled, 0.125)
            L = 4.0 * (sep / 2 + w)
            n = 64
            while n * w / L < 16:
                n *= 2
            grid = ct.TraceGrid(L=L, N=n, apertures=coupled.apertures)
            data = ct.boundary_data_freq(gaussian_wave, grid, s)
            sol_c = FrequencySolver(coupled, meshes, grid).solve(s, data)
            worst = 0.0
            for j, cav in enumerate((cav1, cav2)):
                single = ct.build_scene(
                    {"scene": {"eps0": 1.0, "mu0": 1.0, "polarization": "TE",
                               "cavities": [cav]}}
                )
                grid_j = ct.TraceGrid(L=L, N=n, apertures=single.apertures)
                data_j = ct.boundary_data_freq(gaussian_wave, grid_j, s)
                sol_j = FrequencySolver(single, [meshes[j]], grid_j).solve(s, data_j)
                worst = max(
                    worst,
                    np.linalg.norm(sol_c.fields[j] - sol_j.fields[0])
                    / np.linalg.norm(sol_j.fields[0]),
                )
            diffs.append(worst)
        assert diffs[0] > diffs[1] > diffs[2]
