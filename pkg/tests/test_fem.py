import numpy as np
import pytest
import scipy.sparse as sp

import cavitytd as ct
from cavitytd.errors import DimensionMismatch, DomainError, UnsupportedPolarization
from cavitytd.fem import (
    aperture_quadrature,
    assemble,
    assemble_all,
    build_system,
    build_system_single,
    export_matrix,
)
from cavitytd.trace import DtnSymbol, TraceVector, apply_B_columns


@pytest.fixture(scope="module")
def unit_fem(unit_scene, unit_meshes, unit_grid):
    return assemble(unit_meshes[0], unit_scene.cavities[0], unit_grid)


class TestAssemble:
    def test_mass_partition_of_unity(self, unit_fem):
        # sum_pq M_pq = integral of eps over the cavity = cavity area
        assert unit_fem.mass.sum() == pytest.approx(1.0, rel=1e-12)

    def test_stiffness_annihilates_constants(self, unit_fem):
        ones = np.ones(unit_fem.n_nodes)
        assert np.max(np.abs(unit_fem.stiffness @ ones)) <= 1e-12

    def test_material_weight_is_linear(self, unit_scene, unit_meshes, unit_grid):
        doubled = ct.build_scene(
            {
                "scene": {
                    "eps0": 1.0,
                    "mu0": 1.0,
                    "polarization": "TE",
                    "cavities": [
                        {"aperture": [-0.5, 0.5], "depth": 1.0, "epsilon": 2.0, "mu": 1.0}
                    ],
                }
            }
        )
        base = assemble(unit_meshes[0], unit_scene.cavities[0], unit_grid)
        twice = assemble(unit_meshes[0], doubled.cavities[0], unit_grid)
        assert np.allclose(
            twice.mass.toarray(), 2.0 * base.mass.toarray(), rtol=1e-13, atol=1e-15
        )

    def test_definiteness_after_elimination(self, unit_fem):
        free = unit_fem.free_nodes
        m = unit_fem.mass[free][:, free].toarray()
        k = unit_fem.stiffness[free][:, free].toarray()
        assert np.min(np.linalg.eigvalsh(m)) > 0.0
        assert np.min(np.linalg.eigvalsh(k)) > 0.0

    def test_restriction_structure(self, unit_fem, unit_grid):
        r = unit_fem.restriction
        mask = unit_grid.masks[0]
        rows_nnz = np.diff(r.tocsr().indptr)
        assert np.all(rows_nnz[~mask] == 0)
        assert np.all(rows_nnz[mask] == 2)

    def test_restriction_reproduces_linear_functions(self, unit_fem, unit_grid, unit_meshes):
        nodes = unit_meshes[0].vertices
        vals = 3.0 * nodes[:, 0] + 0.5
        trace = unit_fem.restriction @ vals
        mask = unit_grid.masks[0]
        assert np.allclose(trace[mask], 3.0 * unit_grid.x[mask] + 0.5, rtol=1e-13)


class TestApplyRhs:
    def test_zero_data(self, unit_meshes, unit_grid, unit_fem):
        g = TraceVector.zero(unit_grid)
        loads = ct.apply_rhs(g, unit_meshes, unit_grid, [unit_fem])
        assert np.all(loads[0] == 0.0)

    def test_hat_weights_for_constant_data(self, unit_meshes, unit_grid):
        # Aligned sample/node layout: interior hats integrate to h, the two
        # corner hats to h/2.
        g = TraceVector(np.ones(unit_grid.N, dtype=complex))
        loads = ct.apply_rhs(g, unit_meshes, unit_grid)
        mesh = unit_meshes[0]
        h = 0.125
        ap = mesh.aperture_nodes
        b = loads[0].real
        assert np.allclose(b[ap[1:-1]], h, rtol=1e-12)
        assert b[ap[0]] == pytest.approx(h / 2, rel=1e-12)
        assert b[ap[-1]] == pytest.approx(h / 2, rel=1e-12)
        off = np.setdiff1d(np.arange(mesh.n_vertices), ap)
        assert np.all(b[off] == 0.0)

    def test_linearity(self, unit_meshes, unit_grid, rng):
        g1 = TraceVector(rng.standard_normal(unit_grid.N) + 0j)
        g2 = TraceVector(rng.standard_normal(unit_grid.N) + 0j)
        b1 = ct.apply_rhs(g1, unit_meshes, unit_grid)[0]
        b2 = ct.apply_rhs(g2, unit_meshes, unit_grid)[0]
        b12 = ct.apply_rhs(TraceVector(g1.values + g2.values), unit_meshes, unit_grid)[0]
        assert np.allclose(b12, b1 + b2, rtol=1e-13, atol=1e-15)

    def test_dimension_mismatch(self, unit_meshes, unit_grid):
        with pytest.raises(DimensionMismatch):
            ct.apply_rhs(TraceVector(np.zeros(32)), unit_meshes, unit_grid)


class TestSystemOperator:
    S = 1.2 + 2.3j

    def test_rejects_bad_frequency(self, unit_scene, unit_meshes, unit_grid):
        with pytest.raises(DomainError):
            build_system(unit_scene, unit_meshes, unit_grid, -1.0 + 1.0j)

    def test_rejects_tm(self, unit_meshes, unit_grid):
        tm = ct.build_scene(
            {
                "scene": {
                    "eps0": 1.0,
                    "mu0": 1.0,
                    "polarization": "TM",
                    "cavities": [
                        {"aperture": [-0.5, 0.5], "depth": 1.0, "epsilon": 1.0, "mu": 1.0}
                    ],
                }
            }
        )
        with pytest.raises(UnsupportedPolarization):
            build_system(tm, unit_meshes, unit_grid, self.S)

    def test_quadratic_form_two_paths(self, unit_scene, unit_meshes, unit_grid, rng):
        # Assemble-then-dot against dot-then-assemble from the primitives.
        op = build_system(unit_scene, unit_meshes, unit_grid, self.S)
        fem = op.fems[0]
        free = fem.free_nodes
        sym = DtnSymbol(unit_scene.c)
        for _ in range(5):
            u = rng.standard_normal(op.n_dofs) + 1j * rng.standard_normal(op.n_dofs)
            via_matrix = np.vdot(u, op.matvec(u))
            m = fem.mass[free][:, free]
            k = fem.stiffness[free][:, free]
            ru = (fem.restriction[:, free] @ u).astype(np.complex128)
            bru = apply_B_columns(ru[:, None], self.S, unit_grid, sym)[:, 0]
            boundary = unit_grid.dx * np.sum(bru * np.conj(ru))
            via_parts = (
                self.S * np.vdot(u, m @ u)
                + (1.0 / self.S) * np.vdot(u, k @ u)
                - boundary / (self.S * unit_scene.mu0)
            )
            assert abs(via_matrix - via_parts) <= 1e-12 * abs(via_matrix)

    def test_dense_dtn_consistency(self, unit_scene, unit_meshes, unit_grid, rng):
        # Replace the FFT coupling with the dense oracle; matvecs agree.
        op = build_system(unit_scene, unit_meshes, unit_grid, self.S)
        fem = op.fems[0]
        free = fem.free_nodes
        dense_b = ct.dtn_dense(unit_grid, self.S, DtnSymbol(unit_scene.c))
        r = fem.restriction[:, free].toarray()
        m = fem.mass[free][:, free]
        k = fem.stiffness[free][:, free]
        coupling = r.T @ (unit_grid.dx * (dense_b @ r))
        for _ in range(3):
            u = rng.standard_normal(op.n_dofs) + 1j * rng.standard_normal(op.n_dofs)
            ref = (
                self.S * (m @ u)
                + (1.0 / self.S) * (k @ u)
                - coupling @ u / (self.S * unit_scene.mu0)
            )
            got = op.matvec(u)
            assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)

    def test_symmetric_not_hermitian(self, unit_scene, unit_meshes, unit_grid):
        a = build_system(unit_scene, unit_meshes, unit_grid, self.S).matrix.toarray()
        assert np.allclose(a, a.T, rtol=1e-12, atol=1e-14)
        assert not np.allclose(a, a.conj().T, rtol=1e-6, atol=1e-8)

    def test_cross_blocks_only_through_boundary(self, two_scene, two_meshes, two_grid):
        op = build_system(two_scene, two_meshes, two_grid, self.S)
        fems = op.fems
        volume = sp.block_diag(
            [
                (self.S * f.mass[f.free_nodes][:, f.free_nodes]
                 + (1.0 / self.S) * f.stiffness[f.free_nodes][:, f.free_nodes])
                for f in fems
            ]
        ).toarray()
        dtn_part = op.matrix.toarray() - volume
        # the off-diagonal block is nonzero (coupling exists) ...
        n0 = fems[0].n_free
        assert np.max(np.abs(dtn_part[:n0, n0:])) > 0.0
        # ... and is supported on aperture rows/columns only
        ap_free = []
        offset = 0
        for f in fems:
            lookup = {node: i for i, node in enumerate(f.free_nodes)}
            ap_free.extend(
                offset + lookup[n] for n in f.aperture_nodes if n in lookup
            )
            offset += f.n_free
        outside = np.setdiff1d(np.arange(op.n_dofs), np.array(ap_free))
        assert np.max(np.abs(dtn_part[np.ix_(outside, outside)])) == 0.0

    def test_coercivity(self, unit_scene, unit_meshes, unit_grid, rng):
        # Re a(u, u) >= min(1/mu_max, eps_min) * s1/|s|^2 * (|grad u|^2 + |s u|^2)
        extrema = unit_scene.material_extrema()
        const = min(1.0 / extrema["mu_max"], extrema["eps_min"])
        fems = assemble_all(unit_scene, unit_meshes, unit_grid)
        f = fems[0]
        free = f.free_nodes
        k1 = f.stiffness_unit[free][:, free]
        m1 = f.mass_unit[free][:, free]
        for _ in range(100):
            s = complex(rng.uniform(0.1, 10.0), rng.uniform(-10.0, 10.0))
            op = build_system(unit_scene, unit_meshes, unit_grid, s, fems=fems)
            u = rng.standard_normal(op.n_dofs) + 1j * rng.standard_normal(op.n_dofs)
            lhs = np.vdot(u, op.matvec(u)).real
            grad_sq = np.vdot(u, k1 @ u).real
            su_sq = abs(s) ** 2 * np.vdot(u, m1 @ u).real
            rhs = const * (s.real / abs(s) ** 2) * (grad_sq + su_sq)
            assert lhs >= rhs - 1e-9

    def test_continuity_constant_finite(self, unit_scene, unit_meshes, unit_grid, rng):
        # |a(u, v)| <= C(s) |u|_H1 |v|_H1 with C(s) finite over the sample set.
        fems = assemble_all(unit_scene, unit_meshes, unit_grid)
        f = fems[0]
        free = f.free_nodes
        h1 = (f.stiffness_unit + f.mass_unit)[free][:, free]
        worst = 0.0
        for _ in range(20):
            s = complex(rng.uniform(0.25, 8.0), rng.uniform(-8.0, 8.0))
            op = build_system(unit_scene, unit_meshes, unit_grid, s, fems=fems)
            u = rng.standard_normal(op.n_dofs) + 1j * rng.standard_normal(op.n_dofs)
            v = rng.standard_normal(op.n_dofs) + 1j * rng.standard_normal(op.n_dofs)
            a_uv = abs(np.vdot(v, op.matvec(u)))
            nu = np.sqrt(np.vdot(u, h1 @ u).real)
            nv = np.sqrt(np.vdot(v, h1 @ v).real)
            worst = max(worst, a_uv / (nu * nv))
        assert np.isfinite(worst)
        assert worst < 100.0

    def test_export_matrix(self, unit_scene, unit_meshes, unit_grid, tmp_path):
        op = build_system(unit_scene, unit_meshes, unit_grid, self.S)
        path = tmp_path / "matrix.txt"
        export_matrix(path, op.matrix)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "row,col,re,im"
        assert len(lines) == op.matrix.nnz + 1


class TestSingleCavityDegeneracy:
    def test_bitwise_matrix_match(self, unit_scene, unit_meshes, unit_grid):
        s = 0.9 + 1.7j
        general = build_system(unit_scene, unit_meshes, unit_grid, s)
        single = build_system_single(unit_scene, unit_meshes[0], unit_grid, s)
        a = general.matrix.toarray()
        b = single.matrix.toarray()
        assert np.array_equal(a, b)  # bit for bit

    def test_solutions_match(self, unit_scene, unit_meshes, unit_grid, gaussian_wave):
        s = 1.4 + 0.8j
        data = ct.boundary_data_freq(gaussian_wave, unit_grid, s)
        loads = ct.apply_rhs(data, unit_meshes, unit_grid)
        general = build_system(unit_scene, unit_meshes, unit_grid, s)
        single = build_system_single(unit_scene, unit_meshes[0], unit_grid, s)
        xg = general.solve(general.restrict_loads(loads))
        xs = single.solve(single.restrict_loads(loads))
        assert np.linalg.norm(xg - xs) <= 1e-12 * np.linalg.norm(xs)


class TestApertureQuadrature:
    def test_weights_sum_to_span(self, unit_grid):
        ks, w = aperture_quadrature(unit_grid, 0)
        span = unit_grid.x[ks[-1]] - unit_grid.x[ks[0]]
        assert w.sum() == pytest.approx(span, rel=1e-12)
