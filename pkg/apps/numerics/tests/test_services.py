from unittest import TestCase
from unittest.mock import patch

import numpy as np
from scipy import linalg

from apps.hamiltonians.models import PotentialSpec
from apps.hamiltonians.services import assemble, hamiltonian_shift, two_site_chain
from apps.lattice.models import LatticeBox
from apps.numerics.models import SolverMethod
from apps.numerics.selectors import boundary_mass, spectral_distance
from apps.numerics.services import (
    basis_state,
    dense_eig,
    evolve,
    evolve_steps,
    green_column,
    green_column_spectral,
)
from apps.numerics.tests.factories import RandomHamiltonianFactory, random_state
from apps.shared.exceptions import NumericFailure, ResourceCapExceeded
from config import override_settings


def free_chain(radius: int):
    return assemble(box=LatticeBox.centered(dim=1, radius=radius), spec=PotentialSpec.zero(1))


def free_chain_green(z: complex, distance: np.ndarray) -> np.ndarray:
    roots = np.roots([1.0, -z, 1.0])
    xi = roots[np.argmin(np.abs(roots))]
    return xi ** np.abs(distance) / (xi - 1 / xi)


class EvolveTests(TestCase):
    def test_zero_time_is_identity(self):
        H = RandomHamiltonianFactory()
        state = random_state(H, seed=1)
        np.testing.assert_array_equal(evolve(hamiltonian=H, state=state, t=0.0).amplitudes, state.amplitudes)

    def test_two_site_chain_oscillates(self):
        H = two_site_chain()
        start = basis_state(hamiltonian=H, site=(0,))
        for t in [0.3, 1.0, 2.5, 10.0, 41.7]:
            psi = evolve(hamiltonian=H, state=start, t=t, tol=1e-10)
            self.assertAlmostEqual(abs(psi.amplitudes[0]), abs(np.cos(t)), delta=1e-9)
            self.assertAlmostEqual(abs(psi.amplitudes[1]), abs(np.sin(t)), delta=1e-9)

    def test_matches_matrix_exponential(self):
        H = RandomHamiltonianFactory(dim=2, radius=3)
        state = random_state(H, seed=2)
        exact = linalg.expm(-3.7j * H.matrix.toarray()) @ state.amplitudes
        psi = evolve(hamiltonian=H, state=state, t=3.7, tol=1e-8)
        self.assertLess(np.linalg.norm(psi.amplitudes - exact), 1e-8)

    def test_unitarity(self):
        H = RandomHamiltonianFactory(dim=2, radius=5, width=6.0)
        state = random_state(H, seed=3)
        psi = evolve(hamiltonian=H, state=state, t=7.0, tol=1e-10)
        self.assertAlmostEqual(psi.norm, state.norm, delta=1e-9)

    def test_composition_on_random_instances(self):
        rng = np.random.default_rng(4)
        tol = 1e-7
        for case in range(100):
            H = RandomHamiltonianFactory(radius=int(rng.integers(3, 12)), seed=case)
            state = random_state(H, seed=case)
            t1, t2 = rng.uniform(0, 5, size=2)
            direct = evolve(hamiltonian=H, state=state, t=t1 + t2, tol=tol)
            halfway = evolve(hamiltonian=H, state=state, t=t1, tol=tol)
            composed = evolve(hamiltonian=H, state=halfway, t=t2, tol=tol)
            self.assertLess(np.linalg.norm(direct.amplitudes - composed.amplitudes), 2 * tol)
            self.assertLess(abs(direct.norm - 1.0), 10 * tol)

    def test_steps_agree_with_single_evolution(self):
        H = RandomHamiltonianFactory(radius=15)
        state = random_state(H, seed=5)
        *_, last = evolve_steps(hamiltonian=H, state=state, dt=0.25, steps=40, tol=1e-9)
        direct = evolve(hamiltonian=H, state=state, t=10.0, tol=1e-9)
        self.assertLess(np.linalg.norm(last.amplitudes - direct.amplitudes), 2e-9)

    def test_non_finite_amplitudes_fail(self):
        H = RandomHamiltonianFactory()
        state = random_state(H, seed=6)
        with patch(
            "apps.numerics.services._chebyshev_apply",
            return_value=np.full(H.size, np.nan, dtype=complex),
        ):
            with self.assertRaises(NumericFailure):
                evolve(hamiltonian=H, state=state, t=1.0)


class GreenColumnTests(TestCase):
    def test_free_chain_closed_form(self):
        H = free_chain(1000)
        distance = np.arange(-50, 51)
        for z in [2.5, 0.3 + 0.2j, -1.1 + 0.05j]:
            column = green_column(hamiltonian=H, z=z, source=(0,))
            interior = column.values[1000 - 50 : 1000 + 51]
            np.testing.assert_allclose(interior, free_chain_green(z, distance), atol=1e-10)

    def test_geometric_decay_off_spectrum(self):
        column = green_column(hamiltonian=free_chain(200), z=2.5, source=(0,))
        magnitudes = np.abs(column.values[200:240])
        self.assertTrue(np.all(np.diff(magnitudes) < 0))

    def test_bounded_by_inverse_distance(self):
        H = RandomHamiltonianFactory(dim=2, radius=6)
        eig = dense_eig(hamiltonian=H)
        for z in [0.4 + 0.1j, 8.0, -2.0 + 1.0j]:
            delta = spectral_distance(hamiltonian=H, z=z, eigensystem=eig)
            column = green_column(hamiltonian=H, z=z, source=(1, -2))
            self.assertLessEqual(np.linalg.norm(column.values), 1 / delta + 1e-9)
            if complex(z).imag:
                self.assertLessEqual(np.abs(column.values).max(), 1 / abs(complex(z).imag) + 1e-9)

    def test_residual_contract(self):
        H = RandomHamiltonianFactory(dim=2, radius=5)
        for method in ["direct", "iterative", "dense"]:
            column = green_column(hamiltonian=H, z=0.5 + 0.5j, source=(0, 0), tol=1e-9, method=method)
            self.assertLessEqual(column.residual_norm, 1e-9)

    def test_resolvent_identity(self):
        H = RandomHamiltonianFactory(dim=1, radius=30)
        z1, z2 = 0.2 + 0.3j, -0.5 + 0.1j
        g1 = green_column(hamiltonian=H, z=z1, source=(4,)).values
        g2 = green_column(hamiltonian=H, z=z2, source=(4,)).values
        shifted = H.matrix.toarray() - z2 * np.eye(H.size)
        np.testing.assert_allclose(g1 - g2, (z1 - z2) * np.linalg.solve(shifted, g1), atol=1e-8)

    def test_matches_eigen_decomposition(self):
        rng = np.random.default_rng(9)
        for case in range(100):
            H = RandomHamiltonianFactory(radius=int(rng.integers(2, 12)), seed=100 + case)
            eig = dense_eig(hamiltonian=H)
            z = complex(rng.uniform(-4, 4), rng.uniform(0.05, 1.0))
            source = (int(rng.integers(-H.box.radius, H.box.radius + 1)),)
            column = green_column(hamiltonian=H, z=z, source=source)
            expected = green_column_spectral(eigensystem=eig, z=z, source=source)
            np.testing.assert_allclose(column.values, expected, atol=1e-8)

    def test_gmres_stagnation_falls_back_to_dense(self):
        H = RandomHamiltonianFactory(dim=2, radius=4)
        with patch(
            "apps.numerics.services.sparse_linalg.gmres",
            return_value=(np.zeros(H.size, dtype=complex), 1),
        ):
            column = green_column(hamiltonian=H, z=0.1 + 0.2j, source=(0, 0), method="iterative")
        self.assertIs(column.method, SolverMethod.DENSE)
        self.assertLessEqual(column.residual_norm, 1e-8)

    @override_settings(DENSE_SIZE_CAP=10)
    def test_gmres_stagnation_without_fallback_fails(self):
        H = RandomHamiltonianFactory(dim=2, radius=4)
        with patch(
            "apps.numerics.services.sparse_linalg.gmres",
            return_value=(np.zeros(H.size, dtype=complex), 1),
        ):
            with self.assertRaises(NumericFailure) as ctx:
                green_column(hamiltonian=H, z=0.1 + 0.2j, source=(0, 0), method="iterative")
        self.assertIn("z", ctx.exception.extra)


class DenseEigTests(TestCase):
    def test_free_chain_eigenvalues(self):
        eig = dense_eig(hamiltonian=free_chain(2))
        expected = np.sort(2 * np.cos(np.arange(1, 6) * np.pi / 6))
        np.testing.assert_allclose(eig.eigenvalues, expected, atol=1e-12)

    def test_shift_moves_eigenvalues(self):
        H = RandomHamiltonianFactory(radius=8)
        shifted = hamiltonian_shift(hamiltonian=H, shift=-1.25)
        np.testing.assert_allclose(
            dense_eig(hamiltonian=shifted).eigenvalues,
            dense_eig(hamiltonian=H).eigenvalues - 1.25,
            atol=1e-12,
        )

    def test_trace_and_accuracy(self):
        H = RandomHamiltonianFactory(radius=49, width=5.0)
        eig = dense_eig(hamiltonian=H)
        self.assertEqual(eig.size, 99)
        self.assertAlmostEqual(eig.eigenvalues.sum(), H.diagonal.sum(), delta=1e-8)
        self.assertLessEqual(eig.max_residual, 1e-10 * H.norm_bound)
        self.assertLessEqual(eig.orthogonality_error, 1e-10)

    @override_settings(DENSE_SIZE_CAP=50)
    def test_cap(self):
        with self.assertRaises(ResourceCapExceeded):
            dense_eig(hamiltonian=RandomHamiltonianFactory(radius=30))


class SelectorTests(TestCase):
    def test_window_distance(self):
        H = free_chain(20)
        self.assertAlmostEqual(spectral_distance(hamiltonian=H, z=2.5, method="window"), 0.5)
        self.assertAlmostEqual(spectral_distance(hamiltonian=H, z=0.3 + 0.4j, method="window"), 0.4)

    def test_dense_distance_is_at_least_window_distance(self):
        H = RandomHamiltonianFactory(radius=10)
        for z in [5.0, 0.2 + 0.3j]:
            self.assertGreaterEqual(
                spectral_distance(hamiltonian=H, z=z, method="dense") + 1e-12,
                spectral_distance(hamiltonian=H, z=z, method="window"),
            )

    def test_boundary_mass(self):
        H = free_chain(10)
        self.assertEqual(boundary_mass(hamiltonian=H, state=basis_state(hamiltonian=H, site=(0,))), 0.0)
        self.assertEqual(boundary_mass(hamiltonian=H, state=basis_state(hamiltonian=H, site=(9,))), 1.0)
