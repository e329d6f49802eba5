import itertools

import numpy as np
import pytest

from meshinpaint.frames import HeightMapSignal
from meshinpaint.sparse import (Dictionary, init_dictionary, ksvd_train,
                                load_dictionary, make_basis, omp, sample_basis,
                                save_dictionary)


def signal_of(uv, z=None):
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    z = np.zeros(len(uv)) if z is None else np.asarray(z, dtype=np.float64)
    return HeightMapSignal(uv, z, np.arange(len(uv)))


def exhaustive_best_support(D, y, k):
    """Oracle: least-squares over every k-subset of atoms."""
    best = None
    for subset in itertools.combinations(range(D.shape[1]), k):
        coef, *_ = np.linalg.lstsq(D[:, subset], y, rcond=None)
        res = np.linalg.norm(y - D[:, subset] @ coef)
        if best is None or res < best[0]:
            best = (res, subset, coef)
    return best


class TestBasis:
    def test_cosine_dc_term(self):
        b = make_basis("cosine", 16, 1.0)
        uv = np.random.default_rng(0).uniform(-0.9, 0.9, (50, 2))
        phi = b.evaluate(uv)
        dc = int(np.where((b.freqs == 0).all(axis=1))[0][0])
        assert np.allclose(phi[:, dc], 1.0)

    def test_gaussian_peaks_at_own_center(self):
        b = make_basis("gaussian", 16, 1.0)
        phi = b.evaluate(b.centers)
        assert (np.argmax(phi, axis=0) == np.arange(16)).all()

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            make_basis("gaussian", 15, 1.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            make_basis("wavelet", 16, 1.0)

    def test_scalar_matches_matrix_evaluation(self):
        # independent evaluation path for the sampled-basis consistency check
        rng = np.random.default_rng(5)
        uv = rng.uniform(-0.7, 0.7, (20, 2))
        for kind in ("gaussian", "cosine"):
            b = make_basis(kind, 16, 1.0)
            phi = b.evaluate(uv)
            for i in (0, 7, 19):
                for j in (0, 5, 15):
                    assert phi[i, j] == pytest.approx(
                        b.evaluate_one(j, uv[i, 0], uv[i, 1]), abs=1e-12)


class TestSampledBasis:
    def test_gaussian_diagonal_dominance(self):
        # sampling exactly at the grid centers makes each function dominate
        # its own row (corner centers sit outside the disk, so evaluate the
        # continuous functions directly)
        b = make_basis("gaussian", 16, 1.0)
        phi = b.evaluate(b.centers)
        for i in range(16):
            assert phi[i, i] == pytest.approx(phi.max(axis=1)[i])

    def test_cosine_dc_column_of_ones(self):
        b = make_basis("cosine", 16, 1.0)
        phi = sample_basis(b, signal_of([[0.1, 0.2], [-0.4, 0.0]])).phi
        assert np.allclose(phi[:, 0], 1.0)

    def test_single_vertex_signal(self):
        b = make_basis("cosine", 16, 1.0)
        assert sample_basis(b, signal_of([[0.0, 0.0]])).phi.shape == (1, 16)

    def test_empty_patch_rejected(self):
        b = make_basis("cosine", 16, 1.0)
        with pytest.raises(ValueError):
            sample_basis(b, signal_of(np.zeros((0, 2))))

    def test_outside_domain_clipped(self):
        b = make_basis("cosine", 16, 1.0)
        with pytest.warns(UserWarning, match="clipping"):
            phi = sample_basis(b, signal_of([[2.0, 0.0]])).phi
        edge = b.evaluate(np.array([[1.0, 0.0]]))
        assert np.allclose(phi, edge)


class TestOMP:
    def test_identity_dictionary(self):
        code = omp(np.array([3.0, 0.0]), np.eye(2), L=1)
        assert np.allclose(code.alpha, [3.0, 0.0])
        assert code.residual_norm == pytest.approx(0.0, abs=1e-12)

    def test_zero_signal_empty_support(self):
        code = omp(np.zeros(4), np.eye(4), L=2)
        assert len(code.support) == 0
        assert np.allclose(code.alpha, 0.0)

    def test_orthonormal_recovery_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
            true = np.zeros(8)
            sup = rng.choice(8, 3, replace=False)
            true[sup] = rng.uniform(1, 2, 3) * rng.choice([-1.0, 1.0], 3)
            y = q @ true
            code = omp(y, q, L=3)
            res, subset, coef = exhaustive_best_support(q, y, 3)
            assert set(code.support.tolist()) == set(subset)
            assert np.abs(code.alpha - true).max() < 1e-8
            assert code.residual_norm <= res + 1e-10

    def test_residual_non_increasing_in_sparsity(self):
        rng = np.random.default_rng(2)
        D = rng.standard_normal((20, 12))
        y = rng.standard_normal(20)
        res = [omp(y, D, L=k).residual_norm for k in range(1, 13)]
        assert all(res[i + 1] <= res[i] + 1e-12 for i in range(len(res) - 1))

    def test_never_selects_same_atom_twice(self):
        rng = np.random.default_rng(4)
        D = rng.standard_normal((15, 10))
        y = rng.standard_normal(15)
        code = omp(y, D, L=10)
        assert len(set(code.support.tolist())) == len(code.support)

    def test_selected_correlations_annihilated(self):
        # the least-squares step leaves the residual orthogonal to every
        # selected atom, so re-selection is impossible
        rng = np.random.default_rng(6)
        D = rng.standard_normal((25, 12))
        y = rng.standard_normal(25)
        code = omp(y, D, L=5)
        residual = y - D @ code.alpha
        corr = np.abs(D[:, code.support].T @ residual)
        assert corr.max() <= 1e-10 * max(1.0, np.linalg.norm(y))

    def test_full_support_equals_least_squares(self):
        rng = np.random.default_rng(9)
        D = rng.standard_normal((12, 6))
        y = rng.standard_normal(12)
        code = omp(y, D, L=6)
        coef, *_ = np.linalg.lstsq(D, y, rcond=None)
        assert code.residual_norm == pytest.approx(
            np.linalg.norm(y - D @ coef), abs=1e-8)

    def test_eps_stops_early(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 6)))
        y = 5.0 * q[:, 2]
        code = omp(y, q, L=6, eps=1e-10)
        assert len(code.support) == 1

    def test_zero_column_skipped(self):
        D = np.eye(3)
        D[:, 1] = 0.0
        code = omp(np.array([1.0, 1.0, 0.0]), D, L=3)
        assert 1 not in code.support

    def test_all_zero_dictionary_rejected(self):
        with pytest.raises(ValueError, match="nonzero"):
            omp(np.ones(3), np.zeros((3, 4)), L=1)

    def test_bad_sparsity_rejected(self):
        with pytest.raises(ValueError):
            omp(np.ones(3), np.eye(3), L=0)


def make_training_set(rng, basis, A_true, n_signals, L):
    signals = []
    n_atoms = A_true.shape[1]
    for _ in range(n_signals):
        k = int(rng.integers(20, 40))
        rad = np.sqrt(rng.random(k)) * basis.domain_radius
        th = rng.uniform(0, 2 * np.pi, k)
        sig = signal_of(np.stack([rad * np.cos(th), rad * np.sin(th)], axis=1))
        sampled = sample_basis(basis, sig)
        alpha = np.zeros(n_atoms)
        sup = rng.choice(n_atoms, L, replace=False)
        alpha[sup] = rng.uniform(1, 2, L) * rng.choice([-1.0, 1.0], L)
        sig.z = sampled.phi @ (A_true @ alpha)
        signals.append((sig, sampled))
    return signals


class TestKSVD:
    def test_rank_one_data_recovers_direction(self):
        rng = np.random.default_rng(1)
        basis = make_basis("cosine", 16, 1.0)
        a = rng.standard_normal(16)
        a /= np.linalg.norm(a)
        signals = make_training_set(rng, basis, a[:, None], 60, 1)
        d = ksvd_train(signals, basis, n_atoms=4, L=1, iterations=10, seed=0)
        sims = np.abs(a @ d.coefficients)
        assert sims.max() >= 0.999

    def test_mean_residual_non_increasing(self):
        rng = np.random.default_rng(8)
        basis = make_basis("cosine", 16, 1.0)
        A_true = rng.standard_normal((16, 12))
        A_true /= np.linalg.norm(A_true, axis=0)
        signals = make_training_set(rng, basis, A_true, 120, 2)
        d = ksvd_train(signals, basis, n_atoms=12, L=2, iterations=12, seed=0)
        res = d.training_residuals
        assert len(res) == 12
        assert all(res[i + 1] <= res[i] + 1e-9 for i in range(len(res) - 1))

    def test_atoms_unit_norm(self):
        rng = np.random.default_rng(3)
        basis = make_basis("gaussian", 16, 1.0)
        A_true = rng.standard_normal((16, 8))
        signals = make_training_set(rng, basis, A_true, 60, 2)
        d = ksvd_train(signals, basis, n_atoms=8, L=2, iterations=5, seed=0)
        assert np.allclose(np.linalg.norm(d.coefficients, axis=0), 1.0, atol=1e-12)

    def test_all_zero_signals_rejected(self):
        basis = make_basis("cosine", 16, 1.0)
        uv = np.random.default_rng(0).uniform(-0.5, 0.5, (10, 2))
        signals = [(signal_of(uv), sample_basis(basis, signal_of(uv))) for _ in range(5)]
        with pytest.raises(ValueError, match="zero"):
            ksvd_train(signals, basis, n_atoms=2, L=1, iterations=1)

    def test_iterations_validated(self):
        basis = make_basis("cosine", 16, 1.0)
        with pytest.raises(ValueError):
            ksvd_train([], basis, 2, iterations=1)


class TestInitDictionary:
    def _signals(self, rng, count):
        basis = make_basis("cosine", 16, 1.0)
        A_true = rng.standard_normal((16, 6))
        return basis, make_training_set(rng, basis, A_true, count, 2)

    def test_deterministic_for_seed(self):
        basis, signals = self._signals(np.random.default_rng(0), 20)
        a = init_dictionary(signals, basis, 5, seed=11)
        b = init_dictionary(signals, basis, 5, seed=11)
        assert np.array_equal(a.coefficients, b.coefficients)

    def test_unit_columns(self):
        basis, signals = self._signals(np.random.default_rng(1), 20)
        d = init_dictionary(signals, basis, 6, seed=0)
        assert np.allclose(np.linalg.norm(d.coefficients, axis=0), 1.0)

    def test_too_few_signals(self):
        basis, signals = self._signals(np.random.default_rng(2), 4)
        with pytest.raises(ValueError, match="4"):
            init_dictionary(signals, basis, 5)

    def test_flat_patch_rejected(self):
        basis = make_basis("cosine", 16, 1.0)
        uv = np.random.default_rng(0).uniform(-0.5, 0.5, (12, 2))
        flat = [(signal_of(uv), sample_basis(basis, signal_of(uv)))]
        with pytest.raises(ValueError, match="degenerate"):
            init_dictionary(flat, basis, 1)


class TestDictionaryFile:
    def _dictionary(self, kind="gaussian"):
        rng = np.random.default_rng(0)
        basis = make_basis(kind, 16, 0.75)
        A = rng.standard_normal((16, 32))
        A /= np.linalg.norm(A, axis=0)
        return Dictionary(basis, A)

    @pytest.mark.parametrize("kind", ["gaussian", "cosine"])
    def test_round_trip_bitwise(self, tmp_path, kind):
        d = self._dictionary(kind)
        path = tmp_path / "d.mdld"
        save_dictionary(d, path)
        back = load_dictionary(path)
        assert np.array_equal(back.coefficients, d.coefficients)
        assert back.basis.kind == kind
        assert back.basis.domain_radius == d.basis.domain_radius
        if kind == "gaussian":
            assert np.array_equal(back.basis.centers, d.basis.centers)
            assert back.basis.width == d.basis.width
        else:
            assert np.array_equal(back.basis.freqs, d.basis.freqs)

    def test_truncated_rejected(self, tmp_path):
        d = self._dictionary()
        path = tmp_path / "d.mdld"
        save_dictionary(d, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:len(raw) // 2])
        with pytest.raises(ValueError, match="truncated"):
            load_dictionary(path)

    def test_wrong_magic_rejected(self, tmp_path):
        d = self._dictionary()
        path = tmp_path / "d.mdld"
        save_dictionary(d, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="magic"):
            load_dictionary(path)

    def test_version_mismatch_rejected(self, tmp_path):
        d = self._dictionary()
        path = tmp_path / "d.mdld"
        save_dictionary(d, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="version"):
            load_dictionary(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        d = self._dictionary()
        path = tmp_path / "d.mdld"
        save_dictionary(d, path)
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(ValueError, match="trailing"):
            load_dictionary(path)


class TestSampledBasisConsistency:
    def test_matrix_and_pointwise_paths_agree(self):
        # Phi @ (A @ alpha) must equal the continuous combination evaluated
        # sample by sample through the scalar path
        rng = np.random.default_rng(21)
        basis = make_basis("cosine", 16, 1.0)
        A = rng.standard_normal((16, 8))
        alpha = np.zeros(8)
        alpha[[1, 5]] = [1.5, -0.5]
        uv = rng.uniform(-0.6, 0.6, (30, 2))
        sig = signal_of(uv)
        phi = sample_basis(basis, sig).phi
        fast = phi @ (A @ alpha)
        coeffs = A @ alpha
        slow = np.array([
            sum(coeffs[j] * basis.evaluate_one(j, u, v) for j in range(16))
            for u, v in uv
        ])
        assert np.abs(fast - slow).max() < 1e-10
