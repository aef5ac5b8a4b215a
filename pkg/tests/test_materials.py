import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hddcm.materials import (
    ASYMMETRIC,
    SYMMETRIC,
    DataSetSpec,
    MaterialConfigurationError,
    MaterialLaw,
    SystemMaterial,
    compose_system_g,
    g_eval,
    g_jacobians,
    voigt_pack,
    voigt_unpack,
)
from hddcm.numerics import InvalidInputError, fd_jacobian, rank_estimate

A = np.array([75.0, 75.0, 100.0, 100.0, 100.0, 200.0])
unit = st.floats(-1.0, 1.0)


class TestVoigt:
    def test_plane_ordering(self):
        np.testing.assert_array_equal(voigt_pack([[1, 3], [3, 2]]), [1, 2, 3])

    def test_identity_3d(self):
        np.testing.assert_array_equal(voigt_pack(np.eye(3)), [1, 1, 1, 0, 0, 0])

    def test_3d_ordering(self):
        E = np.array([[1, 6, 5], [6, 2, 4], [5, 4, 3]], dtype=float)
        np.testing.assert_array_equal(voigt_pack(E), [1, 2, 3, 4, 5, 6])

    def test_scalar(self):
        np.testing.assert_array_equal(voigt_pack([[4.0]]), [4.0])

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInputError):
            voigt_pack([[1, 2], [0, 1]])

    def test_bad_length_rejected(self):
        with pytest.raises(InvalidInputError):
            voigt_unpack(np.ones(4))

    @given(st.sampled_from([1, 2, 3]), st.data())
    def test_round_trip(self, d, data):
        M = data.draw(arrays(np.float64, (d, d), elements=st.floats(-1e3, 1e3)))
        E = M + M.T
        np.testing.assert_array_equal(voigt_unpack(voigt_pack(E)), E)

    @given(arrays(np.float64, 6, elements=st.floats(-1e3, 1e3)))
    def test_unpack_pack(self, v):
        np.testing.assert_array_equal(voigt_pack(voigt_unpack(v)), v)


class TestLaws:
    def test_stiffness_values(self):
        np.testing.assert_array_equal(SYMMETRIC.A, A)
        np.testing.assert_array_equal(ASYMMETRIC.A, A)

    def test_symmetric_origin(self):
        np.testing.assert_array_equal(g_eval(SYMMETRIC, np.zeros(6), np.zeros(6)), 0.0)

    def test_symmetric_unit_strain(self):
        e = np.array([1.0, 0, 0, 0, 0, 0])
        s = np.array([100.0, 0, 0, 0, 0, 0])
        np.testing.assert_allclose(g_eval(SYMMETRIC, e, s), 0.0, atol=1e-13)

    def test_asymmetric_strain_from_stress(self):
        s = np.array([100.0, 0, 0, 0, 0, 0])
        e = ASYMMETRIC.strain_from_stress(s)
        assert e[0] == pytest.approx(7 / 3, abs=1e-13)
        np.testing.assert_allclose(g_eval(ASYMMETRIC, e, s), 0.0, atol=1e-13)

    def test_asymmetric_is_not_odd(self):
        s = np.full(6, 50.0)
        assert not np.allclose(ASYMMETRIC.strain_from_stress(s), -ASYMMETRIC.strain_from_stress(-s))

    def test_jacobians_at_origin(self):
        G1, G2 = g_jacobians(SYMMETRIC, np.zeros(6), np.zeros(6))
        np.testing.assert_array_equal(G1, -np.diag(A))
        np.testing.assert_array_equal(G2, np.eye(6))
        G1, G2 = g_jacobians(ASYMMETRIC, np.zeros(6), np.zeros(6))
        np.testing.assert_array_equal(G1, np.eye(6))
        np.testing.assert_allclose(G2, -np.diag(1 / A))

    @pytest.mark.parametrize("law", [SYMMETRIC, ASYMMETRIC, MaterialLaw("linear")], ids=lambda l: l.kind)
    @pytest.mark.parametrize("seed", range(20))
    def test_jacobians_match_fd(self, law, seed):
        rng = np.random.default_rng(seed)
        e, s = rng.uniform(-0.5, 0.5, 6), rng.uniform(-50, 50, 6)
        G1, G2 = g_jacobians(law, e, s)
        F1 = fd_jacobian(lambda y: law.residual(y, s), e)
        F2 = fd_jacobian(lambda y: law.residual(e, y), s)
        assert np.abs(G1 - F1).max() <= 1e-6 * (1 + np.abs(G1).max())
        assert np.abs(G2 - F2).max() <= 1e-6 * (1 + np.abs(G2).max())

    @given(arrays(np.float64, 6, elements=unit))
    def test_symmetric_stress_lies_on_manifold(self, e):
        s = SYMMETRIC.stress_from_strain(e)
        assert np.abs(g_eval(SYMMETRIC, e, s)).max() <= 1e-12

    def test_stress_from_strain_not_defined_for_asymmetric(self):
        with pytest.raises(MaterialConfigurationError):
            ASYMMETRIC.stress_from_strain(np.zeros(6))

    def test_unknown_kind(self):
        with pytest.raises(MaterialConfigurationError):
            MaterialLaw("plastic")

    def test_nonpositive_stiffness(self):
        with pytest.raises(MaterialConfigurationError):
            MaterialLaw("linear", (1.0, 0.0))


class TestSystem:
    def test_uniform_zero_residual(self):
        mat = SystemMaterial.uniform(SYMMETRIC, 20)
        r = mat.residual(np.zeros(120), np.zeros(120))
        assert r.shape == (120,)
        np.testing.assert_array_equal(r, 0.0)

    def test_two_material_composition(self, rng):
        laws = {"sym": SYMMETRIC, "asym": ASYMMETRIC}
        e, s = rng.standard_normal(12), 10 * rng.standard_normal(12)
        r = compose_system_g(["sym", "asym"], laws, e, s)
        np.testing.assert_array_equal(r[:6], SYMMETRIC.residual(e[:6], s[:6]))
        np.testing.assert_array_equal(r[6:], ASYMMETRIC.residual(e[6:], s[6:]))

    def test_missing_assignment(self):
        with pytest.raises(MaterialConfigurationError):
            SystemMaterial(["sym", "other"], {"sym": SYMMETRIC})

    def test_wrong_length(self):
        with pytest.raises(InvalidInputError):
            SystemMaterial.uniform(SYMMETRIC, 2).residual(np.zeros(6), np.zeros(6))

    @given(st.integers(0, 2**32 - 1), st.lists(st.sampled_from(["sym", "asym"]), min_size=1, max_size=6))
    def test_full_rank(self, seed, assignment):
        rng = np.random.default_rng(seed)
        mat = SystemMaterial(assignment, {"sym": SYMMETRIC, "asym": ASYMMETRIC})
        e, s = rng.uniform(-1, 1, mat.n_e), rng.uniform(-60, 60, mat.n_e)
        g1, g2 = mat.jacobian_diagonals(e, s)
        J = np.hstack([np.diag(g1), np.diag(g2)])
        assert rank_estimate(J).estimated_rank == mat.n_e

    def test_stiffness_diagonal(self):
        np.testing.assert_array_equal(SystemMaterial.uniform(SYMMETRIC, 3).stiffness_diagonal(), np.tile(A, 3))


class TestDataSet:
    def test_json_round_trip(self, tmp_path):
        spec = DataSetSpec({"sym": [(np.zeros(6), np.ones(6)), (np.ones(6), np.zeros(6))], "bar": [([1.0], [2.0])]})
        path = tmp_path / "data.json"
        path.write_text(spec.to_json())
        back = DataSetSpec.load(path)
        assert set(back.points) == {"sym", "bar"}
        np.testing.assert_array_equal(back.points["sym"][0][1], np.ones(6))
        assert back.product_size(["sym", "sym", "bar"]) == 4

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            DataSetSpec.from_json('[{"material_id": "x", "points": [[[1, 2, 3], [1, 2]]]}]')
