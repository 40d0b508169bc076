import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resonant_lorenz.errors import OrbitDiverged
from resonant_lorenz.henon3d import (
    HenonParams,
    OrbitKind,
    classify_attractor,
    find_resonant_degeneracy,
    henon_fixed_points,
    henon_jacobian,
    henon_step,
    iterate_orbit,
    limit_map_step,
    limit_to_henon_coords,
    lyapunov_spectrum,
)

CHAOTIC = HenonParams(0.0, 0.85, 0.7)
X0 = (0.1, 0.1, 0.1)

reals = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def det3_cofactor(M):
    return (
        M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1])
        - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0])
        + M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0])
    )


def cubic_roots_mp(z, p):
    with mpmath.workdps(40):
        roots = mpmath.polyroots([1, 2 * mpmath.mpf(z), -p.m2, -p.b], maxsteps=200, extraprec=200)
        return np.sort_complex(np.array([complex(r) for r in roots]))


class TestStep:
    def test_origin_fixed(self):
        assert henon_step(CHAOTIC, (0, 0, 0)) == (0, 0, 0)

    def test_constant_term(self):
        assert henon_step(HenonParams(1, 0, 0), (0, 0, 0)) == (0, 0, 1)

    def test_substitution(self):
        out = henon_step(CHAOTIC, (1, 2, 3))
        assert out[:2] == (2, 3)
        assert out[2] == pytest.approx(0.85 * 2 + 0.7 * 1 - 9)
        assert out[2] == pytest.approx(-6.6)

    def test_matches_quadratic_map_kernel(self):
        qm = CHAOTIC.as_map()
        s = (0.3, -0.2, 0.9)
        assert np.allclose(qm.step(s), henon_step(CHAOTIC, s), rtol=0, atol=1e-15)


class TestJacobian:
    def test_third_row_at_z0(self):
        J = henon_jacobian(HenonParams(0.3, -1.2, 0.4), (5, 6, 0))
        assert list(J[2]) == [0.4, -1.2, 0.0]

    def test_third_row_at_z1(self):
        assert list(henon_jacobian(CHAOTIC, (0, 0, 1))[2]) == [0.7, 0.85, -2.0]

    def test_det_random_states(self):
        rng = np.random.default_rng(5)
        for s in rng.uniform(-3, 3, size=(100, 3)):
            assert abs(det3_cofactor(henon_jacobian(CHAOTIC, s)) - 0.7) < 1e-12

    @given(reals, reals, reals, reals, reals, reals)
    def test_det_equals_b(self, m1, m2, b, x, y, z):
        J = henon_jacobian(HenonParams(m1, m2, b), (x, y, z))
        assert abs(det3_cofactor(J) - b) < 1e-12

    @given(reals, reals, reals, reals, reals, reals)
    def test_matches_finite_differences(self, m1, m2, b, x, y, z):
        p = HenonParams(m1, m2, b)
        h = 1e-6
        fd = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            hi = np.array(henon_step(p, np.array([x, y, z]) + e))
            lo = np.array(henon_step(p, np.array([x, y, z]) - e))
            fd[:, j] = (hi - lo) / (2 * h)
        assert np.allclose(fd, henon_jacobian(p, (x, y, z)), atol=1e-6)


class TestFixedPoints:
    def test_zero_params(self):
        fps = henon_fixed_points(HenonParams(0, 0, 0))
        zs = sorted(fp.state.z for fp in fps)
        assert zs == [-1.0, 0.0]
        for fp in fps:
            assert henon_step(HenonParams(0, 0, 0), fp.state) == fp.state

    def test_double_root(self):
        fps = henon_fixed_points(HenonParams(-0.25, 1, 1))
        assert len(fps) == 1
        assert fps[0].state == (0.5, 0.5, 0.5)
        assert fps[0].multiplicity == 2
        # quadratic formula oracle: z = -(1 - m2 - b)/2
        assert fps[0].state.z == -(1 - 1 - 1) / 2

    def test_no_real_roots(self):
        assert henon_fixed_points(HenonParams(-1, 0, 0)) == []

    @settings(max_examples=200)
    @given(
        st.floats(-2, 2, allow_nan=False),
        st.floats(-2, 2, allow_nan=False),
        st.floats(-1.5, 1.5, allow_nan=False),
    )
    def test_fixed_point_invariants(self, m1, m2, b):
        p = HenonParams(m1, m2, b)
        for fp in henon_fixed_points(p):
            z = fp.state.z
            assert np.allclose(henon_step(p, fp.state), fp.state, atol=1e-10, rtol=0)
            mu = fp.multipliers
            cubic = mu**3 + 2 * z * mu**2 - m2 * mu - b
            assert np.max(np.abs(cubic)) < 1e-9 * max(1.0, abs(z) ** 3)
            assert abs(np.prod(mu) - b) < 1e-9 * max(1.0, abs(z) ** 3)
            assert abs(np.sum(mu) + 2 * z) < 1e-9 * max(1.0, abs(z))

    def test_multipliers_against_mp_roots(self):
        p = HenonParams(0.1, 0.85, 0.7)
        for fp in henon_fixed_points(p):
            assert np.allclose(fp.multipliers, cubic_roots_mp(fp.state.z, p), atol=1e-12)


class TestResonantDegeneracy:
    def test_params(self):
        p, s = find_resonant_degeneracy()
        assert (p.m1, p.m2, p.b) == (-0.25, 1.0, 1.0)
        assert s == (0.5, 0.5, 0.5)

    def test_fixed_exactly(self):
        p, s = find_resonant_degeneracy()
        assert henon_step(p, s) == s

    def test_multipliers(self):
        p, s = find_resonant_degeneracy()
        (fp,) = henon_fixed_points(p)
        assert np.max(np.abs(fp.multipliers - np.array([-1, -1, 1]))) < 1e-9

    def test_oracle_agrees(self):
        p, s = find_resonant_degeneracy()
        assert np.allclose(cubic_roots_mp(s.z, p), [-1, -1, 1], atol=1e-9)


class TestConjugacy:
    def test_permutation(self):
        assert limit_to_henon_coords((1, 2, 3)) == (2, 1, 3)

    def test_involution(self):
        X = (0.3, -1.1, 2.5)
        assert limit_to_henon_coords(limit_to_henon_coords(X)) == X

    def test_conjugacy_random(self):
        rng = np.random.default_rng(1)
        for X in rng.uniform(-2, 2, size=(100, 3)):
            lhs = henon_step(CHAOTIC, limit_to_henon_coords(X))
            rhs = limit_to_henon_coords(limit_map_step(CHAOTIC, X))
            assert lhs == rhs

    @given(reals, reals, reals, reals, reals, reals)
    def test_conjugacy_property(self, m1, m2, b, X1, X2, Y):
        p = HenonParams(m1, m2, b)
        X = (X1, X2, Y)
        assert henon_step(p, limit_to_henon_coords(X)) == limit_to_henon_coords(
            limit_map_step(p, X)
        )


class TestOrbit:
    def test_chaotic_orbit_bounded(self):
        orb = iterate_orbit(CHAOTIC, X0, 10_000, 100_000, 1e3)
        assert not orb.diverged
        assert orb.states.shape == (100_000, 3)
        assert np.abs(orb.states).max() < 3

    def test_origin(self):
        orb = iterate_orbit(HenonParams(0, 0, 0), (0, 0, 0), 0, 50)
        assert np.all(orb.states == 0)

    def test_diverges_early(self):
        orb = iterate_orbit(HenonParams(10, 0, 0), (0, 0, 10), 0, 100)
        # hand iteration: z = 10 - 100 = -90, then 10 - 8100 = -8090 > 1e3
        assert orb.diverged_step == 2

    def test_deterministic(self):
        a = iterate_orbit(CHAOTIC, X0, 100, 5000)
        b = iterate_orbit(CHAOTIC, X0, 100, 5000)
        assert a.states.tobytes() == b.states.tobytes()

    def test_matches_python_step(self):
        orb = iterate_orbit(CHAOTIC, X0, 0, 200)
        s = X0
        for rec in orb.states:
            s = henon_step(CHAOTIC, s)
            assert np.allclose(rec, s, rtol=0, atol=1e-12)
            s = tuple(rec)


@pytest.fixture(scope="module")
def chaotic_run():
    return lyapunov_spectrum(CHAOTIC, X0, 10_000, 200_000)


class TestLyapunov:
    def test_positive_leading(self, chaotic_run):
        assert chaotic_run.exponents[0] > 3 * chaotic_run.stderr_max

    def test_sorted(self, chaotic_run):
        assert list(chaotic_run.exponents) == sorted(chaotic_run.exponents, reverse=True)

    def test_sum_identity(self, chaotic_run):
        assert abs(sum(chaotic_run.exponents) - math.log(0.7)) < 10 * chaotic_run.stderr_max

    def test_doubling_n(self, chaotic_run):
        longer = lyapunov_spectrum(CHAOTIC, X0, 10_000, 400_000)
        for a, b, sa, sb in zip(chaotic_run.exponents, longer.exponents, chaotic_run.stderr, longer.stderr):
            assert abs(a - b) <= 3 * math.hypot(sa, sb)

    def test_sink_matches_multipliers(self):
        p = HenonParams(0.0, 0.2, 0.1)
        fps = [fp for fp in henon_fixed_points(p) if np.all(np.abs(fp.multipliers) < 1)]
        assert fps, "expected a sink"
        fp = fps[0]
        res = lyapunov_spectrum(p, fp.state, 0, 100_000)
        expected = sorted(np.log(np.abs(fp.multipliers)), reverse=True)
        assert np.allclose(res.exponents, expected, atol=1e-3)

    def test_volume_preserving(self):
        p = HenonParams(0.0, 0.5, 1.0)
        res = lyapunov_spectrum(p, (0, 0, 0), 0, 100_000)
        assert abs(sum(res.exponents)) < max(10 * res.stderr_max, 1e-12)
        assert res.exponents[0] > 0

    def test_divergence_raises(self):
        with pytest.raises(OrbitDiverged):
            lyapunov_spectrum(HenonParams(10, 0, 0), (0, 0, 10), 0, 1000)


class TestClassify:
    def test_chaotic_parameters(self):
        res = classify_attractor(CHAOTIC, X0)
        assert res.kind is OrbitKind.CHAOTIC

    def test_superstable_origin(self):
        res = classify_attractor(HenonParams(0, 0, 0), (1e-3, 0, 0))
        assert res.kind is OrbitKind.FIXED_POINT_LIKE

    def test_diverged(self):
        res = classify_attractor(HenonParams(10, 0, 0), (0, 0, 10))
        assert res.kind is OrbitKind.DIVERGED
        assert res.step == 2

    def test_threshold_floor(self):
        res = classify_attractor(CHAOTIC, X0)
        assert res.threshold == max(0.005, 3 * res.lyapunov.stderr_max)
