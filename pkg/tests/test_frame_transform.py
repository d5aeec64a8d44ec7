import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrfgauss.core import Ordering, Var, make_state, moment, new_system, p, random_state, reorder, x
from qrfgauss.diagnostics import symplectic_spectrum
from qrfgauss.errors import InvalidFrameChoice, SameFrame, UnknownLabel
from qrfgauss.frame_transform import (
    apply_map,
    frame_map,
    predict_mixed_covariance,
    predict_momentum_moments,
    predict_position_moments,
    switch_frame,
)


def _system(n, masses=None):
    labels = [chr(ord("A") + k) for k in range(n)]
    return new_system(labels, masses if masses is not None else np.linspace(1.0, 2.0, n))


class TestFrameMap:
    def test_two_particles_is_minus_identity(self):
        m = frame_map(_system(2), "A", "B")
        assert m.alpha.tolist() == [[-1]]
        assert m.beta.tolist() == [[-1]]
        assert np.array_equal(m.theta, -np.eye(2))

    def test_swap_layout_transpose_is_reference_matrix(self):
        m = frame_map(_system(3), "A", "B")
        # the displayed matrix acts on row vectors: it is the transpose of the column map
        assert m.alpha_swap.T.tolist() == [[-1, -1], [0, 1]]
        assert np.array_equal(m.beta_swap, m.alpha_swap.T)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_unit_determinant_and_integer(self, n):
        system = _system(n)
        for a, b in itertools.permutations(system.labels, 2):
            m = frame_map(system, a, b)
            assert m.theta.dtype.kind == "i"
            assert round(np.linalg.det(m.theta)) == 1
            assert set(np.unique(m.theta)) <= {-1, 0, 1}

    @pytest.mark.parametrize("n", [3, 5])
    def test_inverse_is_reverse_map(self, n):
        system = _system(n)
        for a, b in itertools.permutations(system.labels, 2):
            m = frame_map(system, a, b)
            assert np.array_equal(m.inverse(system).theta @ m.theta, np.eye(2 * (n - 1), dtype=int))

    @pytest.mark.parametrize("n", [3, 4, 6])
    def test_composition_exact(self, n):
        system = _system(n)
        for a, b, c in itertools.permutations(system.labels, 3):
            ab, bc, ac = frame_map(system, a, b), frame_map(system, b, c), frame_map(system, a, c)
            assert np.array_equal(bc.theta @ ab.theta, ac.theta)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_theta_symplectic(self, n):
        system = _system(n)
        om = np.block(
            [[np.zeros((n - 1, n - 1)), np.eye(n - 1)], [-np.eye(n - 1), np.zeros((n - 1, n - 1))]]
        )
        for a, b in itertools.permutations(system.labels, 2):
            t = frame_map(system, a, b).theta
            assert np.array_equal(t @ om @ t.T, om)

    def test_errors(self):
        system = _system(3)
        with pytest.raises(SameFrame):
            frame_map(system, "A", "A")
        with pytest.raises(UnknownLabel):
            frame_map(system, "A", "Z")


class TestSwitchFrame:
    def test_e1(self, e1):
        s = switch_frame(e1, "B")
        assert s.described == ("A", "C")
        assert np.abs(s.X - [[1, 1], [1, 2]]).max() <= 1e-12
        assert np.abs(s.P - [[2, -1], [-1, 1]]).max() <= 1e-12
        assert np.abs(s.XP).max() <= 1e-12
        assert np.abs(s.mean).max() <= 1e-12
        assert np.linalg.det(s.cov) == pytest.approx(1.0, abs=1e-12)

    def test_two_particles(self):
        system = _system(2)
        s = random_state(system, "A", seed=1)
        t = switch_frame(s, "B")
        assert np.array_equal(t.cov, s.cov)
        assert np.array_equal(t.mean, -s.mean)

    def test_round_trip(self, e1):
        back = switch_frame(switch_frame(e1, "B"), "A")
        assert np.array_equal(back.cov, e1.cov)

    def test_same_frame(self, e1):
        with pytest.raises(SameFrame):
            switch_frame(e1, "A")

    def test_interleaved_matches_blocked(self):
        system = _system(4)
        s = random_state(system, "B", seed=4)
        a = switch_frame(s, "D")
        b = switch_frame(reorder(s, Ordering.INTERLEAVED), "D")
        assert b.ordering is Ordering.INTERLEAVED
        assert np.abs(reorder(b, Ordering.BLOCKED).cov - a.cov).max() <= 1e-12

    def test_apply_map_rejects_wrong_source(self, e1):
        with pytest.raises(InvalidFrameChoice):
            apply_map(e1, frame_map(e1.system, "B", "C"))

    def test_spectrum_preserved_e1(self, e1):
        assert np.allclose(symplectic_spectrum(switch_frame(e1, "B").cov), [1.0, 1.0], atol=1e-12)


@given(seed=st.integers(0, 2**31), n=st.integers(2, 6))
def test_round_trip_random(seed, n):
    system = _system(n)
    s = random_state(system, "A", seed)
    for to in system.labels[1:]:
        back = switch_frame(switch_frame(s, to), "A")
        assert np.abs(back.cov - s.cov).max() <= 1e-12 * max(1.0, np.abs(s.cov).max())
        assert np.abs(back.mean - s.mean).max() <= 1e-12


@given(seed=st.integers(0, 2**31), n=st.integers(3, 6))
def test_reciprocity_and_spectators(seed, n):
    system = _system(n)
    s = random_state(system, system.labels[0], seed)
    views = {f: (s if f == s.frame else switch_frame(s, f)) for f in system.labels}
    for i, j in itertools.permutations(system.labels, 2):
        a, b = moment(views[i], Var(x(j))), moment(views[j], Var(x(i)))
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))
    for i, j in itertools.permutations(system.labels, 2):
        spect = [k for k in system.labels if k not in (i, j)]
        for k, l in itertools.product(spect, repeat=2):
            a = views[i].cov[views[i].slot(k, "p"), views[i].slot(l, "p")]
            b = views[j].cov[views[j].slot(k, "p"), views[j].slot(l, "p")]
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@given(seed=st.integers(0, 2**31), n=st.integers(3, 6))
def test_difference_coordinates_frame_independent(seed, n):
    system = _system(n)
    s = random_state(system, "A", seed)
    for k, l in itertools.combinations(system.labels, 2):
        vals = []
        for f in system.labels:
            if f in (k, l):
                continue
            view = s if f == "A" else switch_frame(s, f)
            vals.append((moment(view, Var(x(k) - x(l))), moment(view, Var(p(k) + p(l)))))
        vals = np.array(vals)
        assert np.ptp(vals, axis=0).max() <= 1e-10 * max(1.0, np.abs(vals).max())


@given(seed=st.integers(0, 2**31), n=st.integers(3, 6))
def test_spectrum_preserved(seed, n):
    system = _system(n)
    s = random_state(system, "A", seed)
    ref = symplectic_spectrum(s.cov)
    for f in system.labels[1:]:
        nu = symplectic_spectrum(switch_frame(s, f).cov)
        assert np.abs(nu - ref).max() <= 1e-9 * ref.max()


class TestPredictPosition:
    def test_e1(self, e1):
        r = predict_position_moments(e1, "B", "C", "A")
        assert r["var_I_of_K"] == pytest.approx(2.0)
        assert r["cov_I_of_KL"] == pytest.approx(1.0)
        assert r["recip_var"] == pytest.approx(1.0)

    def test_pure_half(self, pure_half):
        r = predict_position_moments(pure_half, "B", "C")
        assert r["var_I_of_K"] == pytest.approx(1.0)
        assert r["recip_var"] == pytest.approx(0.5)

    def test_invalid_choices(self, e1):
        with pytest.raises(InvalidFrameChoice):
            predict_position_moments(e1, "A", "B")
        with pytest.raises(InvalidFrameChoice):
            predict_position_moments(e1, "B", "B")

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_switch(self, seed):
        system = _system(5)
        s = random_state(system, "C", seed)
        for i in system.labels:
            if i == "C":
                continue
            view = switch_frame(s, i)
            others = [l for l in system.labels if l != i]
            for k, l in itertools.product(others, repeat=2):
                r = predict_position_moments(s, i, k, l)
                direct = view.cov[view.slot(k, "x"), view.slot(l, "x")]
                assert r["cov_I_of_KL"] == pytest.approx(direct, rel=1e-12, abs=1e-12)
            recip = view.cov[view.slot("C", "x"), view.slot("C", "x")]
            assert r["recip_var"] == pytest.approx(recip, rel=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_chain_through_third_frame(self, seed):
        # cov in frame I computed from frame L must agree with the direct switch
        for n in (4, 5):
            system = _system(n)
            s = random_state(system, "A", seed)
            for i, j, k, l in itertools.permutations(system.labels, 4):
                via = predict_position_moments(switch_frame(s, l) if l != "A" else s, i, j, k)
                view = switch_frame(s, i) if i != "A" else s
                direct = view.cov[view.slot(j, "x"), view.slot(k, "x")]
                assert via["cov_I_of_KL"] == pytest.approx(direct, rel=1e-10, abs=1e-12)


class TestPredictMomentum:
    def test_e1(self, e1):
        var, cov = predict_momentum_moments(e1, [("var", "B", "A"), ("cov", "B", "A", "C")])
        assert var == pytest.approx(2.0)
        assert cov == pytest.approx(-1.0)

    def test_pure_half_correlation(self, pure_half):
        (c,) = predict_momentum_moments(pure_half, [("corr", "C", "A", "B")])
        assert c == pytest.approx(-1 / np.sqrt(2))

    def test_self_reference_rejected(self, e1):
        with pytest.raises(InvalidFrameChoice):
            predict_momentum_moments(e1, [("var", "B", "B")])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_switch(self, seed):
        system = _system(5)
        s = random_state(system, "B", seed)
        for f in system.labels:
            view = s if f == "B" else switch_frame(s, f)
            others = [l for l in system.labels if l != f]
            for a, b in itertools.product(others, repeat=2):
                (v,) = predict_momentum_moments(s, [("cov", f, a, b)])
                direct = view.cov[view.slot(a, "p"), view.slot(b, "p")]
                assert v == pytest.approx(direct, rel=1e-12, abs=1e-12)


class TestPredictMixed:
    def test_e1_zero(self, e1):
        for i, k, l in [("B", "C", "C"), ("C", "A", "B"), ("B", "A", "A")]:
            assert predict_mixed_covariance(e1, i, k, l) == 0.0

    def test_example_value(self, sys3):
        cov = np.eye(4)
        cov[1, 3] = cov[3, 1] = 0.3  # cov(x_C, p_C)
        cov[0, 3] = cov[3, 0] = 0.1  # cov(x_B, p_C)
        s = make_state(sys3, "A", None, cov)
        assert predict_mixed_covariance(s, "B", "C", "C") == pytest.approx(0.2)

    def test_self_rejected(self, e1):
        with pytest.raises(InvalidFrameChoice):
            predict_mixed_covariance(e1, "B", "B", "C")

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_switch(self, seed):
        system = _system(4)
        s = random_state(system, "A", seed)
        for i in system.labels[1:]:
            view = switch_frame(s, i)
            others = [l for l in system.labels if l != i]
            for k, l in itertools.product(others, repeat=2):
                direct = view.cov[view.slot(k, "x"), view.slot(l, "p")]
                assert predict_mixed_covariance(s, i, k, l) == pytest.approx(direct, rel=1e-12, abs=1e-12)
