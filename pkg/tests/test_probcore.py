import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import adder_mac, random_input, random_mac
from macresolve.probcore import (
    Alphabet,
    Dist,
    JointDist,
    MacChannel,
    bits_to_index,
    channel_from_json,
    channel_to_json,
    conditional_entropy,
    entropy,
    index_to_bits,
    load_channel_file,
    make_rng,
    min_entropy_conditional,
    mutual_information,
    target_output_dist,
    transmit,
    variational_distance,
)


def xor_joint() -> JointDist:
    # (X, Y, Z) with X, Y uniform and Z = X xor Y
    pmf = np.zeros((2, 2, 2))
    for x in range(2):
        for y in range(2):
            pmf[x, y, x ^ y] = 0.25
    return JointDist((Alphabet(2),) * 3, pmf)


class TestDistInvariants:
    def test_pmf_must_normalize(self):
        with pytest.raises(ValueError, match="mass"):
            Dist(Alphabet(2), np.array([0.5, 0.4]))

    def test_renormalize_flag(self):
        d = Dist(Alphabet(2), np.array([1.0, 3.0]), renormalize=True)
        assert d.pmf[1] == pytest.approx(0.75)

    def test_labels_checked(self):
        with pytest.raises(ValueError, match="distinct"):
            Alphabet(2, ("a", "a"))

    def test_joint_shape_checked(self):
        with pytest.raises(ValueError, match="shape"):
            JointDist((Alphabet(2), Alphabet(3)), np.full((2, 2), 0.25))


class TestEntropy:
    def test_uniform_binary(self):
        assert entropy(Dist.bernoulli(0.5)) == pytest.approx(1.0, abs=1e-15)

    def test_point_mass(self):
        assert entropy(Dist.point_mass(4, 2)) == 0.0

    def test_bern_03(self):
        # -0.3 log2 0.3 - 0.7 log2 0.7
        assert entropy(Dist.bernoulli(0.3)) == pytest.approx(
            0.8812908992306927, abs=1e-12)

    def test_range(self, rng):
        for _ in range(20):
            d = Dist(Alphabet(5), rng.random(5), renormalize=True)
            assert -1e-12 <= entropy(d) <= np.log2(5) + 1e-12


class TestConditionalEntropy:
    def test_independent_axes(self, rng):
        a, b = random_input(rng), random_input(rng)
        j = JointDist.product([a, b])
        assert conditional_entropy(j, [0], [1]) == pytest.approx(
            entropy(a), abs=1e-12)

    def test_xor_uniform(self):
        assert conditional_entropy(xor_joint(), [0], [2]) == pytest.approx(
            1.0, abs=1e-12)

    def test_functional_dependence(self):
        pmf = np.zeros((2, 2))
        pmf[0, 0] = 0.3
        pmf[1, 1] = 0.7
        j = JointDist((Alphabet(2), Alphabet(2)), pmf)
        assert conditional_entropy(j, [0], [1]) == pytest.approx(0.0, abs=1e-12)

    def test_overlapping_axes_rejected(self):
        with pytest.raises(ValueError, match="repeated"):
            conditional_entropy(xor_joint(), [0], [0])


class TestMutualInformation:
    def test_independent(self, rng):
        j = JointDist.product([random_input(rng), random_input(rng)])
        assert mutual_information(j, [0], [1]) == pytest.approx(0.0, abs=1e-12)

    def test_adder(self):
        j = adder_mac().joint_with_output([Dist.bernoulli(0.5)] * 2)
        assert mutual_information(j, [0, 1], [2]) == pytest.approx(1.5, abs=1e-12)
        assert mutual_information(j, [0], [2]) == pytest.approx(0.5, abs=1e-12)

    def test_xor(self):
        j = xor_joint()
        assert mutual_information(j, [0], [2]) == pytest.approx(0.0, abs=1e-12)
        assert mutual_information(j, [0, 1], [2]) == pytest.approx(1.0, abs=1e-12)

    def test_chain_identities_random(self, rng):
        for _ in range(30):
            pmf = rng.random((3, 2, 4)) + 1e-6
            j = JointDist((Alphabet(3), Alphabet(2), Alphabet(4)),
                          pmf / pmf.sum())
            h_a = conditional_entropy(j, [0], [])
            h_b = conditional_entropy(j, [1], [])
            h_ab = conditional_entropy(j, [0, 1], [])
            assert h_ab == pytest.approx(
                h_a + conditional_entropy(j, [1], [0]), abs=1e-9)
            mi = mutual_information(j, [0], [1])
            assert mi == pytest.approx(h_a + h_b - h_ab, abs=1e-9)
            assert mi >= 0.0


class TestVariationalDistance:
    def test_equal(self):
        d = Dist.bernoulli(0.3)
        assert variational_distance(d, d) == 0.0

    def test_disjoint_point_masses(self):
        assert variational_distance(
            Dist.point_mass(3, 0), Dist.point_mass(3, 2)) == 2.0

    def test_bernoulli_pair(self):
        assert variational_distance(
            Dist.bernoulli(0.5), Dist.bernoulli(0.3)) == pytest.approx(0.4)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            variational_distance(Dist.bernoulli(0.5), Dist.uniform(3))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4),
           st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4),
           st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
    def test_metric_properties(self, a, b, c):
        da = Dist(Alphabet(4), np.array(a), renormalize=True)
        db = Dist(Alphabet(4), np.array(b), renormalize=True)
        dc = Dist(Alphabet(4), np.array(c), renormalize=True)
        assert variational_distance(da, db) == pytest.approx(
            variational_distance(db, da), abs=1e-12)
        assert variational_distance(da, dc) <= (
            variational_distance(da, db) + variational_distance(db, dc) + 1e-12)


class TestMinEntropy:
    def test_uniform_times_point_mass(self):
        r = 3
        pmf = np.full((1 << r, 1), 1.0 / (1 << r))
        w = JointDist((Alphabet(1 << r), Alphabet(1)), pmf)
        ref = Dist.point_mass(1, 0)
        assert min_entropy_conditional(w, ref) == pytest.approx(r, abs=1e-12)

    def test_product_uniform_t(self):
        qz = Dist(Alphabet(3), np.array([0.2, 0.5, 0.3]))
        w = JointDist.product([Dist.uniform(2), qz])
        assert min_entropy_conditional(w, qz) == pytest.approx(1.0, abs=1e-12)

    def test_product_equals_min_entropy_of_t(self, rng):
        for _ in range(10):
            pt = Dist(Alphabet(4), rng.random(4), renormalize=True)
            qz = Dist(Alphabet(3), rng.random(3) + 0.1, renormalize=True)
            w = JointDist.product([pt, qz])
            assert min_entropy_conditional(w, qz) == pytest.approx(
                -np.log2(pt.pmf.max()), abs=1e-12)

    def test_matches_exhaustive_scan(self, rng):
        # xor-with-noise style table, checked against a direct max-ratio scan
        pmf = rng.random((2, 2)) + 0.05
        pmf /= pmf.sum()
        w = JointDist((Alphabet(2), Alphabet(2)), pmf)
        qz = Dist(Alphabet(2), pmf.sum(axis=0), renormalize=True)
        expect = -np.log2(max(
            pmf[t, z] / qz.pmf[z] for t in range(2) for z in range(2)
            if qz.pmf[z] > 0))
        assert min_entropy_conditional(w, qz) == pytest.approx(expect, abs=1e-12)

    def test_support_violation(self):
        pmf = np.array([[0.5, 0.0], [0.25, 0.25]])
        w = JointDist((Alphabet(2), Alphabet(2)), pmf)
        with pytest.raises(ValueError, match="supp"):
            min_entropy_conditional(w, Dist.point_mass(2, 0))


class TestTargetOutputDist:
    def test_adder_uniform(self):
        out = target_output_dist(adder_mac(), [Dist.bernoulli(0.5)] * 2)
        assert np.allclose(out.pmf, [0.25, 0.5, 0.25], atol=1e-15)

    def test_identity_single_user(self):
        ch = MacChannel((Alphabet(3),), Alphabet(3), np.eye(3))
        d = Dist(Alphabet(3), np.array([0.2, 0.5, 0.3]))
        assert np.allclose(target_output_dist(ch, [d]).pmf, d.pmf)

    def test_point_mass_inputs_select_row(self, rng):
        ch = random_mac(rng)
        out = target_output_dist(ch, [Dist.point_mass(2, 1), Dist.point_mass(2, 0)])
        assert np.allclose(out.pmf, ch.transition[1, 0])

    def test_matches_joint_marginalization(self, rng):
        for _ in range(10):
            ch = random_mac(rng)
            ins = [random_input(rng), random_input(rng)]
            via_joint = ch.joint_with_output(ins).marginal_dist(2)
            direct = target_output_dist(ch, ins)
            assert variational_distance(direct, via_joint) < 1e-12

    def test_arity_mismatch(self, rng):
        with pytest.raises(ValueError, match="input"):
            target_output_dist(random_mac(rng), [Dist.bernoulli(0.5)])


class TestTransmit:
    def test_deterministic_channel_exact_image(self, rng):
        ch = adder_mac()
        x = np.array([0, 1, 1, 0])
        y = np.array([1, 1, 0, 0])
        z = transmit(ch, [x, y], make_rng(0))
        assert np.array_equal(z, x + y)

    def test_empty_sequences(self):
        z = transmit(adder_mac(), [np.zeros(0, int), np.zeros(0, int)], make_rng(0))
        assert z.shape == (0,)

    def test_all_zero_all_one(self):
        n = 32
        z = transmit(adder_mac(), [np.zeros(n, int), np.ones(n, int)], make_rng(1))
        assert np.all(z == 1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            transmit(adder_mac(), [np.zeros(3, int), np.zeros(4, int)], make_rng(0))

    def test_empirical_convergence(self, rng):
        ch = random_mac(rng, z_size=4)
        ins = [random_input(rng), random_input(rng)]
        n = 1_000_000
        words = [d.sample(n, rng) for d in ins]
        z = transmit(ch, words, rng)
        emp = np.bincount(z, minlength=4) / n
        target = target_output_dist(ch, ins).pmf
        assert np.abs(emp - target).sum() <= 0.01


class TestBitPacking:
    def test_roundtrip(self, rng):
        bits = rng.integers(0, 2, size=(50, 9), dtype=np.uint8)
        assert np.array_equal(index_to_bits(bits_to_index(bits), 9), bits)

    def test_first_bit_most_significant(self):
        assert bits_to_index(np.array([1, 0, 0])) == 4


class TestChannelJson:
    def test_roundtrip(self, rng, tmp_path):
        ch = random_mac(rng)
        ins = [random_input(rng), random_input(rng)]
        p = tmp_path / "ch.json"
        p.write_text(json.dumps(channel_to_json(ch, ins)))
        ch2, ins2 = load_channel_file(p)
        assert np.allclose(ch.transition, ch2.transition)
        assert np.allclose(ins[0].pmf, ins2[0].pmf)

    def test_row_order_x1_most_significant(self):
        obj = {"inputs": [2, 2], "output": 2,
               "transition": [[1, 0], [1, 0], [0, 1], [0, 1]]}
        ch, _ = channel_from_json(obj)
        # rows 2 and 3 are (x1=1, x2=0) and (x1=1, x2=1)
        assert ch.transition[1, 0, 1] == 1.0
        assert ch.transition[0, 1, 0] == 1.0

    def test_missing_row_named(self):
        obj = {"inputs": [2, 2], "output": 3,
               "transition": [[1, 0, 0], [0, 1, 0], [0, 1, 0]]}
        with pytest.raises(ValueError, match=r"\(4, 3\)"):
            channel_from_json(obj)

    def test_missing_field_named(self):
        with pytest.raises(ValueError, match="transition"):
            channel_from_json({"inputs": [2], "output": 2})
