import json
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import adder_mac, adder_mac3, parallel_mac
from macresolve.encoder import (
    IdealizedOverrides,
    achieved_rates,
    build_mac_code,
    classify_two_user,
    code_from_descriptor,
    code_to_descriptor,
    delta_concentration,
    descriptor_hash,
    encode_tx1,
    make_plan,
    make_plan_multi,
    run_trials,
    tally_fresh_bits,
    transcript_to_csv,
)
from macresolve.probcore import Dist, MacChannel, Alphabet, make_rng, \
    mutual_information
from macresolve.ratesplit import split_rates

UNIF = Dist.bernoulli(0.5)
IDEAL = IdealizedOverrides()


def adder_code(n=8, k=3, seed=11, eps_split=0.5):
    return build_mac_code(adder_mac(), [UNIF, UNIF], block_len=n, k=k, xi=0.05,
                          idealized=IDEAL, eps_split=eps_split,
                          rng=make_rng(seed))


class TestPlan:
    def test_concentration_constant_n1024(self):
        # log2(|Y|^2 |X| + 3) sqrt((2/1024)(3 + 10)) with binary inputs
        d = delta_concentration(adder_mac(), 1024)
        expect = math.log2(11) * math.sqrt((2 / 1024) * 13)
        assert d == pytest.approx(expect, abs=1e-15)
        assert d == pytest.approx(0.5512409165428579, abs=1e-12)
        plan = make_plan(adder_mac(), UNIF,
                         split_rates(adder_mac(), UNIF, 0.5, 0.5),
                         1024, 10, 0.05)
        assert plan.eps == pytest.approx(2 * (d + 0.05), abs=1e-15)

    def test_desk_scale_plan_clamps(self):
        plan = make_plan(adder_mac(), UNIF,
                         split_rates(adder_mac(), UNIF, 0.5, 0.5), 16, 4, 0.05)
        assert plan.asymptotic_only
        assert all(s.hash_len == 0 for s in plan.streams if s.clamped)

    def test_zero_conditional_entropy_is_exact_zero(self):
        # parallel identity channel: Z determines (X, Y), so H(X|Z) = 0 and
        # the hash length is an exact zero, not a clamp
        plan = make_plan(parallel_mac(), UNIF, None, 8, 2, 0.05, p_y=UNIF,
                         idealized=IDEAL)
        sx = plan.stream("x")
        assert sx.hash_len == 0
        assert not sx.clamped

    def test_width_conservation(self):
        plan = make_plan(adder_mac(), UNIF,
                         split_rates(adder_mac(), UNIF, 0.5, 0.3), 16, 3, 0.05,
                         idealized=IDEAL)
        for s in plan.streams:
            assert s.hash_len + s.seed_len_rest == s.codec_width
            assert s.seed_len_first >= s.codec_width

    def test_first_block_length_formula(self):
        plan = make_plan(adder_mac(), UNIF,
                         split_rates(adder_mac(), UNIF, 0.5, 0.5), 16, 3, 0.05,
                         idealized=IDEAL)
        for s in plan.streams:
            assert s.seed_len_first >= math.ceil(
                16 * (s.source_entropy + plan.eps) - 1e-9)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError, match="power of two"):
            make_plan(adder_mac(), UNIF, None, 12, 2, 0.05, p_y=UNIF)

    def test_k_one_single_block(self):
        code = adder_code(n=4, k=1)
        bt = run_trials(code, 16, make_rng(0))
        assert bt.k == 1
        assert all(len(v) == 0 for v in bt.recycled.values())

    def test_multi_plan_order(self):
        ch = adder_mac3()
        plan = make_plan_multi(ch, [UNIF] * 3, (2, 0, 1), 8, 2, 0.05,
                               idealized=IDEAL)
        assert [s.name for s in plan.streams] == ["x3", "x1", "x2"]
        j = ch.joint_with_output([UNIF] * 3)
        assert plan.streams[0].fresh_info == pytest.approx(
            mutual_information(j, [2], [3]), abs=1e-12)
        assert plan.streams[2].fresh_info == pytest.approx(
            mutual_information(j, [1], [3, 2, 0]), abs=1e-12)

    def test_multi_order_must_be_permutation(self):
        with pytest.raises(ValueError, match="permutation"):
            make_plan_multi(adder_mac3(), [UNIF] * 3, (0, 0, 1), 8, 2, 0.05)


class TestCaseClassification:
    def test_adder_is_case1(self):
        assert classify_two_user(adder_mac(), UNIF, UNIF) == "case1"

    def test_parallel_is_case2(self):
        assert classify_two_user(parallel_mac(), UNIF, UNIF) == "case2"

    def test_wrong_case_refused(self):
        with pytest.raises(ValueError, match="case1"):
            build_mac_code(adder_mac(), [UNIF, UNIF], mode="case2",
                           block_len=4, k=1, xi=0.05, idealized=IDEAL,
                           rng=make_rng(0))
        with pytest.raises(ValueError, match="case2"):
            build_mac_code(parallel_mac(), [UNIF, UNIF], mode="case1",
                           block_len=4, k=1, xi=0.05, idealized=IDEAL,
                           rng=make_rng(0))


class TestChainEncoding:
    def test_hash_chain_replay(self):
        code = adder_code()
        bt = run_trials(code, 300, make_rng(2))
        for name in ("x", "u", "v"):
            h = code.hashes[name]
            for i in range(1, code.plan.k):
                rec = h.apply_batch(bt.streams[name][:, i - 1, :])
                assert np.array_equal(rec, bt.recycled[name][i - 1])

    def test_transcript_deterministic(self):
        code = adder_code()
        a = run_trials(code, 200, make_rng(3))
        b = run_trials(code, 200, make_rng(3))
        assert np.array_equal(a.channel_out, b.channel_out)
        for name in a.streams:
            assert np.array_equal(a.streams[name], b.streams[name])

    def test_y_is_componentwise_max(self):
        code = adder_code()
        bt = run_trials(code, 100, make_rng(4))
        assert np.array_equal(bt.streams["y"],
                              np.maximum(bt.streams["u"], bt.streams["v"]))

    def test_eps_zero_split_silences_u(self):
        code = adder_code(eps_split=0.0)
        bt = run_trials(code, 50, make_rng(5))
        assert not bt.streams["u"].any()
        assert np.array_equal(bt.streams["y"], bt.streams["v"])

    def test_eps_one_split_silences_v(self):
        code = adder_code(eps_split=1.0)
        bt = run_trials(code, 50, make_rng(6))
        assert not bt.streams["v"].any()
        assert np.array_equal(bt.streams["y"], bt.streams["u"])

    def test_max_law_monte_carlo(self):
        # Composition check against the exact codec laws: with U and V
        # independent, P(Y_i = 1) = 1 - (1 - pu_i)(1 - pv_i) where pu, pv are
        # the exact per-position marginals of the two polar codecs.  (At
        # N = 8, beta = 0.25 those marginals are 0.3827, far from the
        # asymptotic 0.2929, so comparing against q = 0.5 would be wrong.)
        from macresolve.polar import output_pmf_exact
        from macresolve.probcore import all_bit_rows

        code = adder_code(n=8, k=2)
        bits = all_bit_rows(8)
        per_pos = {}
        for name in ("u", "v"):
            px = output_pmf_exact(code.codecs[name])
            per_pos[name] = (px[:, None] * bits).sum(axis=0)
        expect = 1 - (1 - per_pos["u"]) * (1 - per_pos["v"])
        trials = 100_000
        bt = run_trials(code, trials, make_rng(7))
        emp = bt.streams["y"][:, 0, :].mean(axis=0)  # block 1: exact-law match
        sigma = 0.5 / math.sqrt(trials)
        assert np.all(np.abs(emp - expect) < 4 * sigma)

    def test_seed_width_checked(self):
        code = adder_code(n=4, k=2)
        widths = [code.plan.stream("x").seed_len_first + 1,
                  code.plan.stream("x").seed_len_rest]
        seeds = [np.zeros((5, w), dtype=np.uint8) for w in widths]
        with pytest.raises(ValueError, match="width"):
            encode_tx1(code, seeds, make_rng(0))

    def test_recycling_ablation_draws_fresh(self):
        code = adder_code(n=4, k=3)
        bt = run_trials(code, 400, make_rng(8), recycle=False)
        for name in ("x", "u", "v"):
            h = code.hashes[name]
            if h.out_len == 0:
                continue
            rec = h.apply_batch(bt.streams[name][:, 0, :])
            assert not np.array_equal(rec, bt.recycled[name][0])


class TestCase2AndMulti:
    def test_case2_runs_two_streams(self):
        code = build_mac_code(parallel_mac(), [Dist.bernoulli(0.3),
                                               Dist.bernoulli(0.6)],
                              block_len=8, k=2, xi=0.05, idealized=IDEAL,
                              rng=make_rng(9))
        assert code.mode == "case2"
        bt = run_trials(code, 100, make_rng(10))
        assert set(bt.streams) == {"x", "y"}

    def test_case2_hash_lengths_from_substitution(self):
        p_x, p_y = Dist.bernoulli(0.3), Dist.bernoulli(0.6)
        ch = parallel_mac()
        plan = make_plan(ch, p_x, None, 8, 2, 0.05, p_y=p_y, idealized=IDEAL)
        j = ch.joint_with_output([p_x, p_y])
        from macresolve.probcore import conditional_entropy

        assert plan.stream("x").recycle_entropy == pytest.approx(
            conditional_entropy(j, [0], [2]), abs=1e-12)
        assert plan.stream("y").recycle_entropy == pytest.approx(
            conditional_entropy(j, [1], [2, 0]), abs=1e-12)

    def test_deterministic_source_emits_constants(self):
        ch = parallel_mac()
        code = build_mac_code(ch, [Dist.bernoulli(0.3), Dist.bernoulli(0.0)],
                              block_len=4, k=2, xi=0.05, idealized=IDEAL,
                              rng=make_rng(11))
        bt = run_trials(code, 64, make_rng(12))
        assert not bt.streams["y"].any()

    def test_single_user_reduces_to_point_to_point(self):
        ch = MacChannel((Alphabet(2),), Alphabet(2),
                        np.array([[0.9, 0.1], [0.2, 0.8]]))
        code = build_mac_code(ch, [Dist.bernoulli(0.4)], mode="multi",
                              block_len=8, k=2, xi=0.05, idealized=IDEAL,
                              rng=make_rng(13))
        bt = run_trials(code, 50, make_rng(14))
        assert set(bt.streams) == {"x1"}
        assert code.plan.streams[0].fresh_info == pytest.approx(
            mutual_information(ch.joint_with_output([Dist.bernoulli(0.4)]),
                               [0], [1]), abs=1e-12)

    def test_two_orders_hit_both_corners(self):
        ch = adder_mac()
        j = ch.joint_with_output([UNIF, UNIF])
        lims = {}
        for order in ((0, 1), (1, 0)):
            plan = make_plan_multi(ch, [UNIF, UNIF], order, 8, 2, 0.05,
                                   idealized=IDEAL)
            lims[order] = tuple(s.fresh_info for s in plan.streams)
        assert lims[(0, 1)] == pytest.approx(
            (mutual_information(j, [0], [2]),
             mutual_information(j, [1], [2, 0])), abs=1e-12)
        assert lims[(1, 0)] == pytest.approx(
            (mutual_information(j, [1], [2]),
             mutual_information(j, [0], [2, 1])), abs=1e-12)

    def test_three_user_corner_sums_to_output_entropy(self):
        ch = adder_mac3()
        plan = make_plan_multi(ch, [UNIF] * 3, (0, 1, 2), 8, 2, 0.05,
                               idealized=IDEAL)
        total = sum(s.fresh_info for s in plan.streams)
        # H(Z) for Z = X1+X2+X3 with uniform inputs: H(1/8, 3/8, 3/8, 1/8)
        h_z = -(0.125 * math.log2(0.125) * 2 + 0.375 * math.log2(0.375) * 2)
        assert total == pytest.approx(h_z, abs=1e-12)
        code = build_mac_code(ch, [UNIF] * 3, mode="multi", block_len=4, k=2,
                              xi=0.05, idealized=IDEAL, rng=make_rng(15))
        bt = run_trials(code, 64, make_rng(16))
        assert bt.channel_out.max() <= 3


class TestAchievedRates:
    def test_k1_formula(self):
        code = adder_code(n=8, k=1)
        rates = achieved_rates(code.plan)
        for s in code.plan.streams:
            assert rates["per_stream"][s.name]["rate"] == Fraction(
                s.seed_len_first, 8)

    def test_finite_k_closed_form_and_tally(self):
        code = adder_code(n=8, k=4)
        rates = achieved_rates(code.plan)
        bt = run_trials(code, 3, make_rng(17))
        tally = tally_fresh_bits(bt)
        for s in code.plan.streams:
            expect = Fraction(s.seed_len_first + 3 * s.seed_len_rest, 4 * 8)
            assert rates["per_stream"][s.name]["rate"] == expect
            assert tally[s.name] == s.seed_len_first + 3 * s.seed_len_rest

    def test_limits_equal_formula(self):
        ch = adder_mac()
        sp = split_rates(ch, UNIF, 0.5, 0.5)
        plan = make_plan(ch, UNIF, sp, 1024, 20, 0.05)
        rates = achieved_rates(plan)
        j_stream = {"x": sp.rates[0], "u": sp.rates[1], "v": sp.rates[2]}
        for name, r in j_stream.items():
            assert rates["per_stream"][name]["limit"] == pytest.approx(
                r + plan.eps, abs=1e-12)
        assert rates["r2_limit"] == pytest.approx(
            sp.rates[1] + sp.rates[2] + 2 * plan.eps, abs=1e-12)


class TestDescriptor:
    def test_roundtrip_bit_exact(self):
        code = adder_code(n=8, k=2)
        desc = code_to_descriptor(code)
        blob = json.dumps(desc, sort_keys=True)
        code2 = code_from_descriptor(json.loads(blob))
        a = run_trials(code, 50, make_rng(18))
        b = run_trials(code2, 50, make_rng(18))
        assert np.array_equal(a.channel_out, b.channel_out)
        assert descriptor_hash(desc) == descriptor_hash(
            code_to_descriptor(code2))

    def test_transcript_csv_dump(self, tmp_path):
        code = adder_code(n=4, k=2)
        bt = run_trials(code, 3, make_rng(19))
        path = tmp_path / "transcript.csv"
        transcript_to_csv(bt, 1, path)
        text = path.read_text()
        assert "stream_x" in text and "recycled_x" in text
        assert "channel_out" in text
