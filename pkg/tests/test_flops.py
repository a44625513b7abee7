import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilefit.flops import flops_per_sample, format_flops, total_flops
from tilefit.nets import Activation, SubNetworkConfig
from tilefit.partition import GridSpec


def cfg(d, w, activation=Activation.SINE, mapping=65):
    return SubNetworkConfig(depth_d=d, width_w=w, activation=activation, mapping_size=mapping)


# (depth, width, per-sample, total over 128^2, human-readable)
PUBLISHED_IMAGE_COUNTS = [
    (3, 256, 395_776, 6_484_393_984, "6.48 G"),
    (5, 64, 41_600, 681_574_400, "681.57 M"),
    (2, 64, 17_024, 278_921_216, "278.92 M"),
    (1, 128, 34_048, 557_842_432, "557.84 M"),
]


class TestPerSample:
    @pytest.mark.parametrize("d,w,per_sample,total,human", PUBLISHED_IMAGE_COUNTS)
    def test_published_table_values(self, d, w, per_sample, total, human):
        assert flops_per_sample(cfg(d, w), 2, 3) == per_sample
        assert total_flops(cfg(d, w), GridSpec(1, 2), 128, 2, 3) == total
        assert format_flops(total) == human

    def test_hand_counted_minimal_case(self):
        # d=1, w=1, in=1, out=1: 2*(1 + 1 + 1) per sample, 2 samples
        assert flops_per_sample(cfg(1, 1), 1, 1) == 6
        assert total_flops(cfg(1, 1), GridSpec(1, 1), 2, 1, 1) == 12

    def test_relu_costs_like_sine(self):
        assert flops_per_sample(cfg(2, 32), 2, 3) == \
            flops_per_sample(cfg(2, 32, Activation.RELU), 2, 3)

    def test_fourier_adds_mapping_cost(self):
        # projection 2*in*F, F cos + F sin at 1 FLOP each, stack input 2F wide
        f, d, w = 65, 1, 128
        expected = 2 * 2 * f + 2 * f + 2 * (2 * f * w + d * w * w + w * 3)
        assert flops_per_sample(cfg(d, w, Activation.FOURIER_RELU, f), 2, 3) == expected


class TestTotals:
    @given(m_order=st.sampled_from([1, 2, 4, 8, 16, 32]))
    @settings(max_examples=12, deadline=None)
    def test_grid_invariance(self, m_order):
        base = total_flops(cfg(3, 64), GridSpec(1, 2), 128, 2, 3)
        assert total_flops(cfg(3, 64), GridSpec(m_order, 2), 128, 2, 3) == base

    @given(d=st.integers(1, 6), w=st.integers(1, 300), n=st.sampled_from([16, 64, 128]))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_depth_width_and_n(self, d, w, n):
        base = total_flops(cfg(d, w), GridSpec(1, 2), n, 2, 3)
        assert total_flops(cfg(d + 1, w), GridSpec(1, 2), n, 2, 3) > base
        assert total_flops(cfg(d, w + 1), GridSpec(1, 2), n, 2, 3) > base
        assert total_flops(cfg(d, w), GridSpec(1, 2), n * 2, 2, 3) > base

    def test_rank1_uses_linear_sample_count(self):
        assert total_flops(cfg(1, 4), GridSpec(1, 1), 1000, 1, 1) == \
            flops_per_sample(cfg(1, 4), 1, 1) * 1000

    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            total_flops(cfg(1, 4), GridSpec(3, 2), 128, 2, 3)


class TestFormat:
    def test_units(self):
        assert format_flops(999) == "999"
        assert format_flops(12_340) == "12.34 K"
        assert format_flops(557_842_432) == "557.84 M"
        assert format_flops(6_484_393_984) == "6.48 G"
