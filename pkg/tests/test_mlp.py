import math

import numpy as np
import pytest

from xbarsim.crossbar import build_crossbar
from xbarsim.device import DeviceVariationSpec
from xbarsim.mlp import (ConductancePairMap, MlpNetwork, NetworkTopology,
                         encode_pixels, infer, layer_forward, neuron_hidden,
                         neuron_output)
from xbarsim.rng import stream

CLEAN = DeviceVariationSpec(stuck_probability=0.0)


def random_network(seed=0, scale=40e-6):
    rng = stream(seed, "net")
    l1 = ConductancePairMap(rng.uniform(10e-6, 100e-6, (10, 17)),
                            rng.uniform(10e-6, 100e-6, (10, 17)), layer=1)
    l2 = ConductancePairMap(rng.uniform(10e-6, 100e-6, (4, 11)),
                            rng.uniform(10e-6, 100e-6, (4, 11)), layer=2)
    return MlpNetwork(l1, l2)


class TestNeurons:
    def test_hidden_odd_and_saturating(self):
        assert neuron_hidden(0.0) == 0.0
        assert neuron_hidden(8e-6) == pytest.approx(0.2 * math.tanh(8), rel=1e-12)
        assert neuron_hidden(-8e-6) == pytest.approx(-0.2 * math.tanh(8), rel=1e-12)

    def test_output_linear(self):
        assert neuron_output(0.0) == 0.0
        assert neuron_output(1e-6) == pytest.approx(1.0, rel=1e-12)
        assert neuron_output(-2.5e-6) == pytest.approx(-2.5, rel=1e-12)

    def test_output_clamp_optional(self):
        assert neuron_output(20e-6, clamp=10.0) == 10.0


class TestLayerForward:
    def test_balanced_pairs_give_zero(self):
        g = np.full((6, 5), 50e-6)
        layer = ConductancePairMap(g, g.copy())
        out = layer_forward(layer, np.full(5, 0.2), "hidden")
        np.testing.assert_array_equal(out, np.zeros(6))

    def test_single_pair_hand_value(self):
        plus = np.full((1, 1), 50e-6)
        minus = np.full((1, 1), 10e-6)
        layer = ConductancePairMap(plus, minus)
        out = layer_forward(layer, np.array([0.2]), "hidden")
        assert out[0] == pytest.approx(0.2 * math.tanh(0.2 * 40e-6 * 1e6), rel=1e-12)

    def test_matches_dense_reference(self):
        rng = stream(5, "ref")
        plus = rng.uniform(10e-6, 100e-6, (4, 7))
        minus = rng.uniform(10e-6, 100e-6, (4, 7))
        x = rng.uniform(-0.2, 0.2, 7)
        got = layer_forward(ConductancePairMap(plus, minus), x, "output")
        want = 1e6 * ((plus - minus) @ x)
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_crossbar_and_map_agree(self):
        net = random_network(7)
        xb = build_crossbar(20, 17, CLEAN, seed=70)
        xb.set_conductances(net.layer1.to_grid(), respect_stuck=False)
        x = stream(8, "x").uniform(-0.2, 0.2, 17)
        via_map = layer_forward(net.layer1, x, "hidden")
        via_xbar = layer_forward(xb, x, "hidden")
        np.testing.assert_allclose(via_xbar, via_map, rtol=1e-12)


class TestInfer:
    def test_balanced_network_ties_to_class_zero(self):
        g1 = np.full((10, 17), 50e-6)
        g2 = np.full((4, 11), 50e-6)
        net = MlpNetwork(ConductancePairMap(g1, g1.copy()),
                         ConductancePairMap(g2, g2.copy()))
        cls, volts = infer(net, [0, 1] * 8)
        assert cls == 0
        np.testing.assert_array_equal(volts, np.zeros(4))

    def test_deterministic(self):
        net = random_network(9)
        pixels = [1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1]
        a = infer(net, pixels)
        b = infer(net, pixels)
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1], b[1])

    def test_pixel_encoding_levels(self):
        x = encode_pixels([1] * 8 + [0] * 8)
        assert (x[:8] == 0.2).all() and (x[8:] == -0.2).all()

    def test_hidden_saturation_bound(self):
        rng = stream(10, "sat")
        for _ in range(200):
            net = random_network(int(rng.integers(1 << 30)))
            pixels = rng.integers(0, 2, 16)
            x = np.concatenate([encode_pixels(pixels), [0.2]])
            hidden = layer_forward(net.layer1, x, "hidden")
            assert (np.abs(hidden) <= 0.2).all()

    def test_swap_antisymmetry(self):
        # Swapping plus and minus negates a layer's response exactly (both
        # activation kinds are odd in the differential current).
        net = random_network(11)
        rng = stream(11, "swapin")
        x17 = rng.uniform(-0.2, 0.2, 17)
        for layer, kind, x in ((net.layer1, "hidden", x17),
                               (net.layer2, "output", rng.uniform(-0.2, 0.2, 11))):
            swapped = ConductancePairMap(layer.minus, layer.plus)
            np.testing.assert_allclose(layer_forward(swapped, x, kind),
                                       -layer_forward(layer, x, kind),
                                       rtol=1e-12, atol=1e-15)
        # At network level an output-layer swap negates the 4 voltages.
        pixels = [0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 0]
        _, v = infer(net, pixels)
        half_swap = MlpNetwork(net.layer1,
                               ConductancePairMap(net.layer2.minus, net.layer2.plus))
        _, v_half = infer(half_swap, pixels)
        np.testing.assert_allclose(v_half, -v, rtol=1e-12)

    def test_output_scaling_preserves_argmax(self):
        net = random_network(12)
        pixels = [1, 1, 0, 0, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 1]
        cls, v = infer(net, pixels)
        scaled = MlpNetwork(net.layer1,
                            ConductancePairMap(3.0 * net.layer2.plus,
                                               3.0 * net.layer2.minus))
        cls_scaled, v_scaled = infer(scaled, pixels)
        assert cls_scaled == cls
        np.testing.assert_allclose(v_scaled, 3.0 * v, rtol=1e-12)

    def test_crossbar_network_equals_map_network(self):
        net = random_network(13)
        xb1 = build_crossbar(20, 17, CLEAN, seed=130)
        xb2 = build_crossbar(8, 11, CLEAN, seed=131)
        xb1.set_conductances(net.layer1.to_grid(), respect_stuck=False)
        xb2.set_conductances(net.layer2.to_grid(), respect_stuck=False)
        hw = MlpNetwork(xb1, xb2)
        pixels = [1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1, 0, 0]
        cls_a, v_a = infer(net, pixels)
        cls_b, v_b = infer(hw, pixels)
        assert cls_a == cls_b
        np.testing.assert_allclose(v_b, v_a, rtol=1e-12)


class TestPairGrid:
    def test_grid_round_trip(self):
        net = random_network(14)
        grid = net.layer1.to_grid()
        assert grid.shape == (20, 17)
        back = ConductancePairMap.from_grid(grid, layer=1)
        np.testing.assert_array_equal(back.plus, net.layer1.plus)
        np.testing.assert_array_equal(back.minus, net.layer1.minus)
