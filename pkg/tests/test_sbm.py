import io
from math import comb

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from fairclust.graph import save_edge_list, validate
from fairclust.metrics import contingency
from fairclust.sbm import SbmSpec, generate


def block_edge_counts(graph, truth):
    edges = np.array(sorted(graph.edges))
    same = truth[edges[:, 0]] == truth[edges[:, 1]]
    return int(same.sum()), int((~same).sum())


class TestGenerate:
    def test_degenerate_cliques(self):
        graph, truth, _ = generate(SbmSpec(n=8, k=2, g=2, p_in=1.0, p_out=0.0))
        block = np.ones((4, 4)) - np.eye(4)
        expected = np.zeros((8, 8))
        expected[:4, :4] = expected[4:, 4:] = block
        np.testing.assert_array_equal(graph.dense(), expected)
        assert truth.labels.tolist() == [0] * 4 + [1] * 4

    def test_equal_sizes(self):
        _, truth, groups = generate(SbmSpec(n=20, k=5, g=5, seed=3))
        assert truth.sizes.tolist() == [4] * 5
        assert groups.sizes.tolist() == [4] * 5

    def test_valid_graph(self):
        graph, _, _ = generate(SbmSpec(n=60, k=3, g=2, seed=1))
        report = validate(graph)
        assert report.symmetric and not report.self_loops

    def test_intra_block_binomial(self):
        trials = 2 * comb(100, 2)
        mean, sd = trials * 0.3, np.sqrt(trials * 0.3 * 0.7)
        for seed in range(20):
            graph, truth, _ = generate(SbmSpec(n=200, k=2, g=2, p_in=0.3, p_out=0.05, seed=seed))
            within, _ = block_edge_counts(graph, truth.labels)
            assert abs(within - mean) <= 4 * sd

    def test_densities_converge(self):
        spec = SbmSpec(n=600, k=3, g=3, p_in=0.25, p_out=0.02, seed=9)
        graph, truth, _ = generate(spec)
        within, between = block_edge_counts(graph, truth.labels)
        size = spec.n // spec.k
        pairs_in = spec.k * comb(size, 2)
        pairs_out = comb(spec.n, 2) - pairs_in
        assert within / pairs_in == pytest.approx(spec.p_in, rel=0.1)
        assert between / pairs_out == pytest.approx(spec.p_out, rel=0.1)

    def test_deterministic(self):
        spec = SbmSpec(n=40, k=4, g=2, seed=12)
        a, b = generate(spec), generate(spec)
        bufs = []
        for graph, _, _ in (a, b):
            buf = io.StringIO()
            save_edge_list(graph, buf)
            bufs.append(buf.getvalue())
        assert bufs[0] == bufs[1]
        assert np.array_equal(a[2].labels, b[2].labels)
        assert np.array_equal(a[1].labels, b[1].labels)

    def test_seeds_differ(self):
        a = generate(SbmSpec(n=40, k=4, g=2, seed=0))
        b = generate(SbmSpec(n=40, k=4, g=2, seed=1))
        assert a[0].edges != b[0].edges

    def test_groups_independent_of_blocks(self):
        pvalues = []
        for seed in range(50):
            _, truth, groups = generate(SbmSpec(n=200, k=4, g=4, seed=seed))
            table = contingency(truth, groups)
            pvalues.append(chi2_contingency(table)[1])
        # sanity over the batch, not per seed
        assert np.median(pvalues) > 0.05
        assert np.mean(np.array(pvalues) > 0.001) >= 0.95

    def test_aligned_groups(self):
        _, truth, groups = generate(SbmSpec(n=20, k=2, g=2, aligned_groups=True))
        assert np.array_equal(truth.labels, groups.labels)


class TestSbmSpecValidation:
    @pytest.mark.parametrize("kwargs, message", [
        ({"n": 7, "k": 2, "g": 1}, "divisible by k"),
        ({"n": 8, "k": 2, "g": 3}, "divisible by g"),
        ({"n": 8, "k": 2, "g": 2, "p_in": 0.1, "p_out": 0.2}, "p_out < p_in"),
        ({"n": 8, "k": 2, "g": 2, "p_in": 0.2, "p_out": 0.2}, "p_out < p_in"),
        ({"n": 8, "k": 2, "g": 2, "p_in": 1.5}, "p_in <= 1"),
    ])
    def test_rejects(self, kwargs, message):
        with pytest.raises(ValueError, match=message):
            SbmSpec(**kwargs)

    def test_to_dict(self):
        d = SbmSpec(n=10, k=2, g=2, seed=5).to_dict()
        assert d["seed"] == 5 and d["p_in"] == 0.25
