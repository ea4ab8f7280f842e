import numpy as np
import pytest

from refinery3d.geometry import Box3D, iou_3d
from refinery3d.proposals import (
    IEConfig,
    Origin,
    Proposal,
    augment_proposals,
    closest_proposal,
    extrapolate,
    interpolate,
    select_highest_confidence,
)

from oracles import greedy_nms_ref


def prop(center, conf, size=(2.0, 2.0, 2.0), heading=0.0, cat="Car"):
    return Proposal(Box3D(center, size, heading, cat), conf)


def rand_props(rng, n, span=20.0):
    out = []
    for _ in range(n):
        out.append(
            Proposal(
                Box3D(
                    tuple(rng.uniform(-span, span, 3)),
                    tuple(rng.uniform(0.5, 4.0, 3)),
                    rng.uniform(-3, 3),
                    "Car",
                ),
                float(rng.uniform(0, 1)),
            )
        )
    return out


class TestSelectHighestConfidence:
    def test_overlapping_pair_split(self):
        a = prop((0.0, 0.0, 0.0), 0.9)
        b = prop((1.2, 0.0, 0.0), 0.7)
        assert iou_3d(a.box, b.box) > 0.01
        p_h, p_r = select_highest_confidence([a, b], IEConfig())
        assert p_h == [0]
        assert p_r == [1]

    def test_disjoint_all_highest(self):
        props = [prop((10.0 * i, 0.0, 0.0), 0.5 + 0.1 * i) for i in range(4)]
        p_h, p_r = select_highest_confidence(props, IEConfig())
        assert sorted(p_h) == [0, 1, 2, 3]
        assert p_r == []

    def test_partition(self):
        rng = np.random.default_rng(0)
        props = rand_props(rng, 64, span=12.0)
        p_h, p_r = select_highest_confidence(props, IEConfig())
        assert sorted(p_h + p_r) == list(range(64))

    def test_matches_brute_force_split(self):
        rng = np.random.default_rng(1)
        props = rand_props(rng, 512, span=40.0)
        p_h, _ = select_highest_confidence(props, IEConfig())
        ref = greedy_nms_ref(
            [p.box for p in props], [p.confidence for p in props], 0.01, iou_3d
        )
        assert p_h == ref

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            select_highest_confidence([], IEConfig())


class TestClosestProposal:
    def test_empty_pool(self):
        assert closest_proposal(prop((0, 0, 0), 0.9), []) is None

    def test_single_overlapping(self):
        i = prop((0.0, 0.0, 0.0), 0.9)
        j = prop((0.5, 0.0, 0.0), 0.5)
        got = closest_proposal(i, [j])
        assert got is not None
        assert got[0] == 0
        assert got[1] == pytest.approx(iou_3d(i.box, j.box))

    def test_no_overlap_is_absent(self):
        i = prop((0.0, 0.0, 0.0), 0.9)
        assert closest_proposal(i, [prop((50.0, 0.0, 0.0), 0.5)]) is None

    def test_matches_exhaustive_argmax(self):
        rng = np.random.default_rng(2)
        i = prop((0.0, 0.0, 0.0), 0.9, size=(4.0, 3.0, 2.0))
        pool = rand_props(rng, 20, span=3.0)
        got = closest_proposal(i, pool)
        ious = [iou_3d(i.box, p.box) for p in pool]
        best = max(range(20), key=lambda k: (ious[k], -k))
        if max(ious) <= 0:
            assert got is None
        else:
            assert got == (best, pytest.approx(ious[best]))


class TestInterpolateExtrapolate:
    def test_midpoint(self):
        i = prop((2.0, 0.0, 0.0), 0.8)
        j = prop((0.0, 0.0, 0.0), 0.5)
        out = interpolate(i, j, 0.5)
        assert out.box.center == (1.0, 0.0, 0.0)
        assert out.origin is Origin.INTERPOLATED

    def test_coincident_centers_unchanged(self):
        i = prop((1.0, 1.0, 0.0), 0.8)
        j = prop((1.0, 1.0, 0.0), 0.5)
        assert interpolate(i, j, 0.3).box.center == (1.0, 1.0, 0.0)
        assert extrapolate(i, j, 0.3).box.center == (1.0, 1.0, 0.0)

    def test_quarter_lambda(self):
        i = prop((2.0, 0.0, 0.0), 0.8)
        j = prop((0.0, 0.0, 0.0), 0.5)
        assert interpolate(i, j, 0.25).box.center == (1.5, 0.0, 0.0)

    def test_extrapolate_half(self):
        i = prop((2.0, 0.0, 0.0), 0.8)
        j = prop((0.0, 0.0, 0.0), 0.5)
        out = extrapolate(i, j, 0.5)
        assert out.box.center == (3.0, 0.0, 0.0)
        assert out.origin is Origin.EXTRAPOLATED

    def test_extrapolate_componentwise(self):
        i = prop((1.0, 1.0, 0.0), 0.8)
        j = prop((0.0, 0.0, 0.0), 0.5)
        assert extrapolate(i, j, 0.5).box.center == (1.5, 1.5, 0.0)

    def test_inherits_size_heading_confidence(self):
        i = prop((2.0, 0.0, 0.0), 0.8125, size=(3.25, 1.5, 1.25), heading=0.77)
        j = prop((1.0, 0.5, 0.0), 0.5, size=(9.0, 9.0, 9.0), heading=-2.0)
        for out in (interpolate(i, j, 0.5), extrapolate(i, j, 0.5)):
            assert out.box.size == i.box.size
            assert out.box.heading == i.box.heading
            assert out.box.category == i.box.category
            assert out.confidence == i.confidence

    def test_lambda_range_enforced(self):
        i = prop((2.0, 0.0, 0.0), 0.8)
        j = prop((0.0, 0.0, 0.0), 0.5)
        for lam in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                interpolate(i, j, lam)
            with pytest.raises(ValueError):
                extrapolate(i, j, lam)
        with pytest.raises(ValueError):
            IEConfig(lam=1.0)


class TestAugmentProposals:
    def test_isolated_proposals_unchanged(self):
        props = [prop((12.0 * i, 0.0, 0.0), 0.5 + 0.05 * i) for i in range(5)]
        assert augment_proposals(props, IEConfig()) == props

    def test_one_qualifying_pair_adds_exactly_two(self):
        a = prop((0.0, 0.0, 0.0), 0.9)
        b = prop((0.8, 0.0, 0.0), 0.6)
        out = augment_proposals([a, b], IEConfig())
        assert out[:2] == [a, b]
        assert len(out) == 4
        origins = {p.origin for p in out[2:]}
        assert origins == {Origin.INTERPOLATED, Origin.EXTRAPOLATED}

    def test_exact_threshold_tie_generates_nothing(self):
        a = prop((0.0, 0.0, 0.0), 0.9)
        b = prop((1.5, 0.0, 0.0), 0.6)
        sigma = iou_3d(a.box, b.box)
        assert sigma > 0
        out = augment_proposals([a, b], IEConfig(t_iou=sigma))
        assert out == [a, b]

    def test_generated_geometry_properties(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            centers = rng.uniform(-6, 6, (10, 3))
            props = [
                Proposal(
                    Box3D(tuple(c), tuple(rng.uniform(1.5, 4, 3)), rng.uniform(-3, 3), "Car"),
                    float(rng.uniform(0, 1)),
                )
                for c in centers
            ]
            cfg = IEConfig(lam=float(rng.uniform(0.1, 0.9)))
            out = augment_proposals(props, cfg)
            assert out[: len(props)] == props
            p_h, p_r = select_highest_confidence(props, cfg)
            assert len(out) - len(props) <= 2 * len(p_h)
            gen = out[len(props):]
            for g in gen:
                src = next(
                    props[k]
                    for k in p_h
                    if props[k].box.size == g.box.size
                    and props[k].box.heading == g.box.heading
                    and props[k].confidence == g.confidence
                )
                pair = closest_proposal(src, [props[r] for r in p_r])
                oi = np.asarray(src.box.center)
                oj = np.asarray(props[p_r[pair[0]]].box.center)
                oc = np.asarray(g.box.center)
                # collinear with the (i, j) pair
                cross = np.cross(oc - oi, oj - oi)
                assert np.linalg.norm(cross) < 1e-9 * max(1.0, np.linalg.norm(oj - oi))
                # exact lambda-scaled displacement from i
                assert np.linalg.norm(oc - oi) == pytest.approx(
                    cfg.lam * np.linalg.norm(oi - oj), rel=1e-12, abs=1e-12
                )
                # interpolation lands strictly inside the segment, while
                # extrapolation lands on the far side of i from j
                side = float((oc - oi) @ (oj - oi))
                if g.origin is Origin.INTERPOLATED:
                    assert side > 0.0
                    assert np.linalg.norm(oc - oj) < np.linalg.norm(oi - oj)
                else:
                    assert g.origin is Origin.EXTRAPOLATED
                    assert side < 0.0

    def test_empty_input_returns_empty(self):
        assert augment_proposals([], IEConfig()) == []
