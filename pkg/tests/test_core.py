import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from empost.core import (EvaluationPoint, InitialStressProfile, InterconnectTree, Junction, MaterialParams,
                         ScalingConstants, Segment, StressField, TreeValidationError, diffusivity, drive_force,
                         require_valid, scale_problem, scale_stress, steady_nucleation_stress, tree_model,
                         unscale_model, unscale_stress, validate_tree)
from empost.fixtures import THREE_SEGMENT, tree_from_segments
from empost.io import SchemaError, fixture_path, load_tree, save_tree, tree_from_dict, tree_to_dict

MAT = MaterialParams()

# frozen from a 30-digit mpmath evaluation of the same arithmetic
G_AT_1E9 = 4009111617312.072
KAPPA_373 = 1.23278976337351756844e-17


class TestMaterial:
    def test_drive_force_reference_value(self):
        assert drive_force(1e9, MAT) == pytest.approx(G_AT_1E9, rel=1e-14)
        assert drive_force(1e9, MAT) == pytest.approx(4.009e12, rel=1e-3)

    def test_drive_force_zero_and_odd(self):
        assert drive_force(0.0, MAT) == 0.0
        assert drive_force(-2.5e9, MAT) == -drive_force(2.5e9, MAT)

    def test_diffusivity_reference_value(self):
        assert diffusivity(MAT) == pytest.approx(KAPPA_373, rel=1e-12)
        # diffusion length over the 1e8 s horizon is comparable to wire lengths
        assert 30e-6 < math.sqrt(diffusivity(MAT) * 1e8) < 40e-6

    def test_diffusivity_without_activation_energy(self):
        m = replace(MAT, ea=1e-300)
        kt = m.k_boltzmann * m.temperature
        assert diffusivity(m) == pytest.approx(m.d0 * m.bulk_modulus_B * m.omega_atomic / kt, rel=1e-12)

    @pytest.mark.parametrize("name", ["rho", "temperature", "d0", "bulk_modulus_B"])
    def test_nonpositive_material_rejected(self, name):
        with pytest.raises(ValueError):
            replace(MAT, **{name: 0.0})


class TestInitialStress:
    def test_profiles_evaluate(self):
        L = 10.0
        assert np.allclose(InitialStressProfile.constant(3.0).evaluate([0, 5, 10], L), 3.0)
        lin = InitialStressProfile.linear(L, 1.0, -1.0)
        assert np.allclose(lin.evaluate([0, 5, 10], L), [1, 0, -1])
        assert lin.slope_at("minus", L) == pytest.approx(-0.2)
        cos = InitialStressProfile.cosine(2.0, 1.0, 1.0)
        assert cos.evaluate(0.0, L) == pytest.approx(3.0)
        assert cos.evaluate(L, L) == pytest.approx(-1.0)

    def test_reflection(self):
        L = 4.0
        h = InitialStressProfile("piecewise_linear", knots=(0, 1, 4), values=(0, 3, 1))
        r = h.reflected(L)
        u = np.linspace(0, L, 17)
        assert np.allclose(r.evaluate(u, L), h.evaluate(L - u, L))

    @pytest.mark.parametrize("kw", [dict(knots=(0.0,), values=(1.0,)), dict(knots=(0, 2, 1), values=(1, 2, 3)),
                                    dict(knots=(1, 2), values=(1, 2))])
    def test_bad_piecewise_rejected(self, kw):
        with pytest.raises(ValueError):
            InitialStressProfile("piecewise_linear", **kw)

    @given(st.lists(st.floats(-1e9, 1e9), min_size=2, max_size=6))
    def test_piecewise_mean_matches_trapezoid(self, values):
        L = 7.0
        knots = np.linspace(0, L, len(values))
        h = InitialStressProfile("piecewise_linear", knots=tuple(knots), values=tuple(values))
        assert h.mean(L) == pytest.approx(np.trapezoid(values, knots) / L, rel=1e-9, abs=1e-3)


def _two_terminal():
    return tree_from_segments([("w", "T0", "T1", "horizontal", 30, 1e9)])


class TestValidation:
    def test_single_segment_ok(self):
        assert validate_tree(_two_terminal()) == []

    def test_fixtures_valid(self, ten_tree, three_tree, void_tree, voidless_tree):
        for t in (ten_tree, three_tree, void_tree, voidless_tree):
            assert validate_tree(t) == []
        assert len(ten_tree.segments) == 10

    def test_dangling_endpoint(self):
        t = _two_terminal()
        seg = replace(t.segments[0], node_plus="nowhere")
        diags = validate_tree(replace(t, segments=(seg,)))
        assert "dangling endpoint" in {d.code for d in diags}

    def test_multiple_voids(self):
        t = tree_from_segments(THREE_SEGMENT)
        segs = tuple(replace(s, void_end="at_plus") if s.id in ("b", "c") else s for s in t.segments)
        junctions = tuple(replace(j, kind="void_node") if j.id in ("T2", "T3") else j for j in t.junctions)
        diags = validate_tree(replace(t, segments=segs, junctions=junctions))
        assert "multiple voids" in {d.code for d in diags}

    def test_cycle_detected(self):
        segs = (Segment("a", "P", "Q", 1e-5, 1e-6, 1e9, "horizontal"),
                Segment("b", "Q", "R", 1e-5, 1e-6, 1e9, "vertical"),
                Segment("c", "P", "R", 1e-5, 1e-6, 1e9, "vertical"))
        junctions = (Junction("P", {"R": "a", "U": "c"}), Junction("Q", {"L": "a", "U": "b"}),
                     Junction("R", {"D": "b"}))
        diags = validate_tree(InterconnectTree(junctions, segs))
        assert diags

    def test_interior_degree_and_slot(self):
        t = _two_terminal()
        bad = replace(t, junctions=(replace(t.junctions[0], kind="interior"), t.junctions[1]))
        assert "interior degree" in {d.code for d in validate_tree(bad)}
        with pytest.raises(TreeValidationError):
            require_valid(bad)

    def test_disconnected(self):
        t = _two_terminal()
        other = Segment("z", "X", "Y", 1e-5, 1e-6, 0.0)
        bad = replace(t, segments=t.segments + (other,),
                      junctions=t.junctions + (Junction("X", {"R": "z"}, "blocked_terminal"),
                                               Junction("Y", {"L": "z"}, "blocked_terminal")))
        assert "disconnected" in {d.code for d in validate_tree(bad)}

    def test_evaluation_point(self):
        EvaluationPoint("s1", "minus", 0.0)
        with pytest.raises(ValueError):
            EvaluationPoint("s1", "middle", 1.0)
        with pytest.raises(ValueError):
            EvaluationPoint("s1", "plus", -1.0)


class TestScaling:
    def test_unscale_stress_example(self):
        sc = ScalingConstants()
        f = StressField("s", [0.0], [0.0], [[1.0]], scaled=True)
        assert unscale_stress(f, sc).values[0, 0] == pytest.approx(1e8)

    def test_identity_constants(self, three_tree):
        one = ScalingConstants(1.0, 1.0, 1.0)
        model = tree_model(three_tree)
        scaled, _, _ = scale_problem(model, one)
        for a, b in zip(model.segments, scaled.segments):
            assert (a.length, a.kappa, a.drive) == (b.length, b.kappa, b.drive)

    @settings(max_examples=30)
    @given(st.floats(1e-7, 1e2), st.floats(1e-9, 1e2), st.floats(1e-10, 1e2))
    def test_scale_round_trip(self, kx, kt, ks):
        sc = ScalingConstants(kx, kt, ks)
        model = tree_model(tree_from_segments(THREE_SEGMENT, initial_stress=None))
        back = unscale_model(scale_problem(model, sc)[0])
        for a, b in zip(model.segments, back.segments):
            assert b.length == pytest.approx(a.length, rel=1e-12)
            assert b.kappa == pytest.approx(a.kappa, rel=1e-12)
            assert b.drive == pytest.approx(a.drive, rel=1e-12)
        f = StressField("a", [0.0, 1e-5], [0.0, 1.0], [[1e8, 2e8], [3e8, -4e8]])
        assert np.allclose(unscale_stress(scale_stress(f, sc), sc).values, f.values, rtol=1e-12)

    def test_stress_field_checks(self):
        with pytest.raises(ValueError):
            StressField("s", [0.0, 1.0], [0.0], [[1.0]])
        with pytest.raises(ValueError):
            StressField("s", [1.0, 0.0], [0.0], [[1.0], [2.0]])
        with pytest.raises(ValueError):
            StressField("s", [0.0], [0.0], [[np.nan]])


class TestSteadyStress:
    def test_continuous_and_balanced(self, three_tree):
        blocked = tree_from_segments(THREE_SEGMENT)
        h = steady_nucleation_stress(blocked)
        node = {}
        for s in blocked.segments:
            for end, u in (("minus", 0.0), ("plus", s.length)):
                v = float(h[s.id].evaluate(u, s.length))
                node.setdefault(s.node(end), []).append(v)
        for vals in node.values():
            assert np.ptp(vals) < 1e-3
        total = sum(h[s.id].mean(s.length) * s.length for s in blocked.segments)
        assert abs(total) < 1e-9 * 1e8
        for s, m in zip(blocked.segments, tree_model(blocked).segments):
            assert h[s.id].slope_at("minus", s.length) == pytest.approx(-m.drive, rel=1e-12)


class TestTreeFiles:
    def test_round_trip(self, tmp_path, ten_tree):
        p = tmp_path / "t.json"
        save_tree(ten_tree, p, name="ten")
        again = load_tree(p)
        assert again == ten_tree

    def test_bundled_fixtures_load(self, ten_tree):
        assert load_tree(fixture_path("ten_segment.json")) == ten_tree

    def test_schema_error_has_pointer(self, ten_tree):
        doc = tree_to_dict(ten_tree)
        doc["segments"][2]["length"] = "long"
        with pytest.raises(SchemaError) as exc:
            tree_from_dict(doc)
        assert exc.value.errors[0][0] == "/segments/2/length"

    def test_unknown_key_rejected(self, ten_tree):
        doc = tree_to_dict(ten_tree)
        doc["segments"][0]["colour"] = "red"
        with pytest.raises(SchemaError):
            tree_from_dict(doc)

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(SchemaError):
            load_tree(p)

    def test_invariant_violation_after_schema(self, ten_tree):
        doc = json.loads(json.dumps(tree_to_dict(ten_tree)))
        doc["segments"][0]["node_minus"] = "ghost"
        with pytest.raises(TreeValidationError):
            tree_from_dict(doc)
