import json
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamnav import errors
from hamnav.prompting import (
    NODE_COLOR,
    build_action_prompt,
    build_localization_prompt,
    generate_plan,
    parse_scored_response,
    render_scores,
    render_svap,
)
from hamnav.sketchmap import HandDrawnMap, LandmarkAnnotation
from hamnav.topomap import build, integrate_predictions, mark_junctions, prune, segment_by_junctions

GOLDEN = Path(__file__).parent / "golden"


def make_topo(path=((20, 100), (120, 100), (120, 20)), landmarks=(), interval=25):
    drawing = np.full((200, 300, 3), 255, dtype=np.uint8)
    hmap = HandDrawnMap(
        drawing=drawing,
        landmarks=tuple(LandmarkAnnotation(l, p) for l, p in landmarks),
        path=tuple(path),
    )
    return hmap, mark_junctions(build(hmap, node_interval=interval))


class TestRenderSvap:
    def test_disc_count_and_dimensions(self):
        hmap, topo = make_topo()
        pruned = prune(topo, topo.start_id, "none")
        view = np.full((100, 150, 3), 200, dtype=np.uint8)
        svap = render_svap(view, hmap.drawing, pruned)
        assert svap.raster.shape[1] == 150 + hmap.drawing.shape[1]
        assert len(svap.candidate_ids) == len(pruned.robot_nodes)
        # a purple disc sits at each retained node, none at dropped nodes
        def disc_pixels(node):
            x, y = int(node.position[0]) + 150, int(node.position[1])
            region = svap.raster[max(y - 9, 0):y + 10, max(x - 9, 0):x + 10]
            return int((np.all(region == NODE_COLOR, axis=2)).sum())

        for node in pruned.robot_nodes:
            assert disc_pixels(node) > 20
        dropped = [n for n in topo.robot_nodes
                   if n.id not in {m.id for m in pruned.robot_nodes}]
        for node in dropped[2:]:  # away from edges drawn near kept nodes
            assert disc_pixels(node) == 0

    def test_deterministic(self):
        hmap, topo = make_topo(landmarks=[("sofa", (60, 110))])
        pruned = prune(topo, topo.start_id, "none")
        view = np.full((80, 80, 3), 250, dtype=np.uint8)
        a = render_svap(view, hmap.drawing, pruned)
        b = render_svap(view, hmap.drawing, pruned)
        assert (a.raster == b.raster).all()

    def test_unpruned_map_renders_all_nodes(self):
        hmap, topo = make_topo()
        full = prune(topo, topo.start_id, "none", bypass=True)
        svap = render_svap(np.zeros((50, 50, 3), np.uint8), hmap.drawing, full)
        assert set(svap.candidate_ids) == {n.id for n in topo.robot_nodes}

    def test_empty_candidates_rejected(self):
        hmap, topo = make_topo()
        empty = type(topo)(robot_nodes=(), landmark_nodes=(), edges=())
        with pytest.raises(errors.EmptyCandidateSet):
            render_svap(np.zeros((10, 10, 3), np.uint8), hmap.drawing, empty)

    def test_inputs_not_mutated(self):
        hmap, topo = make_topo()
        view = np.zeros((40, 40, 3), np.uint8)
        drawing_before = hmap.drawing.copy()
        render_svap(view, hmap.drawing, prune(topo, topo.start_id, "none"))
        assert (hmap.drawing == drawing_before).all()
        assert (view == 0).all()


class TestGeneratePlan:
    def test_single_segment_with_box(self):
        _, topo = make_topo(path=((0, 50), (100, 50)), landmarks=[("box", (80, 45))])
        plan = generate_plan(topo)
        assert plan.sentences == (
            "Move forward pass the box, and stop when you see box.",)

    def test_left_junction_sentence(self):
        _, topo = make_topo(path=((20, 100), (120, 100), (120, 20)),
                            landmarks=[("bookshelf", (115, 95))])
        plan = generate_plan(topo)
        assert plan.sentences[0].endswith("turn left when you see bookshelf.")

    def test_predicted_marker(self):
        _, topo = make_topo(path=((0, 50), (100, 50)))
        topo = integrate_predictions(topo, {topo.goal_id: ["chair"]})
        plan = generate_plan(topo)
        assert "chair (expected)" in plan.full_text

    def test_sentence_count_equals_segments(self):
        _, topo = make_topo(path=((20, 180), (120, 180), (120, 60), (280, 60)),
                            interval=20)
        plan = generate_plan(topo)
        assert len(plan.sentences) == len(segment_by_junctions(topo))

    def test_every_drawn_label_in_exactly_one_sentence(self):
        labels = [("sofa", (40, 95)), ("bookshelf", (100, 90)), ("door", (115, 30))]
        _, topo = make_topo(landmarks=labels)
        plan = generate_plan(topo)
        for label, _ in labels:
            count = sum(label in sentence for sentence in plan.sentences)
            assert count == 1, f"{label} appears in {count} sentences"

    def test_empty_segment_reads_open_area(self):
        _, topo = make_topo(path=((0, 50), (100, 50)))
        plan = generate_plan(topo)
        assert "pass the open area" in plan.sentences[0]


class TestPromptPackets:
    def test_candidates_enumerated(self):
        _, topo = make_topo()
        plan = generate_plan(topo)
        packet = build_localization_prompt("sd", 2, "move forward", plan, [2, 3])
        assert "2, 3" in packet.user_text
        assert packet.expected_schema == "localization"

    def test_no_previous_action_at_t0(self):
        _, topo = make_topo()
        plan = generate_plan(topo)
        packet = build_localization_prompt("sd", None, "none", plan, [1])
        assert "no previous action" in packet.user_text
        assert "unknown" in packet.user_text

    def test_empty_candidates_rejected(self):
        _, topo = make_topo()
        plan = generate_plan(topo)
        with pytest.raises(errors.EmptyCandidateSet):
            build_localization_prompt("sd", 1, "none", plan, [])

    def test_action_packet_enumerates_legal_actions(self):
        _, topo = make_topo()
        plan = generate_plan(topo)
        packet = build_action_prompt("sd", 2, "move forward", plan, 3)
        for action in ("move forward", "turn left", "turn right", "stop"):
            assert action in packet.user_text
        assert packet.expected_schema == "action"

    def _golden_pair(self, name):
        return (GOLDEN / name).read_text().split("\n=====\n")

    def test_localization_golden_file(self):
        hmap, topo = make_topo(landmarks=[
            ("sofa", (60, 100)), ("bookshelf", (100, 90)), ("door", (110, 30))])
        plan = generate_plan(topo)
        exp = {"step": 2, "scene_description": "You see: sofa on your left.",
               "position": 3, "action": "move forward"}
        packet = build_localization_prompt("You see: bookshelf on your front.", 3,
                                           "move forward", plan, [2, 3, 4],
                                           experience_summary=exp)
        system, user = self._golden_pair("localization_prompt.txt")
        assert packet.system_text == system
        assert packet.user_text == user

    def test_localization_golden_t0(self):
        hmap, topo = make_topo(landmarks=[
            ("sofa", (60, 100)), ("bookshelf", (100, 90)), ("door", (110, 30))])
        plan = generate_plan(topo)
        packet = build_localization_prompt("You see nothing notable.", None, "none",
                                           plan, [1, 2])
        system, user = self._golden_pair("localization_prompt_t0.txt")
        assert packet.system_text == system
        assert packet.user_text == user

    def test_action_golden_file(self):
        hmap, topo = make_topo(landmarks=[
            ("sofa", (60, 100)), ("bookshelf", (100, 90)), ("door", (110, 30))])
        plan = generate_plan(topo)
        exp = {"step": 2, "scene_description": "You see: sofa on your left.",
               "position": 3, "action": "move forward"}
        packet = build_action_prompt("You see: bookshelf on your front.", 3,
                                     "move forward", plan, 4, experience_summary=exp)
        system, user = self._golden_pair("action_prompt.txt")
        assert packet.system_text == system
        assert packet.user_text == user


WRAPPERS = [
    "Sure! Here are my scores:\n{block}\nLet me know if you need more.",
    "Reasoning: the bookshelf matches node 3.\n```scores\n{payload}\n```\nDone.",
    "{block}",
    "I think...\n\n```json\n{payload}\n```",
    "Answer below.\n{block}\ntrailing chatter " + "x" * 50,
]


class TestParseScoredResponse:
    def test_simple_argmax(self):
        r = parse_scored_response('{"2": 0.7, "3": 0.3}', [2, 3])
        assert r.chosen == 2
        assert r.scores[2] == pytest.approx(0.7)

    def test_tie_breaks_to_lowest_id(self):
        r = parse_scored_response('{"2": 0.5, "3": 0.5}', [2, 3])
        assert r.chosen == 2

    def test_action_tie_breaks_in_canonical_order(self):
        actions = ["move forward", "turn left", "turn right", "stop"]
        r = parse_scored_response(json.dumps({a: 0.25 for a in actions}), actions)
        assert r.chosen == "move forward"

    def test_wrapped_variants_match_bare_block(self):
        rng = random.Random(1234)
        legal = [2, 3, 5]
        for i in range(1000):
            raw = {str(k): round(rng.random(), 3) for k in legal}
            if sum(raw.values()) == 0:
                raw["2"] = 0.5
            payload = json.dumps(raw)
            block = f"```scores\n{payload}\n```"
            wrapper = rng.choice(WRAPPERS)
            text = wrapper.format(block=block, payload=payload)
            bare = parse_scored_response(payload, legal)
            wrapped = parse_scored_response(text, legal)
            assert wrapped.chosen == bare.chosen
            assert wrapped.scores == pytest.approx(bare.scores)

    def test_unknown_keys_dropped_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            r = parse_scored_response('{"2": 0.6, "9": 0.4}', [2, 3])
        assert r.chosen == 2
        assert r.scores[3] == 0.0
        assert "9" in caplog.text

    def test_unparseable(self):
        with pytest.raises(errors.Unparseable):
            parse_scored_response("no scores here at all", [1, 2])

    def test_all_zero(self):
        with pytest.raises(errors.AllZero):
            parse_scored_response('{"1": 0, "2": 0.0}', [1, 2])

    def test_negative_scores_clamped(self):
        r = parse_scored_response('{"1": -0.4, "2": 0.8}', [1, 2])
        assert r.chosen == 2
        assert r.scores[1] == 0.0

    def test_python_style_dict_tolerated(self):
        r = parse_scored_response("{'move forward': 0.9, 'stop': 0.1}",
                                  ["move forward", "turn left", "turn right", "stop"])
        assert r.chosen == "move forward"

    def test_round_trip_recovers_argmax(self):
        rng = random.Random(7)
        legal = [1, 2, 3, 4]
        for _ in range(200):
            scores = {k: rng.random() for k in legal}
            r = parse_scored_response(render_scores(scores), legal)
            best = max(legal, key=lambda k: (scores[k], -legal.index(k)))
            assert r.chosen == best

    @given(st.dictionaries(st.sampled_from([1, 2, 3]), st.floats(0.001, 1.0),
                           min_size=3, max_size=3),
           st.floats(0.01, 100))
    def test_argmax_invariant_under_positive_scaling(self, scores, scale):
        legal = [1, 2, 3]
        base = parse_scored_response(json.dumps({str(k): v for k, v in scores.items()}), legal)
        scaled = parse_scored_response(
            json.dumps({str(k): v * scale for k, v in scores.items()}), legal)
        assert base.chosen == scaled.chosen

    def test_scores_renormalized(self):
        r = parse_scored_response('{"1": 2.0, "2": 2.0}', [1, 2])
        assert sum(r.scores.values()) == pytest.approx(1.0)
