import random

import pytest

from procdep import (
    ChangeKind,
    DependencyEdge,
    DependencyGraph,
    Entity,
    InvalidMatrix,
    ProcessMismatch,
    ProcessRecord,
    StateChange,
    StateChangeMatrix,
    dependency_metrics,
    f1,
    statechange_metrics,
    statechange_questions,
)
from procdep.corpus import parse_cell

C, M, X, N = ChangeKind.CREATE, ChangeKind.MOVE, ChangeKind.DESTROY, ChangeKind.NONE


def graph(*edges):
    return DependencyGraph.from_edges(
        DependencyEdge(src, dst, entity, StateChange(kind)) for src, dst, entity, kind in edges
    )


class TestF1:
    def test_table_row_arithmetic(self):
        assert f1(62.0, 32.9) == pytest.approx(43.0, abs=0.05)
        assert f1(76.3, 21.3) == pytest.approx(33.3, abs=0.1)

    def test_identities(self):
        assert f1(1.0, 1.0) == 1.0
        assert f1(0.0, 0.0) == 0.0
        for p in (0.0, 0.3, 0.5, 1.0):
            assert f1(p, p) == pytest.approx(p)

    def test_bounded_by_arithmetic_mean(self):
        rng = random.Random(3)
        for _ in range(200):
            p, r = rng.random(), rng.random()
            assert f1(p, r) <= (p + r) / 2 + 1e-12


class TestDependencyMetrics:
    def test_perfect_prediction(self):
        g = {"p": graph((1, 2, "water", M), (2, 4, "water", M))}
        report = dependency_metrics(g, g)
        assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)

    def test_disjoint_prediction(self):
        pred = {"p": graph((1, 3, "rock", C))}
        gold = {"p": graph((2, 4, "water", M))}
        report = dependency_metrics(pred, gold)
        assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)

    def test_wrong_kind_keeps_target_and_entity(self):
        pred = {"p": graph((2, 4, "water", C))}
        gold = {"p": graph((2, 4, "water", M))}
        report = dependency_metrics(pred, gold)
        assert report.counts.matched == 2
        assert report.counts.predicted == 3 and report.counts.gold == 3
        assert report.precision == pytest.approx(2 / 3)
        assert report.f1 == pytest.approx(2 / 3)

    def test_hand_counted_partial_fixture(self, photosynthesis):
        # Hand count: targets 4 of 5 match, entities 4 of 5, changes 3 of 5.
        gold = {"photosynthesis-1": photosynthesis.gold_graph}
        pred = {
            "photosynthesis-1": graph(
                (1, 2, "water", M),
                (3, 4, "light", M),
                (4, 5, "mixture", C),
                (2, 4, "water", C),   # wrong kind
                (3, 5, "CO2", M),     # wrong target
            )
        }
        report = dependency_metrics(pred, gold)
        assert report.counts.matched == 11
        assert report.counts.predicted == 15
        assert report.counts.gold == 15
        assert report.per_category["target"].matched == 4
        assert report.per_category["entity"].matched == 4
        assert report.per_category["change"].matched == 3

    def test_element_count_is_three_per_edge(self):
        rng = random.Random(12)
        for _ in range(30):
            edges = {
                (rng.randint(1, 3), rng.randint(4, 6), rng.choice(("a", "b")))
                for _ in range(rng.randint(0, 5))
            }
            g = graph(*((s, d, e, M) for s, d, e in edges))
            report = dependency_metrics({"p": g}, {"p": g})
            assert report.counts.predicted == 3 * len(g)
            assert report.counts.gold == 3 * len(g)

    def test_swap_exchanges_precision_and_recall(self):
        pred = {"p": graph((1, 2, "a", M), (2, 4, "a", C))}
        gold = {"p": graph((1, 2, "a", M), (1, 3, "b", X), (3, 4, "a", M))}
        fwd = dependency_metrics(pred, gold)
        rev = dependency_metrics(gold, pred)
        assert fwd.precision == pytest.approx(rev.recall)
        assert fwd.recall == pytest.approx(rev.precision)

    def test_process_mismatch(self):
        with pytest.raises(ProcessMismatch):
            dependency_metrics({"p": graph()}, {"q": graph()})

    def test_macro_averaging(self):
        pred = {"a": graph((1, 2, "x", M)), "b": graph((1, 2, "x", M))}
        gold = {"a": graph((1, 2, "x", M)), "b": graph((1, 3, "x", M))}
        micro = dependency_metrics(pred, gold, "micro")
        macro = dependency_metrics(pred, gold, "macro")
        assert micro.precision == pytest.approx(0.5)
        assert macro.precision == pytest.approx(0.5)  # mean of 1.0 and 0.0
        assert macro.average == "macro"


def _matrix(cells):
    return StateChangeMatrix.from_rows(
        tuple(tuple(parse_cell(c) for c in row) for row in cells)
    )


class TestStatechangeQuestions:
    def test_fig2_fixture(self, photosynthesis):
        qs = statechange_questions(photosynthesis, photosynthesis.gold_matrix)
        assert qs.inputs == frozenset({"water", "light", "CO2"})
        assert qs.outputs == frozenset({"sugar"})
        assert (frozenset({"mixture"}), frozenset({"sugar"}), 5) in qs.conversions
        assert (frozenset({"water", "light", "CO2"}), frozenset({"mixture"}), 4) in qs.conversions
        assert len(qs.conversions) == 2
        assert qs.movements == frozenset(
            {
                ("water", "soil", "root", 1),
                ("water", "root", "leaf", 2),
                ("light", "sun", "leaf", 3),
                ("CO2", "air", "leaf", 3),
            }
        )

    def test_created_then_destroyed_is_not_an_output(self, photosynthesis):
        qs = statechange_questions(photosynthesis, photosynthesis.gold_matrix)
        assert "mixture" not in qs.outputs

    def test_all_none(self):
        p = ProcessRecord("p", "t", ("A.",), (Entity("x"),))
        qs = statechange_questions(p, _matrix([["-"]]))
        assert qs == type(qs)()

    def test_single_move(self):
        p = ProcessRecord("p", "t", ("A.",), (Entity("water"),))
        qs = statechange_questions(p, _matrix([["M soil→root"]]))
        assert qs.movements == frozenset({("water", "soil", "root", 1)})
        assert not qs.inputs and not qs.outputs and not qs.conversions

    def test_invalid_matrix_rejected(self):
        p = ProcessRecord("p", "t", ("A.", "B."), (Entity("x"),))
        with pytest.raises(InvalidMatrix):
            statechange_questions(p, _matrix([["C"], ["C"]]))

    def test_depends_only_on_matrix(self):
        matrix = _matrix([["D"], ["C"]])
        a = ProcessRecord("p", "t", ("Alpha.", "Beta."), (Entity("x"),))
        b = ProcessRecord("p", "t", ("Totally different x.", "Other x."), (Entity("x"),))
        assert statechange_questions(a, matrix) == statechange_questions(b, matrix)


class TestStatechangeMetrics:
    def test_perfect_prediction(self, photosynthesis):
        qs = statechange_questions(photosynthesis, photosynthesis.gold_matrix)
        report = statechange_metrics({"p": qs}, {"p": qs})
        assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)

    def test_wildcard_location_matches(self):
        p = ProcessRecord("p", "t", ("A.",), (Entity("water"),))
        pred = statechange_questions(p, _matrix([["M ?→root"]]))
        gold = statechange_questions(p, _matrix([["M soil→root"]]))
        report = statechange_metrics({"p": pred}, {"p": gold})
        assert report.counts.matched == 1
        assert report.f1 == 1.0

    def test_absent_location_matches_too(self):
        p = ProcessRecord("p", "t", ("A.",), (Entity("water"),))
        pred = statechange_questions(p, _matrix([["M"]]))
        gold = statechange_questions(p, _matrix([["M soil→root"]]))
        assert statechange_metrics({"p": pred}, {"p": gold}).counts.matched == 1

    def test_empty_pred_vs_nonempty_gold(self, photosynthesis):
        empty = statechange_questions(
            photosynthesis,
            _matrix([["-"] * 5 for _ in range(5)]),
        )
        gold = statechange_questions(photosynthesis, photosynthesis.gold_matrix)
        report = statechange_metrics({"p": empty}, {"p": gold})
        assert report.counts.matched == 0
        assert report.counts.predicted == 0
        assert report.counts.gold == 10
        assert report.precision == 0.0 and report.recall == 0.0

    def test_hand_counted_partial_fixture(self, photosynthesis):
        # Pred tweaks: light not destroyed, CO2 origin renamed, one "?" leg.
        # Hand count: inputs 2/2/3, outputs 1/1/1, conversions 1/2/2,
        # movements 3/4/4 -> totals 7/9/10.
        pred_matrix = _matrix(
            [
                ["M soil→root", "-", "-", "-", "-"],
                ["M root→?", "-", "-", "-", "-"],
                ["-", "M sun→leaf", "M atmosphere→leaf", "-", "-"],
                ["D", "-", "D", "C →leaf", "-"],
                ["-", "-", "-", "D", "C"],
            ]
        )
        pred = statechange_questions(photosynthesis, pred_matrix)
        gold = statechange_questions(photosynthesis, photosynthesis.gold_matrix)
        report = statechange_metrics({"p": pred}, {"p": gold})
        assert report.counts.matched == 7
        assert report.counts.predicted == 9
        assert report.counts.gold == 10
        assert report.per_category["inputs"].matched == 2
        assert report.per_category["outputs"].matched == 1
        assert report.per_category["conversions"].matched == 1
        assert report.per_category["movements"].matched == 3
        assert report.precision == pytest.approx(7 / 9)
        assert report.recall == pytest.approx(7 / 10)
        assert report.f1 == pytest.approx(98 / 133)

    def test_swap_exchanges_precision_and_recall(self, photosynthesis):
        pred_matrix = _matrix(
            [
                ["M soil→root", "-", "-", "-", "-"],
                ["-", "-", "-", "-", "-"],
                ["-", "M sun→leaf", "-", "-", "-"],
                ["D", "D", "D", "C →leaf", "-"],
                ["-", "-", "-", "-", "C"],
            ]
        )
        pred = statechange_questions(photosynthesis, pred_matrix)
        gold = statechange_questions(photosynthesis, photosynthesis.gold_matrix)
        fwd = statechange_metrics({"p": pred}, {"p": gold})
        rev = statechange_metrics({"p": gold}, {"p": pred})
        assert fwd.precision == pytest.approx(rev.recall)
        assert fwd.recall == pytest.approx(rev.precision)

    def test_process_mismatch(self):
        from procdep import QuestionSet

        with pytest.raises(ProcessMismatch):
            statechange_metrics({"p": QuestionSet()}, {"q": QuestionSet()})
