import math
import random

import pytest

from procdep import (
    ChangeKind,
    ConfigError,
    ConstantEdgeScorer,
    DecoderConfig,
    EdgeCandidate,
    Entity,
    ExistenceState,
    FileLogitProvider,
    LogitsRecord,
    ProcessRecord,
    StateChange,
    StateChangeMatrix,
    TooLarge,
    TopicPriorTable,
    connectivity_score,
    decode,
    edge_prior_score,
    exhaustive_decode,
    purpose_score,
    score_matrix,
    state_change_score,
    step_candidates,
    step_score,
    validate_matrix,
)
from procdep.decoding import BeamEntry, initial_entry
from procdep.providers import logits_key

from conftest import make_random_priors, make_random_process, make_random_provider

C, M, X, N = ChangeKind.CREATE, ChangeKind.MOVE, ChangeKind.DESTROY, ChangeKind.NONE


def provider_from_probs(process, probs_by_step):
    """probs_by_step: {step: {entity_name: (pC, pM, pD, pN)}}."""
    lookup = {}
    for step, by_entity in probs_by_step.items():
        for name, probs in by_entity.items():
            lookup[logits_key(process.id, step, name)] = LogitsRecord(
                process.id, step, name, tuple(math.log(p) for p in probs)
            )
    return FileLogitProvider(lookup)


def _rec(probs, entity="e"):
    return LogitsRecord("p", 1, entity, tuple(math.log(p) for p in probs))


class TestScoringArithmetic:
    def test_state_score_logits_only(self):
        rec = _rec((0.1, 0.7, 0.1, 0.1))
        assert state_change_score([rec], None, "t", (M,), 1.0) == pytest.approx(
            math.log(0.7), abs=1e-12
        )

    def test_state_score_prior_only(self):
        rec = _rec((0.1, 0.7, 0.1, 0.1), "water")
        priors = TopicPriorTable({("photosynthesis", "water", M): 0.8})
        got = state_change_score([rec], priors, "photosynthesis", (M,), 0.0)
        assert got == pytest.approx(math.log(0.8), abs=1e-12)

    def test_state_score_blend(self):
        rec = _rec((0.1, 0.7, 0.1, 0.1), "water")
        priors = TopicPriorTable({("photosynthesis", "water", M): 0.8})
        got = state_change_score([rec], priors, "photosynthesis", (M,), 0.8)
        assert got == pytest.approx(0.8 * math.log(0.7) + 0.2 * math.log(0.8), abs=1e-12)
        assert got == pytest.approx(-0.3300, abs=5e-5)

    def test_purpose_score_cases(self):
        assert purpose_score(C, True, 0.5) == 0.5
        assert purpose_score(M, False, 0.5) == 0.0
        assert purpose_score(N, True, 0.5) == -0.5
        assert purpose_score(N, False, 0.5) == 0.0

    def test_connectivity_two_edges(self):
        got = connectivity_score((C, M), (True, True), 0.5)
        assert got == pytest.approx(2 * math.log(1.5), abs=1e-12)
        assert got == pytest.approx(0.8109, abs=5e-5)

    def test_connectivity_no_later_mentions(self):
        assert connectivity_score((C, M, N), (False, False, False), 0.5) == 0.0

    def test_connectivity_penalty(self):
        got = connectivity_score((N,), (True,), 0.5)
        assert got == pytest.approx(math.log(0.5), abs=1e-12)
        assert got == pytest.approx(-0.6931, abs=5e-5)

    def test_edge_prior_empty(self):
        assert edge_prior_score((), ConstantEdgeScorer(0.9)) == 0.0

    def test_edge_prior_single(self):
        edge = EdgeCandidate("p", 1, 2, "e", M)
        got = edge_prior_score((edge,), ConstantEdgeScorer(0.9))
        assert got == pytest.approx(math.log(1.9), abs=1e-12)
        assert got == pytest.approx(0.6419, abs=5e-5)

    def test_edge_prior_two_defaults(self):
        edges = (EdgeCandidate("p", 1, 2, "e", M), EdgeCandidate("p", 1, 3, "f", C))
        assert edge_prior_score(edges, ConstantEdgeScorer()) == pytest.approx(
            2 * math.log(1.5), abs=1e-12
        )

    def test_step_score_weights(self):
        assert step_score(-2.0, 9.0, 9.0, 1.0, 0.8) == -2.0
        assert step_score(-2.0, 3.0, 9.0, 0.0, 1.0) == 3.0
        got = step_score(-0.33, 0.8109, 0.6419, 0.5, 0.8)
        assert got == pytest.approx(
            0.5 * -0.33 + 0.5 * (0.8 * 0.8109 + 0.2 * 0.6419), abs=1e-12
        )
        assert got == pytest.approx(0.2236, abs=1e-4)

    def test_step_score_linear_in_terms(self):
        rng = random.Random(11)
        for _ in range(50):
            f1, g1, k1 = (rng.uniform(-3, 3) for _ in range(3))
            f2, g2, k2 = (rng.uniform(-3, 3) for _ in range(3))
            a = rng.random()
            lam, beta = rng.random(), rng.random()
            left = step_score(
                a * f1 + (1 - a) * f2,
                a * g1 + (1 - a) * g2,
                a * k1 + (1 - a) * k2,
                lam,
                beta,
            )
            right = a * step_score(f1, g1, k1, lam, beta) + (1 - a) * step_score(
                f2, g2, k2, lam, beta
            )
            assert left == pytest.approx(right, abs=1e-9)


class TestStepCandidates:
    def _process(self):
        return ProcessRecord(
            "p", "t", ("The a and b sit.", "They sit."), (Entity("a"), Entity("b"))
        )

    def test_destroyed_entity_limited_to_create_or_none(self):
        p = ProcessRecord("p", "t", ("a.", "a."), (Entity("a"),))
        provider = provider_from_probs(p, {2: {"a": (0.25, 0.25, 0.25, 0.25)}})
        entry = BeamEntry(((X,),), (ExistenceState.DESTROYED,), 0.0)
        result = step_candidates(p, 2, entry, provider, DecoderConfig())
        assert set(result) == {(C,), (N,)}

    def test_unconstrained_pair_yields_sixteen(self):
        p = self._process()
        provider = provider_from_probs(
            p, {1: {"a": (0.25,) * 4, "b": (0.25,) * 4}}
        )
        result = step_candidates(p, 1, initial_entry(p), provider, DecoderConfig())
        assert len(result) == 16

    def test_cap_keeps_best_by_state_score(self):
        # Hand-sorted: products of pa x pb, ties broken by the kind encoding.
        p = self._process()
        provider = provider_from_probs(
            p, {1: {"a": (0.4, 0.3, 0.2, 0.1), "b": (0.1, 0.2, 0.3, 0.4)}}
        )
        config = DecoderConfig(candidate_cap=4)
        result = step_candidates(p, 1, initial_entry(p), provider, config)
        assert result == [(C, N), (C, X), (M, N), (M, X)]

    def test_never_empty_even_with_tight_cap(self):
        p = self._process()
        provider = provider_from_probs(
            p, {1: {"a": (0.25,) * 4, "b": (0.25,) * 4}}
        )
        result = step_candidates(p, 1, initial_entry(p), provider, DecoderConfig(candidate_cap=1))
        assert len(result) == 1


def _kind_rows(result):
    return [tuple(cell.kind for cell in row) for row in result.matrix.cells]


class TestDecode:
    def test_reduces_to_constrained_argmax(self):
        # By hand over all consistent 2-step paths: (D, M) would win but is
        # inconsistent, so (D, C) at 0.7 * 0.2 takes it.
        p = ProcessRecord("p", "t", ("a.", "a."), (Entity("a"),))
        provider = provider_from_probs(
            p,
            {
                1: {"a": (0.1, 0.1, 0.7, 0.1)},
                2: {"a": (0.2, 0.6, 0.1, 0.1)},
            },
        )
        config = DecoderConfig(state_weight=1.0, logit_weight=1.0, beam_width=64)
        result = decode(p, provider, config=config)
        assert _kind_rows(result) == [(X,), (C,)]

    def test_tied_fixture_prefers_move_when_graph_counts(
        self, water_cycle_tied, water_logits, edge_table
    ):
        provider = FileLogitProvider(water_logits)
        half = decode(water_cycle_tied, provider, None, edge_table, DecoderConfig())
        assert _kind_rows(half)[1] == (M,)
        one = decode(
            water_cycle_tied, provider, None, edge_table, DecoderConfig(state_weight=1.0)
        )
        assert _kind_rows(one)[1] == (M,)  # exact tie, settled by the encoding

    def test_tied_fixture_tie_is_exact_at_state_only(
        self, water_cycle_tied, water_logits, edge_table
    ):
        provider = FileLogitProvider(water_logits)
        move_rows = [
            [StateChange(M)] if t in (1, 2) else [StateChange(N)] for t in range(1, 6)
        ]
        destroy_rows = [list(r) for r in move_rows]
        destroy_rows[1] = [StateChange(X)]
        cfg = DecoderConfig(state_weight=1.0)
        s_move = score_matrix(
            water_cycle_tied, StateChangeMatrix.from_rows(move_rows), provider, None,
            edge_table, cfg,
        )
        s_destroy = score_matrix(
            water_cycle_tied, StateChangeMatrix.from_rows(destroy_rows), provider, None,
            edge_table, cfg,
        )
        assert s_move == pytest.approx(s_destroy, abs=1e-12)

    def test_near_fixture_flips_with_lambda(
        self, water_cycle_near, water_logits, edge_table
    ):
        provider = FileLogitProvider(water_logits)
        half = decode(water_cycle_near, provider, None, edge_table, DecoderConfig())
        one = decode(
            water_cycle_near, provider, None, edge_table, DecoderConfig(state_weight=1.0)
        )
        assert _kind_rows(half)[1] == (M,)
        assert _kind_rows(one)[1] == (X,)
        # the two runs differ exactly on that one assignment
        assert _kind_rows(half)[:1] + _kind_rows(half)[2:] == (
            _kind_rows(one)[:1] + _kind_rows(one)[2:]
        )

    def test_all_none_forced(self):
        p = ProcessRecord("p", "t", ("a b.", "a b."), (Entity("a"), Entity("b")))
        eps = 0.02
        probs = (eps, eps, eps, 1 - 3 * eps)
        provider = provider_from_probs(
            p, {1: {"a": probs, "b": probs}, 2: {"a": probs, "b": probs}}
        )
        result = decode(p, provider, config=DecoderConfig(state_weight=1.0))
        assert _kind_rows(result) == [(N, N), (N, N)]
        assert len(result.graph) == 0

    def test_state_only_is_invariant_to_graph_knobs(self, water_cycle_near, water_logits, edge_table):
        provider = FileLogitProvider(water_logits)
        base = decode(
            water_cycle_near, provider, None, None, DecoderConfig(state_weight=1.0)
        )
        for scorer in (ConstantEdgeScorer(0.99), edge_table):
            for bonus in (0.1, 0.9):
                other = decode(
                    water_cycle_near, provider, None, scorer,
                    DecoderConfig(state_weight=1.0, purpose_bonus=bonus),
                )
                assert other.matrix == base.matrix
                assert other.score == pytest.approx(base.score, abs=1e-12)

    def test_purpose_bias_breaks_state_tie(self):
        # Move and None tie under the state term; only Move gains an edge.
        p = ProcessRecord("p", "t", ("The rock falls.", "The rock stops."), (Entity("rock"),))
        provider = provider_from_probs(
            p,
            {
                1: {"rock": (0.05, 0.45, 0.05, 0.45)},
                2: {"rock": (0.02, 0.02, 0.02, 0.94)},
            },
        )
        result = decode(p, provider, config=DecoderConfig())
        assert _kind_rows(result)[0] == (M,)
        move = StateChangeMatrix.from_rows([[StateChange(M)], [StateChange(N)]])
        stay = StateChangeMatrix.from_rows([[StateChange(N)], [StateChange(N)]])
        cfg_state = DecoderConfig(state_weight=1.0)
        assert score_matrix(p, move, provider, config=cfg_state) == pytest.approx(
            score_matrix(p, stay, provider, config=cfg_state), abs=1e-12
        )
        cfg = DecoderConfig()
        assert score_matrix(p, move, provider, config=cfg) > score_matrix(
            p, stay, provider, config=cfg
        )

    def test_ablation_of_both_graph_terms_equals_state_only(self, micro_corpus):
        from procdep import LexicalLogitProvider, load_edge_table, load_prior_table

        from conftest import data_path

        priors = load_prior_table(data_path("priors.tsv"))
        edges = load_edge_table(data_path("edge_scores.tsv"))
        provider = LexicalLogitProvider()
        for p in micro_corpus.processes:
            blind = decode(
                p, provider, priors, edges, DecoderConfig(),
                use_connectivity=False, use_edge_prior=False,
            )
            state_only = decode(p, provider, priors, edges, DecoderConfig(state_weight=1.0))
            assert blind.matrix == state_only.matrix

    def test_determinism(self, water_cycle_tied, water_logits, edge_table):
        provider = FileLogitProvider(water_logits)
        results = [
            decode(water_cycle_tied, provider, None, edge_table, DecoderConfig())
            for _ in range(3)
        ]
        assert results[0] == results[1] == results[2]

    def test_invalid_config_rejected(self):
        p = ProcessRecord("p", "t", ("a.",), (Entity("a"),))
        provider = provider_from_probs(p, {1: {"a": (0.25,) * 4}})
        for bad in (
            DecoderConfig(state_weight=1.5),
            DecoderConfig(logit_weight=-0.1),
            DecoderConfig(purpose_bonus=0.0),
            DecoderConfig(purpose_bonus=1.0),
            DecoderConfig(beam_width=0),
            DecoderConfig(candidate_cap=0),
        ):
            with pytest.raises(ConfigError):
                decode(p, provider, config=bad)


class TestExhaustive:
    def test_single_cell_create(self):
        p = ProcessRecord("p", "t", ("a.",), (Entity("a"),))
        provider = provider_from_probs(p, {1: {"a": (0.7, 0.1, 0.1, 0.1)}})
        result = exhaustive_decode(p, provider, config=DecoderConfig(state_weight=1.0))
        assert _kind_rows(result) == [(C,)]

    def test_too_large_guard(self):
        p = make_random_process(random.Random(0), 3, 4)
        provider = make_random_provider(random.Random(1), p)
        with pytest.raises(TooLarge):
            exhaustive_decode(p, provider)

    def test_matches_wide_beam_decode(self):
        rng = random.Random(2024)
        config = DecoderConfig(beam_width=4096)
        for _ in range(20):
            p = make_random_process(rng, 3, 2)
            provider = make_random_provider(rng, p)
            priors = make_random_priors(rng, p)
            beam = decode(p, provider, priors, None, config)
            brute = exhaustive_decode(p, provider, priors, None, config)
            assert beam.matrix == brute.matrix
            assert beam.score == pytest.approx(brute.score, abs=1e-9)


class TestConsistencyFuzz:
    def test_decoded_matrices_always_validate(self):
        rng = random.Random(4040)
        for _ in range(100):
            p = make_random_process(rng, rng.randint(1, 4), rng.randint(1, 3))
            provider = make_random_provider(rng, p)
            config = DecoderConfig(beam_width=rng.choice((1, 4, 20)))
            result = decode(p, provider, config=config)
            assert validate_matrix(p, result.matrix) == []

    def test_candidates_always_consistent(self):
        from procdep import apply_change

        rng = random.Random(4141)
        for _ in range(50):
            p = make_random_process(rng, rng.randint(2, 4), rng.randint(1, 3))
            provider = make_random_provider(rng, p)
            entry = initial_entry(p)
            for step in range(1, p.num_steps + 1):
                cands = step_candidates(p, step, entry, provider, DecoderConfig())
                for assignment in cands:
                    for state, kind in zip(entry.existence, assignment):
                        apply_change(state, kind)  # must not raise
                chosen = rng.choice(cands)
                entry = BeamEntry(
                    entry.assignments + (chosen,),
                    tuple(apply_change(s, k) for s, k in zip(entry.existence, chosen)),
                    0.0,
                )
