"""End-to-end engine tests: config validation, cycle invariants, features,
the scenario library, and the randomized scan machinery."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from szilard import (
    SCAN_FAMILIES,
    SCENARIO_NAMES,
    ConstructionError,
    DensityMatrix,
    EngineConfig,
    FeedbackScheme,
    GenericWeight,
    HardAssertionError,
    Instrument,
    Observable,
    Operator,
    PureState,
    ReservoirSpec,
    SizeError,
    ThermoContext,
    Transition,
    basis_state,
    build_oscillator_weight,
    build_shift_unitary,
    build_transition_model,
    compose_feedback_unitary,
    evaluate_features,
    impossibility_scan,
    objectification_order_gap,
    projector_onto,
    run_cycle,
    scenario_library,
    thermal_state,
    von_neumann_entropy,
    work_threshold,
)

from _oracles import harvest_works


def _swapped_post_model(h_s_gap: float = 1.0):
    """Qubit model whose posts exchange the energy eigenstates.

    Built without Hamiltonians, so the generic completion exists but cannot
    conserve energy against a nondegenerate system Hamiltonian.
    """
    target = Observable(
        (
            ("+", h_s_gap / 2, Operator(np.diag([1.0, 0.0]))),
            ("-", -h_s_gap / 2, Operator(np.diag([0.0, 1.0]))),
        )
    )
    pointer = Observable(
        (
            ("+", 1.0, Operator(np.diag([1.0, 0.0]))),
            ("-", -1.0, Operator(np.diag([0.0, 1.0]))),
        )
    )
    transitions = (
        Transition("+", PureState(basis_state(2, 0)), PureState(basis_state(2, 1)),
                   PureState(basis_state(2, 0))),
        Transition("-", PureState(basis_state(2, 1)), PureState(basis_state(2, 0)),
                   PureState(basis_state(2, 1))),
    )
    return build_transition_model(
        target, pointer, PureState(basis_state(2, 0)), transitions
    )


class TestEngineConfigValidation:
    def test_system_state_hamiltonian_mismatch(self):
        cfg = scenario_library("example_I")
        with pytest.raises(ValueError, match="dimensions differ"):
            dataclasses.replace(
                cfg, rho_s=DensityMatrix(np.eye(3) / 3)
            )

    def test_degenerate_flag_must_match_target(self):
        cfg = scenario_library("example_I")
        with pytest.raises(ValueError, match="degenerate_target"):
            dataclasses.replace(cfg, degenerate_target=True)

    def test_demon_hamiltonian_dimension(self):
        cfg = scenario_library("example_I")
        with pytest.raises(ValueError, match="demon Hamiltonian"):
            dataclasses.replace(cfg, h_d=Operator(np.zeros((3, 3))))

    def test_reservoir_flag_must_match_scheme(self):
        cfg = scenario_library("example_I")
        with pytest.raises(ValueError, match="reservoir_in_feedback"):
            dataclasses.replace(cfg, reservoir_in_feedback=True)

    def test_reservoir_scheme_requires_reservoir(self):
        cfg = scenario_library("reservoir_circumvention", dim_R=4, N=4)
        with pytest.raises(ValueError, match="none is configured"):
            dataclasses.replace(cfg, reservoir=None)

    def test_unused_reservoir_rejected(self):
        cfg = scenario_library("example_I")
        h_r = Operator(np.diag([0.0, 1.0]))
        tau = thermal_state(h_r.entries, cfg.thermo.beta)
        with pytest.raises(ValueError, match="unused"):
            dataclasses.replace(
                cfg, reservoir=ReservoirSpec(hamiltonian=h_r, state=tau)
            )

    def test_feedback_branch_dimension_mismatch(self):
        cfg = scenario_library("example_I")
        with pytest.raises(ValueError, match="branch dimension"):
            dataclasses.replace(cfg, weight=build_oscillator_weight(1.0, 4))

    def test_feedback_demon_dimension_mismatch(self):
        cfg = scenario_library("example_I")
        scheme = FeedbackScheme(
            branch_unitaries=cfg.feedback.branch_unitaries,
            demon_projectors=(
                ("+", Operator(projector_onto(basis_state(3, 0)))),
                ("-", Operator(np.diag([0.0, 1.0, 1.0]))),
            ),
        )
        with pytest.raises(ValueError, match="demon dimension"):
            dataclasses.replace(cfg, feedback=scheme)

    def test_feedback_label_mismatch(self):
        cfg = scenario_library("example_I")
        relabeled = FeedbackScheme(
            branch_unitaries=tuple(
                (l + "x", u) for l, u in cfg.feedback.branch_unitaries
            ),
            demon_projectors=tuple(
                (l + "x", p) for l, p in cfg.feedback.demon_projectors
            ),
        )
        with pytest.raises(ValueError, match="labels"):
            dataclasses.replace(cfg, feedback=relabeled)

    def test_joint_dimension_cap(self):
        # 100 outcomes drive the demon register over the joint-size limit
        # (21 * 2 * 100 = 4200) while every factor stays small
        k = 100
        amp = math.sqrt(2.0 / k)
        rows = []
        for i in range(k):
            m = np.zeros((2, 2), dtype=complex)
            m[i % 2, i % 2] = amp
            rows.append((f"o{i}", (Operator(m),)))
        instr = Instrument(tuple(rows))
        weight = build_oscillator_weight(1.0, 17, dim=21)
        eye_branch = Operator(np.eye(21 * 2))
        scheme = FeedbackScheme(
            branch_unitaries=tuple((f"o{i}", eye_branch) for i in range(k)),
            demon_projectors=tuple(
                (f"o{i}", Operator(projector_onto(basis_state(k, i))))
                for i in range(k)
            ),
        )
        with pytest.raises(SizeError, match="exceeds"):
            EngineConfig(
                rho_s=DensityMatrix(np.eye(2) / 2),
                h_s=Operator(np.zeros((2, 2))),
                measurement=instr,
                feedback=scheme,
                weight=weight,
                thermo=ThermoContext(1.0),
            )

    def test_instrument_projectors_must_align_with_outcomes(self):
        cfg = scenario_library("degenerate_circumvention")
        labels = [l for l, _ in cfg.feedback.demon_projectors]
        swapped = FeedbackScheme(
            branch_unitaries=cfg.feedback.branch_unitaries,
            demon_projectors=(
                (labels[0], cfg.feedback.projector_for(labels[1])),
                (labels[1], cfg.feedback.projector_for(labels[0])),
            ),
        )
        with pytest.raises(ConstructionError, match="basis-aligned"):
            dataclasses.replace(cfg, feedback=swapped)

    def test_reservoir_state_must_be_thermal(self):
        cfg = scenario_library("reservoir_circumvention", dim_R=4, N=4)
        dim_r = cfg.reservoir.state.dim
        with pytest.raises(ValueError, match="not thermal"):
            dataclasses.replace(
                cfg,
                reservoir=ReservoirSpec(
                    hamiltonian=cfg.reservoir.hamiltonian,
                    state=DensityMatrix(np.eye(dim_r) / dim_r),
                ),
            )

    def test_nonconserving_feedback_refused(self):
        cfg = scenario_library("example_I")
        dw = cfg.weight_hamiltonian.dim
        # cyclic weight raise with no compensating system drop
        lift = Operator(np.roll(np.eye(2 * dw), 2, axis=0))
        scheme = FeedbackScheme(
            branch_unitaries=(("+", lift), ("-", lift)),
            demon_projectors=cfg.feedback.demon_projectors,
        )
        with pytest.raises(ConstructionError, match="feedback violates"):
            dataclasses.replace(cfg, feedback=scheme)

    def test_nonconserving_measurement_refused(self):
        cfg = scenario_library("example_I")
        with pytest.raises(ConstructionError, match="measurement violates"):
            dataclasses.replace(cfg, measurement=_swapped_post_model())

    def test_non_conforming_escape_hatch(self):
        cfg = scenario_library("example_I")
        loose = dataclasses.replace(
            cfg, measurement=_swapped_post_model(), non_conforming=True
        )
        assert not loose.conforming
        assert not loose.certification.measurement_energy.passed
        assert loose.certification.feedback_energy.passed
        result = run_cycle(loose)
        assert len(result.branches) == 2

    def test_certification_passes_for_reference_engines(self):
        cfg = scenario_library("example_II")
        cert = cfg.certification
        assert cfg.conforming
        assert cert.passed
        assert cert.measurement_energy.passed
        assert cert.feedback_energy.passed
        assert cert.feedback_form.passed
        assert cert.repeatability is not None
        assert cert.way is not None

    def test_instrument_configs_have_no_model_certificates(self):
        cfg = scenario_library("degenerate_circumvention")
        cert = cfg.certification
        assert cert.measurement_energy is None
        assert cert.repeatability is None
        assert cert.way is None
        assert not cert.passed
        assert not cfg.conforming


class TestRunCycle:
    def test_branch_probabilities_sum_to_one(self, example_i_cycles):
        for _, result, _ in example_i_cycles.values():
            total = sum(b.probability for b in result.branches)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_marginals_match_joint_evolution(self, example_i_cycles,
                                             example_ii_sweep):
        for store in (example_i_cycles, example_ii_sweep):
            for _, result, _ in store.values():
                assert result.marginal_deviation < 1e-10

    def test_ledger_average_matches_branches(self, example_i_cycles):
        _, result, _ = example_i_cycles[0.3]
        w = sum(b.probability * b.work for b in result.branches)
        assert result.ledger.w_avg == pytest.approx(w, abs=1e-12)

    def test_model_engine_keeps_premeasured_state(self, example_i_cycles,
                                                  degenerate_cycle):
        _, result, _ = example_i_cycles[0.3]
        assert result.premeasured is not None
        assert result.premeasured.dim == 4
        _, deg_result, _ = degenerate_cycle
        assert deg_result.premeasured is None

    def test_landauer_erasure_charges_record_entropy(self, example_i_cycles):
        config, result, _ = example_i_cycles[0.3]
        s_d = von_neumann_entropy(result.rho_d_after)
        assert result.erasure.landauer_optimal
        assert result.erasure.q == pytest.approx(
            config.thermo.kt * s_d, abs=1e-12
        )
        assert result.erasure.reset_fidelity == pytest.approx(1.0, abs=1e-12)

    def test_reservoir_chains_only_with_reservoir(self, example_i_cycles,
                                                  reservoir_cycle):
        _, plain, _ = example_i_cycles[0.3]
        assert plain.reservoir_chains == ()
        assert plain.rho_r_after is None
        _, res, _ = reservoir_cycle
        assert len(res.reservoir_chains) == 2
        assert res.rho_r_after is not None

    def test_order_gap_matches_public_route(self, example_i_cycles):
        config, result, _ = example_i_cycles[0.3]
        v = compose_feedback_unitary(config.feedback)
        joint = np.kron(
            config.weight_initial.entries, result.premeasured.entries
        )
        gap = objectification_order_gap(
            v,
            joint,
            config.feedback.demon_projectors,
            config.feedback.branch_dim,
        )
        assert gap == pytest.approx(result.objectification_order_gap, abs=1e-12)
        assert gap <= 1e-10

    def test_null_engine_moves_nothing(self, null_cycle):
        config, result, report = null_cycle
        assert len(result.branches) == 1
        assert result.branches[0].work == pytest.approx(0.0, abs=1e-12)
        assert result.ledger.w_net_coarse == pytest.approx(0.0, abs=1e-12)
        assert result.erasure.q == pytest.approx(0.0, abs=1e-12)
        assert not report.f3_positive_work

    def test_deterministic_preparation_leaves_one_branch(self):
        config = scenario_library("example_I", q=0.0)
        result = run_cycle(config)
        assert len(result.branches) == 1
        assert result.branches[0].outcome == "-"
        assert result.branches[0].work == pytest.approx(0.0, abs=1e-12)

        config = scenario_library("example_I", q=1.0)
        result = run_cycle(config)
        assert len(result.branches) == 1
        assert result.branches[0].outcome == "+"
        assert result.branches[0].work == pytest.approx(1.0, abs=1e-9)


class TestFeatureReports:
    def test_reports_are_recomputable(self, example_i_cycles):
        config, result, report = example_i_cycles[0.5]
        again = evaluate_features(result, config)
        assert again == report

    def test_eigenstate_engine_pattern(self, example_i_cycles):
        for _, _, report in example_i_cycles.values():
            assert report.triple == (True, True, False)
            assert not report.degenerate_target
            assert not report.reservoir_in_feedback

    def test_superposed_engine_pattern(self, example_ii_sweep):
        for _, _, report in example_ii_sweep.values():
            assert not report.f1_repeatable
            assert report.f3_positive_work

    def test_degenerate_engine_holds_all_three(self, degenerate_cycle):
        _, _, report = degenerate_cycle
        assert report.triple == (True, True, True)
        assert report.degenerate_target

    def test_reservoir_engine_spends_weight_entropy(self, reservoir_cycle):
        _, _, report = reservoir_cycle
        assert report.f1_repeatable
        assert not report.f2_entropy_invariant
        assert report.f3_positive_work
        assert report.reservoir_in_feedback

    def test_min_work_and_floor_are_consistent(self, example_i_cycles):
        config, result, report = example_i_cycles[0.3]
        assert report.min_work == pytest.approx(
            min(b.work for b in result.branches), abs=1e-15
        )
        assert report.work_floor == work_threshold(
            config.weight.omega, config.thermo
        )

    def test_fidelities_cover_every_branch(self, degenerate_cycle):
        _, result, report = degenerate_cycle
        assert {o for o, _ in report.f1_fidelities} == {
            b.outcome for b in result.branches
        }
        assert all(p >= 1.0 - 1e-9 for _, p in report.f1_fidelities)

    def test_doctored_branch_set_trips_the_exclusion(self, example_i_cycles):
        # dropping the idle branch makes all three features appear to hold
        # on a certified engine, which the evaluator must refuse to report
        config, result, _ = example_i_cycles[0.3]
        lifted_only = dataclasses.replace(
            result, branches=(result.branches[0],)
        )
        assert result.branches[0].outcome == "+"
        with pytest.raises(HardAssertionError, match="three features"):
            evaluate_features(lifted_only, config)


class TestScenarioLibrary:
    def test_unknown_scenario_named(self):
        with pytest.raises(ValueError, match="unknown scenario 'bogus'"):
            scenario_library("bogus")

    def test_unknown_parameter_named(self):
        with pytest.raises(ValueError, match="unknown parameter 'frequency'"):
            scenario_library("example_I", frequency=2.0)

    def test_every_scenario_builds_with_defaults(self):
        for name in SCENARIO_NAMES:
            config = scenario_library(name)
            assert config.label == name

    @pytest.mark.parametrize(
        "name,params",
        [
            ("example_I", {"q": 1.5}),
            ("example_I", {"q": -0.1}),
            ("example_I", {"N": 1}),
            ("example_II", {"N": 0}),
            ("reservoir_circumvention", {"theta": 4.0}),
            ("reservoir_circumvention", {"dim_R": 1}),
            ("degenerate_circumvention", {"d": 2}),
            ("degenerate_circumvention", {"ranks": (2, 3)}),
            ("degenerate_circumvention", {"ranks": (1, 3)}),
            ("degenerate_circumvention", {"ranks": (4,)}),
        ],
    )
    def test_out_of_range_parameters(self, name, params):
        with pytest.raises(ValueError, match=next(iter(params))):
            scenario_library(name, **params)

    def test_degenerate_ranks_set_branch_works(self):
        config = scenario_library(
            "degenerate_circumvention", d=5, ranks=(3, 2), N=6
        )
        result = run_cycle(config)
        works = {b.outcome: b.work for b in result.branches}
        # each branch lifts the weight by the top level of its subspace
        assert works["x0"] == pytest.approx(2.0, abs=1e-9)
        assert works["x1"] == pytest.approx(4.0, abs=1e-9)
        report = evaluate_features(result, config)
        assert report.triple == (True, True, True)


class TestHarvestFamily:
    def test_branch_works_match_closed_form(self):
        rng = np.random.default_rng(99)
        for _ in range(5):
            config = SCAN_FAMILIES["entropy_harvest"](rng, False)
            rw = np.diag(config.weight_initial.entries).real
            idx = np.nonzero(rw > 1e-12)[0]
            p = float(rw[idx[0]])
            hw = np.diag(config.weight_hamiltonian.entries).real
            omega = float(hw[1] - hw[0])
            w_plus, w_minus = harvest_works(
                p, omega, config.thermo.temperature
            )
            result = run_cycle(config)
            works = {b.outcome: b.work for b in result.branches}
            assert works["+"] == pytest.approx(w_plus, abs=1e-9)
            assert works["-"] == pytest.approx(w_minus, abs=1e-9)


class TestImpossibilityScan:
    def test_scan_is_reproducible(self):
        a = impossibility_scan(8, seed=4242)
        b = impossibility_scan(8, seed=4242)
        assert a.records == b.records
        assert a.seed == 4242 and a.count == 8

    def test_families_rotate_round_robin(self):
        report = impossibility_scan(8, seed=1)
        names = tuple(SCAN_FAMILIES)
        assert tuple(r.family for r in report.records) == tuple(
            names[i % len(names)] for i in range(8)
        )

    @pytest.mark.parametrize(
        "family,check",
        [
            ("eigenstate_posts", lambda t: t == (True, True, False)),
            ("excited_posts", lambda t: t == (False, True, True)),
            ("entropy_harvest", lambda t: t == (True, False, True)),
            ("superposition_posts", lambda t: t[:2] == (False, False)),
        ],
    )
    def test_family_feature_patterns(self, family, check):
        report = impossibility_scan(6, seed=31, families=[family])
        for record in report.records:
            assert check(record.triple), (family, record.triple)

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError, match="unknown family"):
            impossibility_scan(4, seed=0, families=["nope"])

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError, match="positive"):
            impossibility_scan(0, seed=0)

    def test_pattern_counts_partition_the_records(self):
        report = impossibility_scan(12, seed=5)
        assert sum(n for _, n in report.pattern_counts) == 12
        for triple, n in report.pattern_counts:
            assert report.pattern_count(triple) == n
        assert report.all_three_count == report.pattern_count(
            (True, True, True)
        )
