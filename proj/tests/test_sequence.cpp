#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opsim/sequence.hpp"
#include "support/fixture_writer.hpp"

#include <filesystem>

using namespace opsim;
using opsim::testing::fixture_path;

namespace {

const TimePoint kStart = parse_iso8601("2024-07-01T00:00:00");

SequenceSpec uc_ed_emulator() {
    SequenceSpec seq;
    seq.decisions.push_back({"UC", 48, TimeSpan::hours(1), TimeSpan::hours(24)});
    seq.decisions.push_back({"ED", 2, TimeSpan::hours(1), TimeSpan::hours(1)});
    seq.emulator_resolution = TimeSpan::hours(1);
    seq.emulator_name = "RT";
    return seq;
}

} // namespace

TEST_CASE("validate_sequence: fivebus sequence is accepted") {
    const SystemModel sys = SystemModel::load(fixture_path("fivebus/system.json"));
    validate_sequence(uc_ed_emulator(), sys, kStart, 3);
}

TEST_CASE("validate_sequence: violations name the rule") {
    const SystemModel sys = SystemModel::load(fixture_path("fivebus/system.json"));
    SUBCASE("non-dividing interval") {
        SequenceSpec seq = uc_ed_emulator();
        seq.decisions[1].interval = TimeSpan::hours(7);
        seq.decisions[1].horizon_steps = 8;
        CHECK_THROWS_WITH_AS(validate_sequence(seq, sys, kStart, 1),
                             doctest::Contains("does not divide"), ValidationError);
    }
    SUBCASE("horizon shorter than interval") {
        SequenceSpec seq = uc_ed_emulator();
        seq.decisions[0].horizon_steps = 12;
        CHECK_THROWS_WITH_AS(validate_sequence(seq, sys, kStart, 1),
                             doctest::Contains("horizon shorter than interval"), ValidationError);
    }
    SUBCASE("interval not multiple of resolution") {
        SequenceSpec seq = uc_ed_emulator();
        seq.decisions[1].interval = TimeSpan::minutes(90);
        CHECK_THROWS_WITH_AS(validate_sequence(seq, sys, kStart, 1),
                             doctest::Contains("not multiple of resolution"), ValidationError);
    }
    SUBCASE("emulator resolution must divide the innermost interval") {
        SequenceSpec seq = uc_ed_emulator();
        seq.emulator_resolution = TimeSpan::minutes(25);
        CHECK_THROWS_WITH_AS(validate_sequence(seq, sys, kStart, 1),
                             doctest::Contains("emulator resolution"), ValidationError);
    }
    SUBCASE("insufficient forecast coverage") {
        // The fixture holds 3 days of windows; a 5-day span runs out.
        CHECK_THROWS_WITH_AS(validate_sequence(uc_ed_emulator(), sys, kStart, 5),
                             doctest::Contains("insufficient forecast coverage"), ValidationError);
    }
    SUBCASE("feedforward source must precede the target") {
        SequenceSpec seq = uc_ed_emulator();
        FeedforwardSpec ff;
        ff.kind = FeedforwardKind::SemiContinuous;
        ff.source_model = "ED";
        ff.target_model = "UC";
        ff.components = {"g_base"};
        seq.feedforwards.push_back(ff);
        CHECK_THROWS_WITH_AS(validate_sequence(seq, sys, kStart, 1),
                             doctest::Contains("does not execute before"), ValidationError);
    }
}

TEST_CASE("execution order: counts and interleaving per step") {
    const auto order = compute_execution_order(uc_ed_emulator(), kStart, 1);
    REQUIRE(order.size() == 1);
    const auto& events = order[0];
    int uc = 0, ed = 0, em = 0;
    for (const auto& e : events) {
        if (e.is_emulator()) ++em;
        else if (e.model_index == 0) ++uc;
        else ++ed;
    }
    CHECK(uc == 1);
    CHECK(ed == 24);
    CHECK(em == 24);
    // UC opens the step; within each hour the ED precedes the emulator tick.
    CHECK(events.front().model_index == 0);
    for (size_t i = 0; i + 1 < events.size(); ++i) {
        if (events[i].issue == events[i + 1].issue)
            CHECK(events[i].model_index > events[i + 1].model_index * -1 - 1); // decisions first
    }
    for (size_t i = 0; i < events.size(); ++i) {
        if (!events[i].is_emulator()) continue;
        // Every decision due at this timestamp appears before the emulator.
        for (size_t j = i + 1; j < events.size(); ++j)
            if (events[j].issue == events[i].issue) CHECK(events[j].is_emulator());
    }
}

TEST_CASE("execution order: single model and span linearity") {
    SequenceSpec seq;
    seq.decisions.push_back({"UC", 24, TimeSpan::hours(1), TimeSpan::hours(24)});
    const auto one = compute_execution_order(seq, kStart, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].size() == 1);
    CHECK(one[0][0].model_index == 0);

    const auto two_days = compute_execution_order(uc_ed_emulator(), kStart, 2);
    const auto one_day = compute_execution_order(uc_ed_emulator(), kStart, 1);
    size_t n1 = 0, n2 = 0;
    for (const auto& step : one_day) n1 += step.size();
    for (const auto& step : two_days) n2 += step.size();
    CHECK(n2 == 2 * n1);
}

TEST_CASE("state: writes, zero-order hold reads, recency") {
    SimulationState state(kStart, TimeSpan::hours(1), 48);

    DecisionSolution uc;
    uc.model = "UC";
    uc.issue = kStart;
    uc.resolution = TimeSpan::hours(1);
    uc.horizon_steps = 48;
    uc.interval_steps = 24;
    auto& on = uc.values[VarKind::OnStatus]["g"];
    on.assign(48, 1.0);
    for (int t = 24; t < 48; ++t) on[static_cast<size_t>(t)] = 0.0; // look-ahead says off
    update_state(state, uc, StateSpace::Decision);

    // Only the realized window landed in u.
    CHECK(state.latest_at_or_before(StateSpace::Decision, VarKind::OnStatus, "g",
                                    kStart + TimeSpan::hours(23)) == 1.0);
    CHECK(state.latest_at_or_before(StateSpace::Decision, VarKind::OnStatus, "g",
                                    kStart + TimeSpan::hours(30)) == 1.0); // hold, not look-ahead
    for (const auto& rec : state.journal()) CHECK(rec.horizon_index <= rec.interval_steps);

    // A later, finer model overwrites the overlapping timestamp.
    DecisionSolution ed;
    ed.model = "ED";
    ed.issue = kStart + TimeSpan::hours(3);
    ed.resolution = TimeSpan::hours(1);
    ed.horizon_steps = 1;
    ed.interval_steps = 1;
    ed.values[VarKind::OnStatus]["g"] = {0.0};
    update_state(state, ed, StateSpace::Decision);
    CHECK(state.latest_at_or_before(StateSpace::Decision, VarKind::OnStatus, "g",
                                    kStart + TimeSpan::hours(3)) == 0.0);
    CHECK(state.latest_at_or_before(StateSpace::Decision, VarKind::OnStatus, "g",
                                    kStart + TimeSpan::hours(4)) == 1.0);

    // Emulation writes live in x and never touch u.
    DecisionSolution em = ed;
    em.model = "RT";
    em.issue = kStart;
    em.values[VarKind::OnStatus]["g"] = {0.0};
    em.values[VarKind::ActivePower]["g"] = {0.42};
    update_state(state, em, StateSpace::System);
    CHECK(state.latest_at_or_before(StateSpace::System, VarKind::ActivePower, "g", kStart) == 0.42);
    CHECK(!state.latest_at_or_before(StateSpace::Decision, VarKind::ActivePower, "g", kStart));
}

TEST_CASE("state: run lengths account for the boundary duration") {
    SimulationState state(kStart, TimeSpan::hours(1), 24);
    state.write_boundary(StateSpace::System, VarKind::OnStatus, "g", 1.0);
    state.set_boundary_duration("g", 5);

    // Nothing written yet: the boundary run (5 h) is all there is.
    CHECK(state.run_length_before(StateSpace::System, "g", kStart) == 5);

    DecisionSolution em;
    em.model = "RT";
    em.resolution = TimeSpan::hours(1);
    em.horizon_steps = 1;
    em.interval_steps = 1;
    for (int h = 0; h < 3; ++h) {
        em.issue = kStart + TimeSpan::hours(h);
        em.values[VarKind::OnStatus]["g"] = {1.0};
        update_state(state, em, StateSpace::System);
    }
    CHECK(state.run_length_before(StateSpace::System, "g", kStart + TimeSpan::hours(3)) == 8);

    // A shutdown resets the run.
    em.issue = kStart + TimeSpan::hours(3);
    em.values[VarKind::OnStatus]["g"] = {0.0};
    update_state(state, em, StateSpace::System);
    CHECK(state.run_length_before(StateSpace::System, "g", kStart + TimeSpan::hours(4)) == 1);
}

TEST_CASE("chronology: Inter reads x, Intra prefers the model's own results") {
    const SystemModel sys = SystemModel::load(fixture_path("fivebus/system.json"));
    SimulationState state(kStart, TimeSpan::hours(1), 48);

    // x says the emulator ran g_base at 42 MW in hour 0.
    DecisionSolution em;
    em.model = "RT";
    em.issue = kStart;
    em.resolution = TimeSpan::hours(1);
    em.horizon_steps = 1;
    em.interval_steps = 1;
    em.values[VarKind::ActivePower]["g_base"] = {0.42};
    em.values[VarKind::OnStatus]["g_base"] = {1.0};
    update_state(state, em, StateSpace::System);

    // The model's own previous ED solution said 45 MW.
    DecisionSolution own;
    own.model = "ED";
    own.issue = kStart;
    own.resolution = TimeSpan::hours(1);
    own.horizon_steps = 2;
    own.interval_steps = 1;
    own.values[VarKind::ActivePower]["g_base"] = {0.45, 0.47};

    const TimePoint next = kStart + TimeSpan::hours(1);
    const auto inter = get_initial_conditions(sys, next, state, Chronology::InterProblem, &own,
                                              TimeSpan::hours(1));
    CHECK(inter.thermal.at("g_base").power == doctest::Approx(0.42));

    const auto intra = get_initial_conditions(sys, next, state, Chronology::IntraProblem, &own,
                                              TimeSpan::hours(1));
    CHECK(intra.thermal.at("g_base").power == doctest::Approx(0.45));
}
