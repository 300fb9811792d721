#include <doctest.h>

#include "naive_oracle.hpp"
#include "rpmem/catalog.hpp"
#include "rpmem/checker.hpp"

using namespace rpmem;

namespace {

struct Scenario {
  ServerConfig config;
  Recipe recipe;
};

// Catalog recipes and their named mutants on the reduced workload, limited
// to those small enough for the brute-force oracle.
std::vector<Scenario> oracle_scenarios(Arity arity) {
  std::vector<Scenario> out;
  for (const auto& c : enumerate_configs())
    for (auto p : {Primitive::Write, Primitive::WriteImm, Primitive::Send}) {
      Recipe base = select_recipe(c, p, arity, "", oracle::reduced_workload());
      std::vector<Recipe> rs = {base};
      for (const auto& m : named_mutants())
        if (auto r = apply_named_mutant(base, m)) rs.push_back(*r);
      for (auto& r : rs)
        if (oracle::engine_events(r) <= oracle::kOracleEventLimit) out.push_back({c, r});
    }
  return out;
}

void compare_with_oracle(const Scenario& sc) {
  CAPTURE(sc.recipe.id);
  CAPTURE(describe(sc.config));
  ExploreOptions opts;
  opts.engine = oracle::reduced_engine();
  Verdict v = explore(sc.config, sc.recipe, opts);
  auto naive = oracle::naive_explore(sc.config, sc.recipe, opts.engine);
  CHECK(naive.violated == (v.status == Status::Violated));
  if (v.status == Status::Correct) {
    CHECK(v.stats.prefixes == naive.prefixes);
    CHECK(v.stats.schedules == naive.schedules);
  } else {
    REQUIRE(v.counterexample);
    CHECK(v.counterexample->crash_index == naive.shortest_violation);
  }
}

}  // namespace

TEST_SUITE("crash-checker") {
  TEST_CASE("explorer agrees with brute-force enumeration: singleton updates") {
    auto scs = oracle_scenarios(Arity::Singleton);
    CHECK(scs.size() >= 20);
    for (const auto& sc : scs) compare_with_oracle(sc);
  }

  TEST_CASE("explorer agrees with brute-force enumeration: compound updates") {
    auto scs = oracle_scenarios(Arity::Compound);
    CHECK(scs.size() >= 8);
    for (const auto& sc : scs) compare_with_oracle(sc);
  }

  TEST_CASE("counterexamples replay to the same violation") {
    ServerConfig c{PersistenceDomain::MHP, true, Region::DRAM, Transport::InfiniBandRoCE};
    Recipe r = *apply_named_mutant(select_recipe(c, Primitive::Write, Arity::Compound), "drop-flush");
    Verdict v = explore(c, r);
    REQUIRE(v.status == Status::Violated);
    const auto& cx = *v.counterexample;
    auto one = replay(c, r, cx.schedule, cx.crash_index);
    auto two = replay(c, r, cx.schedule, cx.crash_index);
    CHECK(one.trace == two.trace);
    CHECK(one.image == cx.image);
    CHECK(one.state.key() == two.state.key());
    REQUIRE(one.violation);
    CHECK(one.violation->obligation == cx.obligation);
    CHECK(one.trace.back() == "** power failure **");
    CHECK(one.trace.size() == cx.crash_index + 1);
  }

  TEST_CASE("replay reports out-of-range choices") {
    ServerConfig c{PersistenceDomain::WSP, true, Region::DRAM, Transport::InfiniBandRoCE};
    Recipe r = select_recipe(c, Primitive::Write, Arity::Singleton);
    CHECK_THROWS_WITH_AS(replay(c, r, {0, 9}, 2), doctest::Contains("schedule step 1"), EngineError);
    CHECK_THROWS_AS(replay(c, r, {0}, 5), EngineError);
  }

  TEST_CASE("state budget makes the verdict inconclusive") {
    ServerConfig c{PersistenceDomain::DMP, true, Region::PM, Transport::InfiniBandRoCE};
    ExploreOptions opts;
    opts.state_budget = 50;
    CHECK_THROWS_AS(explore(c, select_recipe(c, Primitive::Send, Arity::Compound), opts), InconclusiveError);
  }

  TEST_CASE("observer sees every crash point") {
    ServerConfig c{PersistenceDomain::MHP, false, Region::PM, Transport::InfiniBandRoCE};
    std::uint64_t seen = 0;
    ExploreOptions opts;
    opts.observer = [&](const MachineState&, const MemoryImage&) { ++seen; };
    Verdict v = explore(c, select_recipe(c, Primitive::Send, Arity::Compound), opts);
    CHECK(v.status == Status::Correct);
    CHECK(seen == v.stats.crash_points);
    CHECK(v.stats.crash_points == v.stats.states);
    CHECK(v.stats.deadlocks == 0);
  }

  TEST_CASE("IMC drains do not change any catalog verdict") {
    for (const auto& c : enumerate_configs())
      for (auto p : {Primitive::Write, Primitive::WriteImm, Primitive::Send})
        for (auto a : {Arity::Singleton, Arity::Compound}) {
          Recipe r = select_recipe(c, p, a);
          ExploreOptions off;
          off.engine.imc_drains = false;
          CHECK(explore(c, r).status == explore(c, r, off).status);
        }
  }

  TEST_CASE("circular waits deadlock and are reported") {
    ServerConfig c{PersistenceDomain::WSP, true, Region::DRAM, Transport::InfiniBandRoCE};
    Recipe r;
    r.id = "circular";
    r.steps = parse_steps("Rq Receive(ack)\nRq Send(a)\nRsp Receive(a)\nRsp Send(ack)\nASSERT-PERSISTED(a)\n");
    install_workload(r);
    REQUIRE(validate_recipe(r).empty());
    Verdict v = explore(c, r);
    CHECK(v.status == Status::Correct);
    CHECK(v.stats.deadlocks == 1);
    CHECK(v.stats.states == 1);
    CHECK_FALSE(v.diagnostics.empty());
  }
}
