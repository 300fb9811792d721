#include "rpmem/checker.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "rpmem/catalog.hpp"

namespace rpmem {

std::string to_string(Status s) { return s == Status::Correct ? "Correct" : "Violated"; }

std::string to_string(ObligationKind o) {
  return o == ObligationKind::Durability ? "Durability" : "OrderingSafety";
}

MemoryImage logical_image(const Engine& engine, const MachineState& state) {
  MemoryImage physical = recover_image(state.memory, engine.config().domain);
  if (engine.config().rqwrb_region != Region::PM) return physical;
  MemoryImage out = physical;
  for (const auto& d : engine.descriptors()) {
    if (engine.work_requests()[d.request].kind != OpKind::Send) continue;
    auto payload = decode_record_at(physical, d.buffer.offset, d.length);
    if (!payload) continue;
    auto entries = decode_update_message(*payload);
    if (!entries) continue;
    for (const auto& e : *entries)
      for (std::size_t i = 0; i < e.data.size(); ++i) out[e.offset + static_cast<std::uint32_t>(i * kUnitBytes)] = e.data[i];
  }
  return out;
}

namespace {

bool fully_new(const ValueDecl& v, const MemoryImage& image) {
  for (std::size_t i = 0; i < v.new_words.size(); ++i)
    if (read_word(image, v.target.plus_units(i).offset) != v.new_words[i]) return false;
  return true;
}

bool any_new(const ValueDecl& v, const MemoryImage& image) {
  for (std::size_t i = 0; i < v.new_words.size(); ++i) {
    if (v.new_words[i] == v.old_words[i]) continue;
    if (read_word(image, v.target.plus_units(i).offset) == v.new_words[i]) return true;
  }
  return false;
}

std::string unit_states(const ValueDecl& v, const MemoryImage& image) {
  std::string out;
  for (std::size_t i = 0; i < v.new_words.size(); ++i) {
    Word w = read_word(image, v.target.plus_units(i).offset);
    out += w == v.new_words[i] ? "new" : (w == v.old_words[i] ? "old" : "other");
    if (i + 1 < v.new_words.size()) out += "/";
  }
  return out;
}

}  // namespace

std::optional<Violation> check_obligations(const Engine& engine, const MachineState& state, const MemoryImage& image) {
  const Recipe& r = engine.recipe();
  if (r.arity == Arity::Compound) {
    const ValueDecl& a = r.value("a");
    const ValueDecl& b = r.value("b");
    if (any_new(b, image) && !fully_new(a, image))
      return Violation{ObligationKind::OrderingSafety,
                       "b recovered new while a recovered " + unit_states(a, image)};
  }
  if (engine.marker_reached(state)) {
    for (const auto& name : r.steps.back().values) {
      const ValueDecl& v = r.value(name);
      if (!fully_new(v, image))
        return Violation{ObligationKind::Durability,
                         "ASSERT-PERSISTED reached but " + name + " recovered " + unit_states(v, image)};
    }
  }
  return std::nullopt;
}

Verdict explore(const ServerConfig& config, const Recipe& recipe, const ExploreOptions& options) {
  Engine engine(config, recipe, options.engine);
  Verdict verdict;

  struct Node {
    std::uint32_t parent;
    std::uint32_t choice;
  };
  std::vector<Node> nodes;
  std::vector<std::uint64_t> edge_begin;  // CSR over nodes in id order
  std::vector<std::uint32_t> edges;
  std::unordered_map<std::string, std::uint32_t> seen;
  std::deque<std::pair<std::uint32_t, MachineState>> frontier;
  std::vector<std::uint32_t> terminals;

  auto path_to = [&](std::uint32_t id) {
    Schedule s;
    while (id != 0) {
      s.push_back(nodes[id].choice);
      id = nodes[id].parent;
    }
    std::reverse(s.begin(), s.end());
    return s;
  };

  // Returns true when the state violates an obligation.
  auto visit = [&](std::uint32_t id, const MachineState& s) {
    MemoryImage image = logical_image(engine, s);
    ++verdict.stats.crash_points;
    if (options.observer) options.observer(s, image);
    auto v = check_obligations(engine, s, image);
    if (!v) return false;
    verdict.status = Status::Violated;
    Counterexample cx;
    cx.schedule = path_to(id);
    cx.crash_index = cx.schedule.size();
    cx.image = std::move(image);
    cx.obligation = v->obligation;
    cx.detail = v->detail;
    verdict.counterexample = std::move(cx);
    return true;
  };

  MachineState init = engine.initial_state();
  seen.emplace(init.key(), 0);
  nodes.push_back({0, 0});
  bool violated = visit(0, init);
  frontier.emplace_back(0, std::move(init));

  while (!frontier.empty() && !violated) {
    auto [id, state] = std::move(frontier.front());
    frontier.pop_front();
    edge_begin.push_back(edges.size());
    auto events = engine.enabled_events(state);
    if (events.empty()) {
      terminals.push_back(id);
      bool finished = engine.marker_reached(state) && state.responder_pc == engine.responder_program().size();
      if (!finished) {
        ++verdict.stats.deadlocks;
        if (verdict.diagnostics.empty())
          verdict.diagnostics.push_back("quiescent state with recipe steps left (e.g. a message with no receive buffer)");
      }
    }
    for (std::size_t c = 0; c < events.size() && !violated; ++c) {
      MachineState next = state;
      engine.apply_in_place(next, events[c]);
      ++verdict.stats.transitions;
      auto [it, inserted] = seen.try_emplace(next.key(), static_cast<std::uint32_t>(nodes.size()));
      edges.push_back(it->second);
      if (!inserted) continue;
      if (nodes.size() >= options.state_budget)
        throw InconclusiveError("state budget of " + std::to_string(options.state_budget) + " exceeded for " +
                                recipe.id + " on " + describe(config));
      std::uint32_t nid = it->second;
      nodes.push_back({id, static_cast<std::uint32_t>(c)});
      violated = visit(nid, next);
      frontier.emplace_back(nid, std::move(next));
    }
  }
  verdict.stats.states = nodes.size();
  if (violated) return verdict;

  // Count complete schedules over the state DAG in reverse topological order.
  edge_begin.push_back(edges.size());
  const std::size_t n = nodes.size();
  std::vector<std::uint32_t> indegree(n, 0);
  for (auto e : edges) ++indegree[e];
  std::vector<std::uint32_t> order;
  order.reserve(n);
  order.push_back(0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::uint32_t u = order[k];
    for (auto e = edge_begin[u]; e < edge_begin[u + 1]; ++e)
      if (--indegree[edges[e]] == 0) order.push_back(edges[e]);
  }
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::uint64_t> paths(n, 0);
  for (std::size_t k = order.size(); k-- > 0;) {
    std::uint32_t u = order[k];
    if (edge_begin[u] == edge_begin[u + 1]) {
      paths[u] = 1;
      continue;
    }
    std::uint64_t total = 0;
    for (auto e = edge_begin[u]; e < edge_begin[u + 1]; ++e) {
      std::uint64_t p = paths[edges[e]];
      total = (kMax - total < p) ? kMax : total + p;
    }
    paths[u] = total;
  }
  verdict.stats.schedules = paths[0];
  std::vector<std::uint64_t> reach(n, 0);
  reach[0] = 1;
  std::uint64_t prefixes = 0;
  for (std::uint32_t u : order) {
    prefixes = (kMax - prefixes < reach[u]) ? kMax : prefixes + reach[u];
    for (auto e = edge_begin[u]; e < edge_begin[u + 1]; ++e) {
      std::uint64_t& r = reach[edges[e]];
      r = (kMax - r < reach[u]) ? kMax : r + reach[u];
    }
  }
  verdict.stats.prefixes = prefixes;
  return verdict;
}

ReplayResult replay(const ServerConfig& config, const Recipe& recipe, const Schedule& schedule, std::size_t crash_index,
                    const EngineOptions& options) {
  Engine engine(config, recipe, options);
  if (crash_index > schedule.size())
    throw EngineError("crash index " + std::to_string(crash_index) + " beyond schedule of length " +
                      std::to_string(schedule.size()));
  ReplayResult out;
  out.state = engine.initial_state();
  for (std::size_t k = 0; k < crash_index; ++k) {
    auto events = engine.enabled_events(out.state);
    if (schedule[k] >= events.size())
      throw EngineError("schedule step " + std::to_string(k) + ": choice " + std::to_string(schedule[k]) +
                        " out of range (" + std::to_string(events.size()) + " enabled)");
    out.trace.push_back(engine.describe(out.state, events[schedule[k]]));
    engine.apply_in_place(out.state, events[schedule[k]]);
  }
  out.trace.push_back("** power failure **");
  out.image = logical_image(engine, out.state);
  out.violation = check_obligations(engine, out.state, out.image);
  return out;
}

std::size_t MatrixReport::catalog_rows() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.mutant.empty(); }));
}

std::size_t MatrixReport::catalog_correct() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) {
    return r.mutant.empty() && !r.inconclusive && r.verdict.status == Status::Correct;
  }));
}

bool MatrixReport::any_inconclusive() const {
  return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.inconclusive; });
}

bool MatrixReport::expectations_met() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) {
    return !r.expected || (!r.inconclusive && r.verdict.status == *r.expected);
  });
}

MatrixReport run_matrix(Transport transport, bool mutants, const ExploreOptions& options) {
  MatrixReport report;
  report.transport = transport;
  auto run_row = [&](MatrixRow row, const Recipe& recipe) {
    try {
      row.verdict = explore(row.config, recipe, options);
    } catch (const InconclusiveError& e) {
      row.inconclusive = true;
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  };
  std::vector<std::tuple<ServerConfig, Primitive, Arity>> scenarios;
  for (ServerConfig c : enumerate_configs()) {
    c.transport = transport;
    for (Primitive p : {Primitive::Write, Primitive::WriteImm, Primitive::Send})
      for (Arity a : {Arity::Singleton, Arity::Compound}) scenarios.emplace_back(c, p, a);
  }
  for (const auto& [c, p, a] : scenarios) {
    Recipe recipe = select_recipe(c, p, a);
    run_row(MatrixRow{c, p, a, recipe.id, "", {}, Status::Correct, false, ""}, recipe);
  }
  if (!mutants) return report;
  for (const auto& [c, p, a] : scenarios) {
    Recipe base = select_recipe(c, p, a);
    for (const auto& name : named_mutants()) {
      auto mutant = apply_named_mutant(base, name);
      if (!mutant) continue;
      std::optional<Status> expected;
      switch (expected_mutant_verdict(c, p, a, name)) {
        case Expectation::Violated: expected = Status::Violated; break;
        case Expectation::Correct: expected = Status::Correct; break;
        case Expectation::None: break;
      }
      run_row(MatrixRow{c, p, a, mutant->id, name, {}, expected, false, ""}, *mutant);
    }
  }
  return report;
}

std::string matrix_csv(const MatrixReport& report) {
  std::ostringstream out;
  out << "domain,ddio,rqwrb,primitive,arity,transport,recipe-id,verdict,states,schedules,crash_points\n";
  for (const auto& r : report.rows) {
    out << to_string(r.config.domain) << ',' << (r.config.ddio ? "on" : "off") << ',' << to_string(r.config.rqwrb_region)
        << ',' << to_string(r.primitive) << ',' << to_string(r.arity) << ',' << to_string(r.config.transport) << ','
        << r.recipe_id << ',' << (r.inconclusive ? "Inconclusive" : to_string(r.verdict.status)) << ','
        << r.verdict.stats.states << ',' << r.verdict.stats.schedules << ',' << r.verdict.stats.crash_points << '\n';
  }
  return out.str();
}

}  // namespace rpmem
