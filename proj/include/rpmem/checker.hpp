#pragma once

// Exhaustive breadth-first exploration of every schedule of a (configuration,
// recipe) pair, with a power failure checked at every reachable state.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpmem/engine.hpp"

namespace rpmem {

class InconclusiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Status : std::uint8_t { Correct, Violated };
enum class ObligationKind : std::uint8_t { Durability, OrderingSafety };

std::string to_string(Status s);
std::string to_string(ObligationKind o);

/// Schedule entries are indices into enabled_events() at each step.
using Schedule = std::vector<std::size_t>;

struct Counterexample {
  Schedule schedule;
  std::size_t crash_index = 0;  // number of events applied before the failure
  MemoryImage image;            // recovered (logical) image at the failure
  ObligationKind obligation = ObligationKind::Durability;
  std::string detail;
};

struct ExploreStats {
  std::uint64_t states = 0;
  std::uint64_t schedules = 0;  // complete schedules, saturating
  std::uint64_t prefixes = 0;   // schedule prefixes without deduplication, saturating
  std::uint64_t crash_points = 0;
  std::uint64_t transitions = 0;
  std::uint64_t deadlocks = 0;  // quiescent states with recipe steps left
};

struct Verdict {
  Status status = Status::Correct;
  std::optional<Counterexample> counterexample;
  ExploreStats stats;
  std::vector<std::string> diagnostics;
};

struct ExploreOptions {
  std::size_t state_budget = 4'000'000;
  EngineOptions engine;
  // Called with every crash state and its recovered image.
  std::function<void(const MachineState&, const MemoryImage&)> observer;
};

/// PM contents after a failure in `state`, with every complete update
/// message found in a PM-resident receive buffer applied to its targets.
MemoryImage logical_image(const Engine& engine, const MachineState& state);

struct Violation {
  ObligationKind obligation;
  std::string detail;
};

/// Durability once the marker is reached; ordering safety (compound) always.
std::optional<Violation> check_obligations(const Engine& engine, const MachineState& state, const MemoryImage& image);

/// Throws InconclusiveError when the state budget is exceeded.
Verdict explore(const ServerConfig& config, const Recipe& recipe, const ExploreOptions& options = {});

struct ReplayResult {
  std::vector<std::string> trace;
  MemoryImage image;
  MachineState state;
  std::optional<Violation> violation;
};

/// Re-executes the first `crash_index` choices of `schedule`. Throws
/// EngineError naming the offending step when a choice is out of range.
ReplayResult replay(const ServerConfig& config, const Recipe& recipe, const Schedule& schedule,
                    std::size_t crash_index, const EngineOptions& options = {});

struct MatrixRow {
  ServerConfig config;
  Primitive primitive;
  Arity arity;
  std::string recipe_id;
  std::string mutant;  // empty for catalog rows
  Verdict verdict;
  std::optional<Status> expected;
  bool inconclusive = false;
  std::string error;
};

struct MatrixReport {
  Transport transport = Transport::InfiniBandRoCE;
  std::vector<MatrixRow> rows;

  std::size_t catalog_rows() const;
  std::size_t catalog_correct() const;
  bool any_inconclusive() const;
  /// Every row with an expectation got it.
  bool expectations_met() const;
};

MatrixReport run_matrix(Transport transport, bool mutants, const ExploreOptions& options = {});

std::string matrix_csv(const MatrixReport& report);

}  // namespace rpmem
