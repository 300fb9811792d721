#pragma once

// Straight-line persistence recipes in the requester/responder step notation
// ("Rq Write(a)", "Rsp flush(&a)", "Rq Comp_Flush", ...).

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpmem/config.hpp"
#include "rpmem/memory_model.hpp"

namespace rpmem {

class RecipeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OpKind : std::uint8_t { Write, WriteImm, Send, Read, Flush, WriteAtomic };

constexpr bool is_posted(OpKind k) { return k == OpKind::Write || k == OpKind::WriteImm || k == OpKind::Send; }
constexpr bool consumes_receive(OpKind k) { return k == OpKind::WriteImm || k == OpKind::Send; }
std::string to_string(OpKind k);

enum class Actor : std::uint8_t { Requester, Responder };

enum class Action : std::uint8_t {
  Post,
  WaitCompletion,
  WaitReceive,
  CopyToTarget,
  LocalFlush,
  PostAck,
  WaitAck,
  AssertPersisted,
};

struct PostSpec {
  OpKind kind = OpKind::Write;
  std::vector<std::string> values;  // Write/WriteImm/WA: one value; Send: one or more
  bool address_only = false;        // Send(&a): carries only the location of a
  bool fenced = false;
  bool signaled = false;
  bool operator==(const PostSpec&) const = default;
};

struct Step {
  Actor actor = Actor::Requester;
  Action action = Action::Post;
  PostSpec post;                    // Action::Post
  int ref = -1;                     // WaitCompletion: index of the awaited Post step
  std::vector<std::string> values;  // WaitReceive / CopyToTarget / LocalFlush / AssertPersisted
  bool address_only = false;        // WaitReceive(&a)
  bool operator==(const Step&) const = default;
};

struct ValueDecl {
  std::string name;
  Address target;
  std::vector<Word> old_words;
  std::vector<Word> new_words;
  bool operator==(const ValueDecl&) const = default;
};

struct Recipe {
  std::string id;
  Arity arity = Arity::Singleton;
  std::vector<ValueDecl> values;
  std::vector<Step> steps;
  // PM contents present before the recipe runs (besides the old values).
  std::vector<std::pair<std::uint32_t, Word>> initial_pm;

  const ValueDecl& value(const std::string& name) const;
  bool operator==(const Recipe&) const = default;
};

/// The log used by every workload: a committed record at the log base, the
/// appended record `a` right after it, and for compound updates the
/// committed-tail word `b`.
struct Workload {
  std::uint32_t log_base = 0;
  std::uint32_t log_capacity = 48;
  std::uint32_t tail_index = 64;
  std::size_t append_payload = 8;
};

/// Declared values and pre-existing PM contents for a workload. `a` is a
/// framed log record; `b` (compound only) is the tail index that commits it.
void install_workload(Recipe& recipe, const Workload& workload = {});

// Step constructors.
Step rq_post(OpKind kind, std::vector<std::string> values = {}, bool address_only = false);
Step rq_wait_completion(int ref);
Step rsp_receive(std::vector<std::string> values, bool address_only);
Step rsp_copy(std::vector<std::string> values);
Step rsp_flush(std::vector<std::string> values);
Step rsp_ack();
Step rq_receive_ack();
Step assert_persisted(std::vector<std::string> values);

/// Table notation for one step; `recipe` supplies context for Comp_ refs.
std::string format_step(const Recipe& recipe, std::size_t index);
std::string format_recipe(const Recipe& recipe);

/// Parses the one-step-per-line notation produced by format_recipe. The
/// returned recipe has no values installed.
std::vector<Step> parse_steps(const std::string& text);

std::vector<std::string> validate_recipe(const Recipe& recipe);

struct Mutation {
  enum class Kind : std::uint8_t { DropStep, UnfenceOrDeAtomize, SkipWait, ReorderAdjacent };
  Kind kind;
  std::size_t index;
};

std::string to_string(const Mutation& m);

/// Applies a mutation; throws RecipeError if the index does not fit the
/// mutation kind or the result fails validation.
Recipe mutate(const Recipe& recipe, const Mutation& mutation);

/// Every mutation of `recipe` that yields a valid recipe.
std::vector<Mutation> valid_mutations(const Recipe& recipe);

}  // namespace rpmem
