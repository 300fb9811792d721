#pragma once

// Reliable-connection queue pair between one requester and one responder,
// driven by a recipe. The engine is immutable; all mutable state lives in
// MachineState values.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rpmem/config.hpp"
#include "rpmem/log_record.hpp"
#include "rpmem/memory_model.hpp"
#include "rpmem/recipe.hpp"

namespace rpmem {

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorkRequest {
  std::uint32_t id = 0;
  OpKind kind = OpKind::Write;
  std::optional<Address> target;  // absent for Send, Flush and Read
  Bytes payload;
  std::optional<std::uint32_t> immediate;
  bool fenced = false;
  bool signaled = false;
};

/// Throws EngineError on a malformed request (e.g. an oversized Write_atomic).
void validate_work_request(const WorkRequest& wr);

enum class Phase : std::uint8_t { PostedAtRequester, AtRequesterTransport, AtResponderRNIC, Executed, Responded };
std::string to_string(Phase p);

struct RqwrbDescriptor {
  Address buffer;
  std::uint32_t length = 0;
  std::uint16_t request = 0;  // work request that will consume it
};

inline constexpr std::uint32_t kRqwrbBase = 4096;
inline constexpr std::uint32_t kRqwrbSlotBytes = 64;

struct RequestSlot {
  std::uint16_t wr = 0;  // index into Engine::work_requests()
  Phase phase = Phase::PostedAtRequester;
  std::int16_t rqwrb_slot = -1;
  bool operator==(const RequestSlot&) const = default;
};

struct MachineState {
  std::uint16_t requester_pc = 0;
  std::uint16_t responder_pc = 0;
  std::vector<RequestSlot> send_queue;  // posting order; index = owner tag of carried units
  std::uint16_t rqwrb_bound = 0;        // descriptors consumed by arriving messages
  std::uint16_t receives_taken = 0;     // receive completions consumed by the responder
  std::uint16_t acks_sent = 0;
  std::uint16_t acks_taken = 0;
  MemorySystem memory;

  /// Canonical encoding of everything that determines future behaviour and recovery.
  std::string key() const;
};

enum class EventKind : std::uint8_t {
  RequesterStep,
  ResponderStep,
  Transmit,
  Deliver,
  Execute,
  Respond,
  IioDrain,
  Evict,
  ImcDrain,
};

struct Event {
  EventKind kind;
  std::uint32_t arg = 0;  // request index for wire events, unit index for memory events
  bool operator==(const Event&) const = default;
};

struct EngineOptions {
  bool flush_via_read = false;  // post Read wherever the recipe posts Flush
  bool imc_drains = true;       // explore IMC -> DIMM drains
};

class Engine {
 public:
  Engine(ServerConfig config, Recipe recipe, EngineOptions options = {});

  const ServerConfig& config() const { return config_; }
  const Recipe& recipe() const { return recipe_; }
  const std::vector<WorkRequest>& work_requests() const { return wrs_; }
  const std::vector<RqwrbDescriptor>& descriptors() const { return descriptors_; }

  MachineState initial_state() const;

  /// Legal next transitions in canonical order.
  std::vector<Event> enabled_events(const MachineState& s) const;
  bool is_enabled(const MachineState& s, const Event& e) const;

  /// Deterministic successor; throws EngineError if `e` is not enabled.
  MachineState apply_event(const MachineState& s, const Event& e) const;
  void apply_in_place(MachineState& s, const Event& e) const;

  /// Appends a request from the recipe's table to the send queue.
  void post_work_request(MachineState& s, const WorkRequest& wr) const;

  bool completion_ready(const MachineState& s, std::uint32_t id) const;

  /// The requester has passed every wait before ASSERT-PERSISTED.
  bool marker_reached(const MachineState& s) const;

  std::string describe(const MachineState& s, const Event& e) const;

  /// Requester program as recipe step indices (marker included).
  const std::vector<std::size_t>& requester_program() const { return rq_program_; }
  const std::vector<std::size_t>& responder_program() const { return rsp_program_; }

 private:
  bool requester_step_enabled(const MachineState& s) const;
  bool responder_step_enabled(const MachineState& s) const;
  bool transmit_enabled(const MachineState& s, std::size_t i) const;
  bool deliver_enabled(const MachineState& s, std::size_t i) const;
  bool execute_enabled(const MachineState& s, std::size_t i) const;
  bool respond_enabled(const MachineState& s, std::size_t i) const;
  bool iio_drain_enabled(const MachineState& s, std::size_t unit) const;
  bool has_unlanded(const MachineState& s, std::size_t max_owner_inclusive) const;
  bool owner_unlanded(const MachineState& s, std::size_t owner) const;
  std::size_t wr_index_by_id(std::uint32_t id) const;

  ServerConfig config_;
  Recipe recipe_;
  EngineOptions options_;
  std::vector<WorkRequest> wrs_;
  std::vector<int> wr_of_step_;  // recipe step -> work request index, -1 for non-posts
  std::vector<std::size_t> rq_program_;
  std::vector<std::size_t> rsp_program_;
  std::vector<RqwrbDescriptor> descriptors_;
};

// Update-message payload carried by Send: a sequence of entries, each an
// 8-byte header (offset:32 | units:16 | flags:16, bit 0 = data present)
// followed by the data units when present.
struct UpdateEntry {
  std::uint32_t offset = 0;
  std::vector<Word> data;  // empty for address-only entries
  std::uint16_t units = 0;
  bool operator==(const UpdateEntry&) const = default;
};

Bytes encode_update_message(const std::vector<UpdateEntry>& entries);
std::optional<std::vector<UpdateEntry>> decode_update_message(const Bytes& payload);

}  // namespace rpmem
