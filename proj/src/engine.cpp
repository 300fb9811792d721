#include "rpmem/engine.hpp"

#include <algorithm>
#include <sstream>

namespace rpmem {

std::string to_string(Phase p) {
  switch (p) {
    case Phase::PostedAtRequester: return "PostedAtRequester";
    case Phase::AtRequesterTransport: return "AtRequesterTransport";
    case Phase::AtResponderRNIC: return "AtResponderRNIC";
    case Phase::Executed: return "Executed";
    case Phase::Responded: return "Responded";
  }
  return "?";
}

void validate_work_request(const WorkRequest& wr) {
  switch (wr.kind) {
    case OpKind::WriteAtomic:
      if (wr.payload.size() > 8) throw EngineError("Write_atomic payload of " + std::to_string(wr.payload.size()) + " bytes exceeds 8");
      [[fallthrough]];
    case OpKind::Write:
      if (!wr.target) throw EngineError(to_string(wr.kind) + " without a target");
      if (wr.immediate) throw EngineError("immediate data on a non-WriteImm request");
      break;
    case OpKind::WriteImm:
      if (!wr.target) throw EngineError("WriteImm without a target");
      if (!wr.immediate) throw EngineError("WriteImm without immediate data");
      break;
    case OpKind::Send:
      if (wr.target) throw EngineError("Send names a target; the receive buffer chooses it");
      if (wr.immediate) throw EngineError("immediate data on a Send");
      break;
    case OpKind::Read:
    case OpKind::Flush:
      if (!wr.payload.empty()) throw EngineError(to_string(wr.kind) + " carries no payload");
      break;
  }
  if (wr.target && wr.target->offset % kUnitBytes != 0) throw EngineError("unaligned target");
}

Bytes encode_update_message(const std::vector<UpdateEntry>& entries) {
  std::vector<Word> words;
  for (const auto& e : entries) {
    Word flags = e.data.empty() ? 0 : 1;
    std::uint16_t units = e.data.empty() ? e.units : static_cast<std::uint16_t>(e.data.size());
    words.push_back(Word(e.offset) | Word(units) << 32 | flags << 48);
    words.insert(words.end(), e.data.begin(), e.data.end());
  }
  return from_words(words);
}

std::optional<std::vector<UpdateEntry>> decode_update_message(const Bytes& payload) {
  if (payload.size() % kUnitBytes != 0) return std::nullopt;
  auto words = to_words(payload);
  std::vector<UpdateEntry> out;
  std::size_t i = 0;
  while (i < words.size()) {
    Word h = words[i++];
    UpdateEntry e;
    e.offset = static_cast<std::uint32_t>(h);
    e.units = static_cast<std::uint16_t>(h >> 32);
    Word flags = h >> 48;
    if (flags > 1) return std::nullopt;
    if (flags == 1) {
      if (i + e.units > words.size()) return std::nullopt;
      e.data.assign(words.begin() + static_cast<std::ptrdiff_t>(i), words.begin() + static_cast<std::ptrdiff_t>(i + e.units));
      i += e.units;
    }
    out.push_back(e);
  }
  return out;
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string where(Address a) { return to_string(a.region) + "+" + std::to_string(a.offset); }

}  // namespace

std::string MachineState::key() const {
  std::string out;
  out.reserve(64 + memory.units().size() * 24);
  put<std::uint16_t>(out, requester_pc);
  put<std::uint16_t>(out, responder_pc);
  put<std::uint16_t>(out, rqwrb_bound);
  put<std::uint16_t>(out, receives_taken);
  put<std::uint16_t>(out, acks_sent);
  put<std::uint16_t>(out, acks_taken);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(send_queue.size()));
  for (const auto& r : send_queue) {
    put<std::uint16_t>(out, r.wr);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.phase));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(r.rqwrb_slot));
  }
  memory.append_key(out);
  return out;
}

Engine::Engine(ServerConfig config, Recipe recipe, EngineOptions options)
    : config_(config), recipe_(std::move(recipe)), options_(options) {
  auto diag = validate_recipe(recipe_);
  if (!diag.empty()) throw RecipeError("recipe " + recipe_.id + " is invalid: " + diag.front());
  if (recipe_.values.empty()) throw RecipeError("recipe " + recipe_.id + " has no declared values");

  wr_of_step_.assign(recipe_.steps.size(), -1);
  for (std::size_t i = 0; i < recipe_.steps.size(); ++i) {
    const Step& s = recipe_.steps[i];
    (s.actor == Actor::Requester ? rq_program_ : rsp_program_).push_back(i);
    if (s.action != Action::Post) continue;
    const PostSpec& p = s.post;
    WorkRequest wr;
    wr.id = static_cast<std::uint32_t>(wrs_.size() + 1);
    wr.kind = p.kind;
    if (wr.kind == OpKind::Flush && options_.flush_via_read) wr.kind = OpKind::Read;
    wr.fenced = p.fenced;
    wr.signaled = p.signaled;
    switch (p.kind) {
      case OpKind::Write:
      case OpKind::WriteImm:
      case OpKind::WriteAtomic: {
        const ValueDecl& v = recipe_.value(p.values.at(0));
        wr.target = v.target;
        wr.payload = from_words(v.new_words);
        if (p.kind == OpKind::WriteImm) wr.immediate = v.target.offset;
        break;
      }
      case OpKind::Send: {
        std::vector<UpdateEntry> entries;
        for (const auto& name : p.values) {
          const ValueDecl& v = recipe_.value(name);
          UpdateEntry e;
          e.offset = v.target.offset;
          e.units = static_cast<std::uint16_t>(v.new_words.size());
          if (!p.address_only) e.data = v.new_words;
          entries.push_back(e);
        }
        wr.payload = encode_record(encode_update_message(entries), kRqwrbSlotBytes);
        break;
      }
      case OpKind::Read:
      case OpKind::Flush: break;
    }
    validate_work_request(wr);
    if (consumes_receive(wr.kind)) {
      RqwrbDescriptor d;
      d.buffer = Address{config_.rqwrb_region,
                         kRqwrbBase + static_cast<std::uint32_t>(descriptors_.size()) * kRqwrbSlotBytes};
      d.length = kRqwrbSlotBytes;
      d.request = static_cast<std::uint16_t>(wrs_.size());
      descriptors_.push_back(d);
    }
    wr_of_step_[i] = static_cast<int>(wrs_.size());
    wrs_.push_back(std::move(wr));
  }
}

MachineState Engine::initial_state() const {
  MachineState s;
  for (const auto& [off, w] : recipe_.initial_pm) s.memory.set_initial_pm(off, w);
  for (const auto& v : recipe_.values) {
    if (v.target.region != Region::PM) throw RecipeError("value " + v.name + " is not homed in PM");
    for (std::size_t i = 0; i < v.old_words.size(); ++i) s.memory.set_initial_pm(v.target.plus_units(i).offset, v.old_words[i]);
  }
  return s;
}

std::size_t Engine::wr_index_by_id(std::uint32_t id) const {
  for (std::size_t i = 0; i < wrs_.size(); ++i)
    if (wrs_[i].id == id) return i;
  throw EngineError("unknown work request id " + std::to_string(id));
}

bool Engine::completion_ready(const MachineState& s, std::uint32_t id) const {
  std::size_t w = wr_index_by_id(id);
  if (!wrs_[w].signaled) throw EngineError("completion requested for unsignaled request " + std::to_string(id));
  for (const auto& slot : s.send_queue) {
    if (slot.wr != w) continue;
    if (!is_posted(wrs_[w].kind)) return slot.phase == Phase::Responded;
    Phase needed = config_.transport == Transport::iWARP ? Phase::AtRequesterTransport : Phase::AtResponderRNIC;
    return slot.phase >= needed;
  }
  return false;
}

bool Engine::marker_reached(const MachineState& s) const {
  return s.requester_pc + 1u == rq_program_.size() &&
         recipe_.steps[rq_program_.back()].action == Action::AssertPersisted;
}

bool Engine::has_unlanded(const MachineState& s, std::size_t max_owner) const {
  for (const auto& u : s.memory.units())
    if ((u.stage == Stage::ResponderRNIC || u.stage == Stage::IIOBuffer) && u.owner <= max_owner) return true;
  return false;
}

bool Engine::owner_unlanded(const MachineState& s, std::size_t owner) const {
  for (const auto& u : s.memory.units())
    if ((u.stage == Stage::ResponderRNIC || u.stage == Stage::IIOBuffer) && u.owner == owner) return true;
  return false;
}

bool Engine::requester_step_enabled(const MachineState& s) const {
  if (s.requester_pc >= rq_program_.size()) return false;
  const Step& st = recipe_.steps[rq_program_[s.requester_pc]];
  switch (st.action) {
    case Action::Post: return true;
    case Action::WaitCompletion: return completion_ready(s, wrs_[wr_of_step_[st.ref]].id);
    case Action::WaitAck: return s.acks_sent > s.acks_taken;
    default: return false;
  }
}

bool Engine::responder_step_enabled(const MachineState& s) const {
  if (s.responder_pc >= rsp_program_.size()) return false;
  const Step& st = recipe_.steps[rsp_program_[s.responder_pc]];
  if (st.action != Action::WaitReceive) return true;
  // A receive completion is generated only once the message is visible, and
  // PCIe ordering keeps it behind every earlier posted write.
  if (s.receives_taken >= s.rqwrb_bound) return false;
  std::size_t owner = 0;
  bool found = false;
  for (std::size_t i = 0; i < s.send_queue.size(); ++i) {
    if (s.send_queue[i].rqwrb_slot == static_cast<int>(s.receives_taken)) {
      owner = i;
      found = true;
      break;
    }
  }
  if (!found || s.send_queue[owner].phase < Phase::Executed) return false;
  return !has_unlanded(s, owner);
}

bool Engine::transmit_enabled(const MachineState& s, std::size_t i) const {
  const auto& q = s.send_queue;
  if (q[i].phase != Phase::PostedAtRequester) return false;
  if (i > 0 && q[i - 1].phase == Phase::PostedAtRequester) return false;
  if (wrs_[q[i].wr].fenced) {
    for (std::size_t j = 0; j < i; ++j)
      if (!is_posted(wrs_[q[j].wr].kind) && q[j].phase != Phase::Responded) return false;
  }
  return true;
}

bool Engine::deliver_enabled(const MachineState& s, std::size_t i) const {
  const auto& q = s.send_queue;
  if (q[i].phase != Phase::AtRequesterTransport) return false;
  if (i > 0 && q[i - 1].phase < Phase::AtResponderRNIC) return false;
  if (consumes_receive(wrs_[q[i].wr].kind) && s.rqwrb_bound >= descriptors_.size()) return false;
  return true;
}

bool Engine::execute_enabled(const MachineState& s, std::size_t i) const {
  const auto& q = s.send_queue;
  if (q[i].phase != Phase::AtResponderRNIC) return false;
  bool posted = is_posted(wrs_[q[i].wr].kind);
  for (std::size_t j = 0; j < i; ++j) {
    if (posted && !is_posted(wrs_[q[j].wr].kind)) continue;
    if (q[j].phase < Phase::Executed) return false;
  }
  return true;
}

bool Engine::respond_enabled(const MachineState& s, std::size_t i) const {
  const auto& q = s.send_queue;
  if (q[i].phase != Phase::Executed || is_posted(wrs_[q[i].wr].kind)) return false;
  return !owner_unlanded(s, i);
}

bool Engine::iio_drain_enabled(const MachineState& s, std::size_t unit) const {
  const auto& units = s.memory.units();
  const DataUnit& u = units[unit];
  if (u.stage != Stage::IIOBuffer) return false;
  for (const auto& o : units)
    if (o.stage == Stage::IIOBuffer && o.owner == u.owner && o.home < u.home) return false;
  return true;
}

std::vector<Event> Engine::enabled_events(const MachineState& s) const {
  std::vector<Event> out;
  if (requester_step_enabled(s)) out.push_back({EventKind::RequesterStep, s.requester_pc});
  if (responder_step_enabled(s)) out.push_back({EventKind::ResponderStep, s.responder_pc});
  const std::size_t n = s.send_queue.size();
  for (std::size_t i = 0; i < n; ++i)
    if (transmit_enabled(s, i)) out.push_back({EventKind::Transmit, static_cast<std::uint32_t>(i)});
  for (std::size_t i = 0; i < n; ++i)
    if (deliver_enabled(s, i)) out.push_back({EventKind::Deliver, static_cast<std::uint32_t>(i)});
  for (std::size_t i = 0; i < n; ++i)
    if (execute_enabled(s, i)) out.push_back({EventKind::Execute, static_cast<std::uint32_t>(i)});
  for (std::size_t i = 0; i < n; ++i)
    if (respond_enabled(s, i)) out.push_back({EventKind::Respond, static_cast<std::uint32_t>(i)});
  const auto& units = s.memory.units();
  for (std::size_t u = 0; u < units.size(); ++u)
    if (iio_drain_enabled(s, u)) out.push_back({EventKind::IioDrain, static_cast<std::uint32_t>(u)});
  for (const auto& m : spontaneous_eviction_events(s.memory))
    out.push_back({EventKind::Evict, static_cast<std::uint32_t>(m.unit)});
  if (options_.imc_drains)
    for (const auto& m : imc_drain_events(s.memory))
      out.push_back({EventKind::ImcDrain, static_cast<std::uint32_t>(m.unit)});
  return out;
}

bool Engine::is_enabled(const MachineState& s, const Event& e) const {
  const std::size_t n = s.send_queue.size();
  const std::size_t nu = s.memory.units().size();
  switch (e.kind) {
    case EventKind::RequesterStep: return e.arg == s.requester_pc && requester_step_enabled(s);
    case EventKind::ResponderStep: return e.arg == s.responder_pc && responder_step_enabled(s);
    case EventKind::Transmit: return e.arg < n && transmit_enabled(s, e.arg);
    case EventKind::Deliver: return e.arg < n && deliver_enabled(s, e.arg);
    case EventKind::Execute: return e.arg < n && execute_enabled(s, e.arg);
    case EventKind::Respond: return e.arg < n && respond_enabled(s, e.arg);
    case EventKind::IioDrain: return e.arg < nu && iio_drain_enabled(s, e.arg);
    case EventKind::Evict: {
      auto ev = spontaneous_eviction_events(s.memory);
      return std::find(ev.begin(), ev.end(), MemoryEvent{MemoryEventKind::Evict, e.arg}) != ev.end();
    }
    case EventKind::ImcDrain: {
      if (!options_.imc_drains) return false;
      auto ev = imc_drain_events(s.memory);
      return std::find(ev.begin(), ev.end(), MemoryEvent{MemoryEventKind::Drain, e.arg}) != ev.end();
    }
  }
  return false;
}

void Engine::post_work_request(MachineState& s, const WorkRequest& wr) const {
  validate_work_request(wr);
  std::size_t w = wr_index_by_id(wr.id);
  for (const auto& slot : s.send_queue)
    if (slot.wr == w) throw EngineError("work request " + std::to_string(wr.id) + " posted twice");
  s.send_queue.push_back(RequestSlot{static_cast<std::uint16_t>(w), Phase::PostedAtRequester, -1});
}

MachineState Engine::apply_event(const MachineState& s, const Event& e) const {
  MachineState next = s;
  apply_in_place(next, e);
  return next;
}

void Engine::apply_in_place(MachineState& s, const Event& e) const {
  if (!is_enabled(s, e)) throw EngineError("event is not enabled: " + describe(s, e));
  auto& q = s.send_queue;
  switch (e.kind) {
    case EventKind::RequesterStep: {
      std::size_t idx = rq_program_[s.requester_pc];
      const Step& st = recipe_.steps[idx];
      if (st.action == Action::Post) post_work_request(s, wrs_[wr_of_step_[idx]]);
      if (st.action == Action::WaitAck) ++s.acks_taken;
      ++s.requester_pc;
      break;
    }
    case EventKind::ResponderStep: {
      const Step& st = recipe_.steps[rsp_program_[s.responder_pc]];
      switch (st.action) {
        case Action::WaitReceive: ++s.receives_taken; break;
        case Action::CopyToTarget:
          for (const auto& name : st.values) {
            const ValueDecl& v = recipe_.value(name);
            for (std::size_t i = 0; i < v.new_words.size(); ++i) {
              Address home = v.target.plus_units(i);
              s.memory.place(DataUnit{home, v.new_words[i], Stage::L3Cache, true, s.memory.next_version(home), kNoOwner});
            }
          }
          break;
        case Action::LocalFlush:
          for (const auto& name : st.values) {
            const ValueDecl& v = recipe_.value(name);
            responder_local_flush(s.memory, v.target, v.new_words.size() * kUnitBytes);
          }
          break;
        case Action::PostAck: ++s.acks_sent; break;
        default: break;
      }
      ++s.responder_pc;
      break;
    }
    case EventKind::Transmit: q[e.arg].phase = Phase::AtRequesterTransport; break;
    case EventKind::Deliver: {
      RequestSlot& slot = q[e.arg];
      const WorkRequest& wr = wrs_[slot.wr];
      slot.phase = Phase::AtResponderRNIC;
      auto owner = static_cast<std::uint16_t>(e.arg);
      auto deposit = [&](Address base, const std::vector<Word>& words) {
        for (std::size_t i = 0; i < words.size(); ++i) {
          Address home = base.plus_units(i);
          s.memory.place(DataUnit{home, words[i], Stage::ResponderRNIC, false, s.memory.next_version(home), owner});
        }
      };
      if (consumes_receive(wr.kind)) slot.rqwrb_slot = static_cast<std::int16_t>(s.rqwrb_bound++);
      switch (wr.kind) {
        case OpKind::Write:
        case OpKind::WriteAtomic: deposit(*wr.target, to_words(wr.payload)); break;
        case OpKind::WriteImm:
          deposit(*wr.target, to_words(wr.payload));
          deposit(descriptors_[slot.rqwrb_slot].buffer, {Word(*wr.immediate)});
          break;
        case OpKind::Send: deposit(descriptors_[slot.rqwrb_slot].buffer, to_words(wr.payload)); break;
        case OpKind::Read:
        case OpKind::Flush: break;
      }
      break;
    }
    case EventKind::Execute: {
      OpKind kind = wrs_[q[e.arg].wr].kind;
      q[e.arg].phase = Phase::Executed;
      if (kind == OpKind::Flush || kind == OpKind::Read) {
        // Everything earlier on this connection becomes visible.
        for (;;) {
          const auto& units = s.memory.units();
          auto it = std::find_if(units.begin(), units.end(), [&](const DataUnit& u) {
            return (u.stage == Stage::ResponderRNIC || u.stage == Stage::IIOBuffer) && u.owner < e.arg;
          });
          if (it == units.end()) break;
          s.memory.land(static_cast<std::size_t>(it - units.begin()), config_.ddio);
        }
      } else {
        for (;;) {
          const auto& units = s.memory.units();
          auto it = std::find_if(units.begin(), units.end(), [&](const DataUnit& u) {
            return u.stage == Stage::ResponderRNIC && u.owner == e.arg;
          });
          if (it == units.end()) break;
          s.memory.move(static_cast<std::size_t>(it - units.begin()), Stage::IIOBuffer);
        }
      }
      break;
    }
    case EventKind::Respond: q[e.arg].phase = Phase::Responded; break;
    case EventKind::IioDrain: s.memory.land(e.arg, config_.ddio); break;
    case EventKind::Evict: apply_memory_event(s.memory, {MemoryEventKind::Evict, e.arg}); break;
    case EventKind::ImcDrain: apply_memory_event(s.memory, {MemoryEventKind::Drain, e.arg}); break;
  }
}

std::string Engine::describe(const MachineState& s, const Event& e) const {
  auto request = [&](std::uint32_t i) -> std::string {
    if (i >= s.send_queue.size()) return "#" + std::to_string(i) + " ?";
    std::size_t w = s.send_queue[i].wr;
    for (std::size_t st = 0; st < wr_of_step_.size(); ++st)
      if (wr_of_step_[st] == static_cast<int>(w)) {
        std::string text = format_step(recipe_, st).substr(3);
        if (wrs_[w].kind == OpKind::Read && recipe_.steps[st].post.kind == OpKind::Flush) text = "Read (as Flush)";
        return "#" + std::to_string(i) + " " + text;
      }
    return "#" + std::to_string(i);
  };
  auto unit = [&](std::uint32_t u) -> std::string {
    const auto& units = s.memory.units();
    if (u >= units.size()) return "unit ?";
    return where(units[u].home) + " v" + std::to_string(units[u].version);
  };
  switch (e.kind) {
    case EventKind::RequesterStep:
      if (e.arg < rq_program_.size()) return format_step(recipe_, rq_program_[e.arg]);
      return "Rq ?";
    case EventKind::ResponderStep:
      if (e.arg < rsp_program_.size()) return format_step(recipe_, rsp_program_[e.arg]);
      return "Rsp ?";
    case EventKind::Transmit: return "  transmit " + request(e.arg);
    case EventKind::Deliver: return "  arrive at responder RNIC " + request(e.arg);
    case EventKind::Execute: return "  execute " + request(e.arg);
    case EventKind::Respond: return "  response reaches requester " + request(e.arg);
    case EventKind::IioDrain: return "  IIO -> " + std::string(config_.ddio ? "L3" : "IMC") + " " + unit(e.arg);
    case EventKind::Evict: return "  evict L3 -> IMC " + unit(e.arg);
    case EventKind::ImcDrain: return "  drain IMC -> PM DIMM " + unit(e.arg);
  }
  return "?";
}

}  // namespace rpmem
