#include <doctest.h>

#include <random>

#include "rpmem/catalog.hpp"
#include "rpmem/engine.hpp"

using namespace rpmem;

namespace {

Engine make(const ServerConfig& c, const std::string& text, Arity arity = Arity::Singleton, EngineOptions o = {}) {
  Recipe r;
  r.id = "test";
  r.arity = arity;
  r.steps = parse_steps(text);
  install_workload(r);
  return Engine(c, r, o);
}

bool enabled(const Engine& e, const MachineState& s, EventKind k, std::uint32_t arg) {
  auto ev = e.enabled_events(s);
  return std::find(ev.begin(), ev.end(), Event{k, arg}) != ev.end();
}

void fire(const Engine& e, MachineState& s, EventKind k, std::uint32_t arg = 0) {
  if (k == EventKind::RequesterStep) arg = s.requester_pc;
  if (k == EventKind::ResponderStep) arg = s.responder_pc;
  e.apply_in_place(s, Event{k, arg});
}

std::size_t in_flight(const MachineState& s) {
  std::size_t n = 0;
  for (const auto& u : s.memory.units())
    if (u.stage == Stage::ResponderRNIC || u.stage == Stage::IIOBuffer) ++n;
  return n;
}

const ServerConfig kWspIb{PersistenceDomain::WSP, true, Region::DRAM, Transport::InfiniBandRoCE};
const ServerConfig kMhp{PersistenceDomain::MHP, true, Region::DRAM, Transport::InfiniBandRoCE};

}  // namespace

TEST_SUITE("rdma-engine") {
  TEST_CASE("malformed work requests are rejected") {
    WorkRequest wa{1, OpKind::WriteAtomic, Address{Region::PM, 0}, Bytes(16, 1)};
    CHECK_THROWS_AS(validate_work_request(wa), EngineError);
    wa.payload.resize(8);
    CHECK_NOTHROW(validate_work_request(wa));
    CHECK_THROWS_AS(validate_work_request(WorkRequest{1, OpKind::Write, std::nullopt, Bytes(8)}), EngineError);
    CHECK_THROWS_AS(validate_work_request(WorkRequest{1, OpKind::Write, Address{Region::PM, 4}, Bytes(8)}), EngineError);
    CHECK_THROWS_AS(validate_work_request(WorkRequest{1, OpKind::Write, Address{Region::PM, 0}, Bytes(8), 3u}),
                    EngineError);
    CHECK_THROWS_AS(validate_work_request(WorkRequest{1, OpKind::WriteImm, Address{Region::PM, 0}, Bytes(8)}),
                    EngineError);
    CHECK_THROWS_AS(validate_work_request(WorkRequest{1, OpKind::Send, Address{Region::PM, 0}, Bytes(8)}), EngineError);
    CHECK_THROWS_AS(validate_work_request(WorkRequest{1, OpKind::Flush, std::nullopt, Bytes(8)}), EngineError);
  }

  TEST_CASE("update messages round-trip") {
    std::vector<UpdateEntry> entries = {{16, {1, 2}, 2}, {64, {}, 1}};
    auto back = decode_update_message(encode_update_message(entries));
    REQUIRE(back);
    CHECK(*back == entries);
    Bytes bad = encode_update_message({{0, {}, 1}});
    bad[6] = 7;  // flags
    CHECK_FALSE(decode_update_message(bad));
    Bytes truncated = encode_update_message({{0, {5, 6}, 2}});
    truncated.resize(16);
    CHECK_FALSE(decode_update_message(truncated));
  }

  TEST_CASE("requests leave the requester in posting order") {
    Engine e = make(kWspIb, "Rq Write(a)\nRq Write(b)\nRq Comp_Write(b)\nASSERT-PERSISTED(a,b)\n", Arity::Compound);
    MachineState s = e.initial_state();
    fire(e, s, EventKind::RequesterStep);
    fire(e, s, EventKind::RequesterStep);
    CHECK(enabled(e, s, EventKind::Transmit, 0));
    CHECK_FALSE(enabled(e, s, EventKind::Transmit, 1));
    fire(e, s, EventKind::Transmit, 0);
    CHECK(enabled(e, s, EventKind::Transmit, 1));
    fire(e, s, EventKind::Transmit, 1);
    CHECK(enabled(e, s, EventKind::Deliver, 0));
    CHECK_FALSE(enabled(e, s, EventKind::Deliver, 1));
    fire(e, s, EventKind::Deliver, 0);
    fire(e, s, EventKind::Deliver, 1);
    // Posted operations execute in order.
    CHECK(enabled(e, s, EventKind::Execute, 0));
    CHECK_FALSE(enabled(e, s, EventKind::Execute, 1));
    CHECK_THROWS_AS(fire(e, s, EventKind::Execute, 1), EngineError);
  }

  TEST_CASE("completion of a posted write: responder RNIC on IB, local transport on iWARP") {
    const std::string text = "Rq Write(a)\nRq Comp_Write(a)\nASSERT-PERSISTED(a)\n";
    Engine ib = make(kWspIb, text);
    MachineState s = ib.initial_state();
    fire(ib, s, EventKind::RequesterStep);
    CHECK_FALSE(ib.completion_ready(s, 1));
    fire(ib, s, EventKind::Transmit, 0);
    CHECK_FALSE(ib.completion_ready(s, 1));
    fire(ib, s, EventKind::Deliver, 0);
    CHECK(ib.completion_ready(s, 1));

    ServerConfig iw = kWspIb;
    iw.transport = Transport::iWARP;
    Engine w = make(iw, text);
    MachineState t = w.initial_state();
    fire(w, t, EventKind::RequesterStep);
    fire(w, t, EventKind::Transmit, 0);
    CHECK(w.completion_ready(t, 1));
    CHECK(in_flight(t) == 0);  // nothing has reached the responder yet
  }

  TEST_CASE("Flush waits for earlier requests and lands their data") {
    Engine e = make(kMhp, "Rq Write(a)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a)\n");
    MachineState s = e.initial_state();
    fire(e, s, EventKind::RequesterStep);
    fire(e, s, EventKind::RequesterStep);
    fire(e, s, EventKind::Transmit, 0);
    fire(e, s, EventKind::Transmit, 1);
    fire(e, s, EventKind::Deliver, 0);
    fire(e, s, EventKind::Deliver, 1);
    CHECK_FALSE(enabled(e, s, EventKind::Execute, 1));
    CHECK(in_flight(s) == 2);
    fire(e, s, EventKind::Execute, 0);
    CHECK(enabled(e, s, EventKind::Execute, 1));
    CHECK_FALSE(e.completion_ready(s, 2));
    fire(e, s, EventKind::Execute, 1);
    CHECK(in_flight(s) == 0);
    for (const auto& u : s.memory.units()) {
      CHECK(u.stage == Stage::L3Cache);
      CHECK(u.dirty);
    }
    CHECK_FALSE(e.completion_ready(s, 2));
    fire(e, s, EventKind::Respond, 1);
    CHECK(e.completion_ready(s, 2));
  }

  TEST_CASE("Read can stand in for Flush") {
    Engine e = make(kMhp, "Rq Write(a)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a)\n", Arity::Singleton,
                    EngineOptions{true, true});
    CHECK(e.work_requests()[1].kind == OpKind::Read);
  }

  TEST_CASE("Write_atomic responds only after its own data lands") {
    ServerConfig c{PersistenceDomain::DMP, false, Region::DRAM, Transport::InfiniBandRoCE};
    Engine e = make(c, "Rq Write(a)\nRq Flush\nRq Write_atomic(b)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a,b)\n",
                    Arity::Compound);
    MachineState s = e.initial_state();
    for (int i = 0; i < 3; ++i) fire(e, s, EventKind::RequesterStep);
    for (std::uint32_t i = 0; i < 3; ++i) fire(e, s, EventKind::Transmit, i);
    for (std::uint32_t i = 0; i < 3; ++i) fire(e, s, EventKind::Deliver, i);
    fire(e, s, EventKind::Execute, 0);
    fire(e, s, EventKind::Execute, 1);
    fire(e, s, EventKind::Execute, 2);
    CHECK(in_flight(s) == 1);
    CHECK_FALSE(enabled(e, s, EventKind::Respond, 2));
    auto ev = e.enabled_events(s);
    auto drain = std::find_if(ev.begin(), ev.end(), [](const Event& x) { return x.kind == EventKind::IioDrain; });
    REQUIRE(drain != ev.end());
    e.apply_in_place(s, *drain);
    CHECK(enabled(e, s, EventKind::Respond, 2));
  }

  TEST_CASE("IIO drains a request's units in address order") {
    Engine e = make(kMhp, "Rq Write(a)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a)\n");
    MachineState s = e.initial_state();
    fire(e, s, EventKind::RequesterStep);
    fire(e, s, EventKind::Transmit, 0);
    fire(e, s, EventKind::Deliver, 0);
    fire(e, s, EventKind::Execute, 0);
    std::vector<Event> drains;
    for (const auto& x : e.enabled_events(s))
      if (x.kind == EventKind::IioDrain) drains.push_back(x);
    REQUIRE(drains.size() == 1);
    CHECK(s.memory.units()[drains[0].arg].home.offset == 16);
  }

  TEST_CASE("a receive completes only after the message and everything before it is visible") {
    ServerConfig c{PersistenceDomain::DMP, true, Region::DRAM, Transport::InfiniBandRoCE};
    Engine e = make(c, "Rq Write(a)\nRq Send(&a)\nRsp Receive(&a)\nRsp flush(&a)\nRsp Send(ack)\nRq Receive(ack)\n"
                       "ASSERT-PERSISTED(a)\n");
    MachineState s = e.initial_state();
    fire(e, s, EventKind::RequesterStep);
    fire(e, s, EventKind::RequesterStep);
    fire(e, s, EventKind::Transmit, 0);
    fire(e, s, EventKind::Transmit, 1);
    fire(e, s, EventKind::Deliver, 0);
    fire(e, s, EventKind::Deliver, 1);
    CHECK(s.rqwrb_bound == 1);
    fire(e, s, EventKind::Execute, 0);
    fire(e, s, EventKind::Execute, 1);
    CHECK_FALSE(enabled(e, s, EventKind::ResponderStep, 0));
    while (in_flight(s) > 0) {
      CHECK_FALSE(enabled(e, s, EventKind::ResponderStep, 0));
      auto ev = e.enabled_events(s);
      auto drain = std::find_if(ev.begin(), ev.end(), [](const Event& x) { return x.kind == EventKind::IioDrain; });
      REQUIRE(drain != ev.end());
      e.apply_in_place(s, *drain);
    }
    CHECK(enabled(e, s, EventKind::ResponderStep, 0));
    // The ack is what releases the requester.
    CHECK_FALSE(enabled(e, s, EventKind::RequesterStep, 2));
    fire(e, s, EventKind::ResponderStep);
    fire(e, s, EventKind::ResponderStep);
    fire(e, s, EventKind::ResponderStep);
    CHECK(s.acks_sent == 1);
    CHECK(enabled(e, s, EventKind::RequesterStep, 2));
    fire(e, s, EventKind::RequesterStep);
    CHECK(e.marker_reached(s));
  }

  TEST_CASE("WriteImm places its immediate in the receive buffer") {
    ServerConfig c{PersistenceDomain::WSP, false, Region::PM, Transport::InfiniBandRoCE};
    Engine e = make(c, "Rq WriteImm(a)\nRq Comp_WriteImm(a)\nASSERT-PERSISTED(a)\n");
    REQUIRE(e.descriptors().size() == 1);
    CHECK(e.descriptors()[0].buffer == Address{Region::PM, kRqwrbBase});
    MachineState s = e.initial_state();
    fire(e, s, EventKind::RequesterStep);
    fire(e, s, EventKind::Transmit, 0);
    fire(e, s, EventKind::Deliver, 0);
    bool found = false;
    for (const auto& u : s.memory.units())
      if (u.home == Address{Region::PM, kRqwrbBase}) {
        found = true;
        CHECK(u.value == 16);
      }
    CHECK(found);
  }

  TEST_CASE("work-request bookkeeping errors") {
    Engine e = make(kWspIb, "Rq Write(a)\nRq Comp_Write(a)\nASSERT-PERSISTED(a)\n");
    MachineState s = e.initial_state();
    fire(e, s, EventKind::RequesterStep);
    CHECK_THROWS_AS(e.post_work_request(s, e.work_requests()[0]), EngineError);
    WorkRequest ghost = e.work_requests()[0];
    ghost.id = 99;
    CHECK_THROWS_AS(e.post_work_request(s, ghost), EngineError);
    CHECK_THROWS_AS(e.completion_ready(s, 99), EngineError);

    Engine u = make(kWspIb, "Rq Write(a)\nRq Write(b)\nRq Comp_Write(b)\nASSERT-PERSISTED(a,b)\n", Arity::Compound);
    CHECK_THROWS_AS(u.completion_ready(u.initial_state(), 1), EngineError);
  }

  TEST_CASE("random walks: transitions are deterministic and catalog recipes run to completion") {
    std::mt19937_64 rng(23);
    for (const auto& c : enumerate_configs())
      for (auto p : {Primitive::Write, Primitive::WriteImm, Primitive::Send})
        for (auto a : {Arity::Singleton, Arity::Compound}) {
          Engine e(c, select_recipe(c, p, a));
          for (int walk = 0; walk < 20; ++walk) {
            MachineState s = e.initial_state();
            for (;;) {
              auto ev = e.enabled_events(s);
              if (ev.empty()) break;
              const Event& pick = ev[rng() % ev.size()];
              CHECK(e.is_enabled(s, pick));
              MachineState x = e.apply_event(s, pick);
              MachineState y = e.apply_event(s, pick);
              CHECK(x.key() == y.key());
              s = std::move(x);
            }
            CHECK(e.marker_reached(s));
            CHECK(s.responder_pc == e.responder_program().size());
            CHECK(in_flight(s) == 0);
          }
        }
  }
}
