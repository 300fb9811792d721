#include <doctest.h>

#include <set>

#include "rpmem/catalog.hpp"

using namespace rpmem;

namespace {

ServerConfig cfg(PersistenceDomain d, bool ddio, Region r, Transport t = Transport::InfiniBandRoCE) {
  return ServerConfig{d, ddio, r, t};
}

std::string text(const ServerConfig& c, Primitive p, Arity a, const std::string& variant = "") {
  return format_recipe(select_recipe(c, p, a, variant));
}

constexpr auto DMP = PersistenceDomain::DMP;
constexpr auto MHP = PersistenceDomain::MHP;
constexpr auto WSP = PersistenceDomain::WSP;

}  // namespace

TEST_SUITE("catalog") {
  TEST_CASE("transcription covers every cell") {
    const auto& cells = catalog_cells();
    REQUIRE(cells.size() == 72);
    std::set<std::tuple<int, int, int, bool, int>> keys;
    for (const auto& c : cells) {
      keys.insert({int(c.arity), int(c.domain), int(c.primitive), c.ddio, int(c.rqwrb)});
      CHECK_FALSE(c.text.empty());
    }
    CHECK(keys.size() == 72);
  }

  TEST_CASE("singleton snapshots") {
    CHECK(text(cfg(DMP, true, Region::DRAM), Primitive::Write, Arity::Singleton) ==
          "Rq Write(a)\nRq Send(&a)\nRsp Receive(&a)\nRsp flush(&a)\nRsp Send(ack)\nRq Receive(ack)\n"
          "ASSERT-PERSISTED(a)\n");
    CHECK(text(cfg(DMP, true, Region::DRAM), Primitive::WriteImm, Arity::Singleton) ==
          "Rq WriteImm(a)\nRsp Receive(&a)\nRsp flush(&a)\nRsp Send(ack)\nRq Receive(ack)\nASSERT-PERSISTED(a)\n");
    CHECK(text(cfg(DMP, false, Region::PM), Primitive::Send, Arity::Singleton) ==
          "Rq Send(a)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a)\n");
    CHECK(text(cfg(MHP, true, Region::DRAM), Primitive::Write, Arity::Singleton) ==
          "Rq Write(a)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a)\n");
    CHECK(text(cfg(MHP, false, Region::DRAM), Primitive::Send, Arity::Singleton) ==
          "Rq Send(a)\nRsp Receive(a)\nRsp copy(a)\nRsp Send(ack)\nRq Receive(ack)\nASSERT-PERSISTED(a)\n");
    CHECK(text(cfg(WSP, true, Region::PM), Primitive::Write, Arity::Singleton) ==
          "Rq Write(a)\nRq Comp_Write(a)\nASSERT-PERSISTED(a)\n");
    CHECK(text(cfg(WSP, false, Region::PM), Primitive::Send, Arity::Singleton) ==
          "Rq Send(a)\nRq Comp_Send(a)\nASSERT-PERSISTED(a)\n");
    // The table's "Rsp Send(a) / Rq Receive(a)" in this cell is an acknowledgement.
    CHECK(text(cfg(WSP, false, Region::DRAM), Primitive::Send, Arity::Singleton) ==
          "Rq Send(a)\nRsp Receive(a)\nRsp copy(a)\nRsp Send(ack)\nRq Receive(ack)\nASSERT-PERSISTED(a)\n");
  }

  TEST_CASE("compound snapshots") {
    CHECK(text(cfg(DMP, false, Region::DRAM), Primitive::Write, Arity::Compound) ==
          "Rq Write(a)\nRq Flush\nRq Write_atomic(b)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a,b)\n");
    CHECK(text(cfg(DMP, true, Region::DRAM), Primitive::Send, Arity::Compound) ==
          "Rq Send(a,b)\nRsp Receive(a,b)\nRsp copy(a)\nRsp flush(&a)\nRsp copy(b)\nRsp flush(&b)\nRsp Send(ack)\n"
          "Rq Receive(ack)\nASSERT-PERSISTED(a,b)\n");
    CHECK(text(cfg(MHP, true, Region::DRAM), Primitive::WriteImm, Arity::Compound) ==
          "Rq WriteImm(a)\nRq WriteImm(b)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a,b)\n");
    CHECK(text(cfg(WSP, true, Region::DRAM), Primitive::Write, Arity::Compound) ==
          "Rq Write(a)\nRq Write(b)\nRq Comp_Write(b)\nASSERT-PERSISTED(a,b)\n");
    CHECK(text(cfg(WSP, true, Region::PM), Primitive::Send, Arity::Compound) ==
          "Rq Send(a,b)\nRq Comp_Send(a,b)\nASSERT-PERSISTED(a,b)\n");
  }

  TEST_CASE("\"As above\" cells resolve to the cell they copy") {
    CHECK(recipe_id(cfg(DMP, true, Region::PM), Primitive::Write, Arity::Singleton) ==
          recipe_id(cfg(DMP, true, Region::DRAM), Primitive::Write, Arity::Singleton));
    CHECK(recipe_id(cfg(MHP, false, Region::PM), Primitive::Write, Arity::Compound) ==
          recipe_id(cfg(MHP, true, Region::DRAM), Primitive::Write, Arity::Compound));
    CHECK(recipe_id(cfg(MHP, true, Region::PM), Primitive::Send, Arity::Singleton) !=
          recipe_id(cfg(MHP, true, Region::DRAM), Primitive::Send, Arity::Singleton));
    CHECK(recipe_id(cfg(DMP, true, Region::DRAM), Primitive::Write, Arity::Singleton) == "T2.DMP.WRITE.DDIO-DRAM");
  }

  TEST_CASE("WSP over iWARP uses the MHP recipe") {
    for (auto p : {Primitive::Write, Primitive::WriteImm, Primitive::Send})
      for (auto a : {Arity::Singleton, Arity::Compound})
        for (bool ddio : {true, false})
          for (auto r : {Region::DRAM, Region::PM}) {
            auto iw = select_recipe(cfg(WSP, ddio, r, Transport::iWARP), p, a);
            auto mhp = select_recipe(cfg(MHP, ddio, r), p, a);
            CHECK(iw.steps == mhp.steps);
            CHECK(iw.id == mhp.id);
          }
  }

  TEST_CASE("send-ack variant") {
    auto c = cfg(DMP, false, Region::DRAM);
    CHECK(variant_applies(c, Primitive::Write, kSendAckVariant));
    CHECK_FALSE(variant_applies(c, Primitive::Send, kSendAckVariant));
    CHECK_FALSE(variant_applies(cfg(DMP, true, Region::DRAM), Primitive::Write, kSendAckVariant));
    CHECK(text(c, Primitive::Write, Arity::Singleton, kSendAckVariant) ==
          "Rq Write(a)\nRq Send(&a)\nRsp Receive(&a)\nRsp Send(ack)\nRq Receive(ack)\nASSERT-PERSISTED(a)\n");
    CHECK(select_recipe(c, Primitive::Write, Arity::Singleton, kSendAckVariant).id.ends_with("+send-ack"));
    CHECK_THROWS_AS(select_recipe(c, Primitive::Send, Arity::Singleton, kSendAckVariant), RecipeError);
    CHECK_THROWS_AS(select_recipe(c, Primitive::Write, Arity::Singleton, "bogus"), RecipeError);
  }

  TEST_CASE("named mutants") {
    auto mhp = select_recipe(cfg(MHP, true, Region::DRAM), Primitive::Write, Arity::Singleton);
    auto m = apply_named_mutant(mhp, "drop-flush");
    REQUIRE(m);
    CHECK(format_recipe(*m) == "Rq Write(a)\nRq Comp_Write(a)\nASSERT-PERSISTED(a)\n");
    CHECK(m->id == mhp.id + "!drop-flush");
    CHECK_FALSE(apply_named_mutant(mhp, "skip-ack"));
    CHECK_FALSE(apply_named_mutant(mhp, "deatomize"));
    CHECK_THROWS_AS(apply_named_mutant(mhp, "nope"), RecipeError);

    auto dmp = select_recipe(cfg(DMP, true, Region::DRAM), Primitive::Send, Arity::Compound);
    auto nf = apply_named_mutant(dmp, "drop-responder-flush");
    REQUIRE(nf);
    CHECK(format_recipe(*nf) ==
          "Rq Send(a,b)\nRsp Receive(a,b)\nRsp copy(a)\nRsp copy(b)\nRsp Send(ack)\nRq Receive(ack)\n"
          "ASSERT-PERSISTED(a,b)\n");
    auto sa = apply_named_mutant(dmp, "skip-ack");
    REQUIRE(sa);
    CHECK(format_recipe(*sa).find("Rq Receive(ack)") == std::string::npos);

    auto wa = select_recipe(cfg(DMP, false, Region::DRAM), Primitive::Write, Arity::Compound);
    auto de = apply_named_mutant(wa, "deatomize");
    REQUIRE(de);
    CHECK(format_recipe(*de) == "Rq Write(a)\nRq Flush\nRq Write(b)\nRq Flush\nRq Comp_Flush\nASSERT-PERSISTED(a,b)\n");
  }

  TEST_CASE("mutant expectations") {
    CHECK(expected_mutant_verdict(cfg(MHP, true, Region::DRAM), Primitive::Write, Arity::Singleton, "drop-flush") ==
          Expectation::Violated);
    CHECK(expected_mutant_verdict(cfg(DMP, true, Region::DRAM), Primitive::Send, Arity::Singleton,
                                  "drop-responder-flush") == Expectation::Violated);
    CHECK(expected_mutant_verdict(cfg(DMP, false, Region::DRAM), Primitive::Write, Arity::Compound, "deatomize") ==
          Expectation::Violated);
    CHECK(expected_mutant_verdict(cfg(WSP, true, Region::DRAM, Transport::iWARP), Primitive::Write, Arity::Singleton,
                                  "drop-flush") == Expectation::Violated);
    CHECK(expected_mutant_verdict(cfg(WSP, true, Region::DRAM), Primitive::Write, Arity::Singleton, "drop-flush") ==
          Expectation::None);
  }
}
