#include "rpmem/catalog.hpp"

#include <algorithm>
#include <array>

namespace rpmem {

namespace {

constexpr const char* kAbove = "As above";

// Message-passing idioms shared by several cells.
constexpr const char* kDmpWriteSendAck =
    "Rq Write(a)\nRq Send(&a)\nRsp Receive(&a)\nRsp flush(&a)\nRsp Send(ack)\nRq Receive(ack)";
constexpr const char* kDmpWriteImmAck = "Rq WriteImm(a)\nRsp Receive(&a)\nRsp flush(&a)\nRsp Send(ack)\nRq Receive(ack)";
constexpr const char* kSendCopyFlush =
    "Rq Send(a)\nRsp Receive(a)\nRsp copy(a)\nRsp flush(&a)\nRsp Send(ack)\nRq Receive(ack)";
constexpr const char* kSendCopy = "Rq Send(a)\nRsp Receive(a)\nRsp copy(a)\nRsp Send(ack)\nRq Receive(ack)";
constexpr const char* kSendFlush = "Rq Send(a)\nRq Flush\nRq Comp_Flush";
constexpr const char* kWriteFlush = "Rq Write(a)\nRq Flush\nRq Comp_Flush";
constexpr const char* kWriteImmFlush = "Rq WriteImm(a)\nRq Flush\nRq Comp_Flush";

constexpr const char* kCWriteSendAck =
    "Rq Write(a)\nRq Send(&a)\nRsp Receive(&a)\nRsp flush(&a)\nRsp Send(ack)\nRq Receive(ack)\n"
    "Rq Write(b)\nRq Send(&b)\nRsp Receive(&b)\nRsp flush(&b)\nRsp Send(ack)\nRq Receive(ack)";
constexpr const char* kCWriteImmAck =
    "Rq WriteImm(a)\nRsp Receive(&a)\nRsp flush(&a)\nRsp Send(ack)\nRq Receive(ack)\n"
    "Rq WriteImm(b)\nRsp Receive(&b)\nRsp flush(&b)\nRsp Send(ack)\nRq Receive(ack)";
constexpr const char* kCSendCopyFlush =
    "Rq Send(a,b)\nRsp Receive(a,b)\nRsp copy(a)\nRsp flush(&a)\nRsp copy(b)\nRsp flush(&b)\nRsp Send(ack)\n"
    "Rq Receive(ack)";
constexpr const char* kCSendCopy = "Rq Send(a,b)\nRsp Receive(a,b)\nRsp copy(a,b)\nRsp Send(ack)\nRq Receive(ack)";
constexpr const char* kCSendFlush = "Rq Send(a,b)\nRq Flush\nRq Comp_Flush";

using Grid = std::array<std::array<const char*, 9>, 4>;

// Rows: DDIO+DRAM, DDIO+PM, noDDIO+DRAM, noDDIO+PM.
// Columns: DMP Write, WriteImm, Send | MHP ... | WSP ...
const Grid kSingleton = {{
    {kDmpWriteSendAck, kDmpWriteImmAck, kSendCopyFlush, kWriteFlush, kWriteImmFlush, kSendCopy,
     "Rq Write(a)\nRq Comp_Write(a)", "Rq WriteImm(a)\nRq Comp_WriteImm(a)", kSendCopy},
    {kAbove, kAbove, kAbove, kAbove, kAbove, kSendFlush, kAbove, kAbove, "Rq Send(a)\nRq Comp_Send(a)"},
    {kWriteFlush, kWriteImmFlush, kAbove, kAbove, kAbove, kSendCopy, kAbove, kAbove, kSendCopy},
    {kAbove, kAbove, kSendFlush, kAbove, kAbove, kSendFlush, kAbove, kAbove, "Rq Send(a)\nRq Comp_Send(a)"},
}};

const Grid kCompound = {{
    {kCWriteSendAck, kCWriteImmAck, kCSendCopyFlush, "Rq Write(a)\nRq Write(b)\nRq Flush\nRq Comp_Flush",
     "Rq WriteImm(a)\nRq WriteImm(b)\nRq Flush\nRq Comp_Flush", kCSendCopy,
     "Rq Write(a)\nRq Write(b)\nRq Comp_Write(b)", "Rq WriteImm(a)\nRq WriteImm(b)\nRq Comp_WriteImm(b)", kCSendCopy},
    {kAbove, kAbove, kAbove, kAbove, kAbove, kCSendFlush, kAbove, kAbove, "Rq Send(a,b)\nRq Comp_Send(a,b)"},
    {"Rq Write(a)\nRq Flush\nRq Write_atomic(b)\nRq Flush\nRq Comp_Flush",
     "Rq WriteImm(a)\nRq Flush\nRq Comp_Flush\nRq WriteImm(b)\nRq Flush\nRq Comp_Flush", kAbove, kAbove, kAbove,
     kCSendCopy, kAbove, kAbove, kCSendCopy},
    {kAbove, kAbove, kCSendFlush, kAbove, kAbove, kCSendFlush, kAbove, kAbove, "Rq Send(a,b)\nRq Comp_Send(a,b)"},
}};

// Footnote alternative for the starred Flush: a Send/ack exchange.
constexpr const char* kSendAckSingleton = "Rq Write(a)\nRq Send(&a)\nRsp Receive(&a)\nRsp Send(ack)\nRq Receive(ack)";
constexpr const char* kSendAckCompound =
    "Rq Write(a)\nRq Send(&a)\nRsp Receive(&a)\nRsp Send(ack)\nRq Receive(ack)\nRq Write_atomic(b)\nRq Flush\n"
    "Rq Comp_Flush";

int row_of(bool ddio, Region r) { return (ddio ? 0 : 2) + (r == Region::PM ? 1 : 0); }

int col_of(PersistenceDomain d, Primitive p) { return static_cast<int>(d) * 3 + static_cast<int>(p); }

std::string row_name(int row) {
  static const char* names[] = {"DDIO-DRAM", "DDIO-PM", "NODDIO-DRAM", "NODDIO-PM"};
  return names[row];
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

struct Resolved {
  int row;
  const char* text;
};

Resolved resolve(Arity arity, int row, int col) {
  const Grid& g = arity == Arity::Singleton ? kSingleton : kCompound;
  while (g[row][col] == std::string(kAbove)) {
    if (row == 0) throw RecipeError("'As above' in the first row");
    --row;
  }
  return {row, g[row][col]};
}

PersistenceDomain effective_domain(const ServerConfig& c) {
  if (c.domain == PersistenceDomain::WSP && c.transport == Transport::iWARP) return PersistenceDomain::MHP;
  return c.domain;
}

}  // namespace

const std::vector<CatalogCell>& catalog_cells() {
  static const std::vector<CatalogCell> cells = [] {
    std::vector<CatalogCell> out;
    for (Arity arity : {Arity::Singleton, Arity::Compound}) {
      const Grid& g = arity == Arity::Singleton ? kSingleton : kCompound;
      for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 9; ++col)
          out.push_back(CatalogCell{arity, static_cast<PersistenceDomain>(col / 3), static_cast<Primitive>(col % 3),
                                    row < 2, row % 2 ? Region::PM : Region::DRAM, g[row][col]});
    }
    return out;
  }();
  return cells;
}

std::string recipe_id(const ServerConfig& config, Primitive primitive, Arity arity) {
  PersistenceDomain d = effective_domain(config);
  Resolved r = resolve(arity, row_of(config.ddio, config.rqwrb_region), col_of(d, primitive));
  return std::string(arity == Arity::Singleton ? "T2." : "T3.") + to_string(d) + "." + upper(to_string(primitive)) +
         "." + row_name(r.row);
}

std::vector<std::string> variant_names() { return {kSendAckVariant}; }

bool variant_applies(const ServerConfig& config, Primitive primitive, const std::string& variant) {
  if (variant != kSendAckVariant) return false;
  return effective_domain(config) == PersistenceDomain::DMP && !config.ddio && primitive == Primitive::Write;
}

Recipe select_recipe(const ServerConfig& config, Primitive primitive, Arity arity, const std::string& variant,
                     const Workload& workload) {
  Recipe recipe;
  recipe.arity = arity;
  recipe.id = recipe_id(config, primitive, arity);
  const char* text = nullptr;
  if (variant.empty()) {
    text = resolve(arity, row_of(config.ddio, config.rqwrb_region), col_of(effective_domain(config), primitive)).text;
  } else {
    const auto names = variant_names();
    if (std::find(names.begin(), names.end(), variant) == names.end())
      throw RecipeError("unknown recipe variant '" + variant + "'");
    if (!variant_applies(config, primitive, variant))
      throw RecipeError("variant '" + variant + "' does not apply to " + describe(config) + " " + to_string(primitive));
    text = arity == Arity::Singleton ? kSendAckSingleton : kSendAckCompound;
    recipe.id += "+" + variant;
  }
  recipe.steps = parse_steps(text);
  std::vector<std::string> all = {"a"};
  if (arity == Arity::Compound) all.push_back("b");
  recipe.steps.push_back(assert_persisted(all));
  install_workload(recipe, workload);
  auto diag = validate_recipe(recipe);
  if (!diag.empty()) throw RecipeError("catalog recipe " + recipe.id + " is invalid: " + diag.front());
  return recipe;
}

std::vector<std::string> named_mutants() { return {"drop-flush", "drop-responder-flush", "skip-ack", "deatomize"}; }

std::optional<Recipe> apply_named_mutant(const Recipe& recipe, const std::string& name) {
  auto last_index = [&](auto pred) -> std::optional<std::size_t> {
    for (std::size_t i = recipe.steps.size(); i-- > 0;)
      if (pred(recipe.steps[i])) return i;
    return std::nullopt;
  };
  Recipe out = recipe;
  auto apply_all = [&](auto pred, Mutation::Kind kind) -> std::optional<Recipe> {
    bool any = false;
    for (;;) {
      std::optional<std::size_t> idx;
      for (std::size_t i = out.steps.size(); i-- > 0;)
        if (pred(out.steps[i])) {
          idx = i;
          break;
        }
      if (!idx) break;
      out = mutate(out, Mutation{kind, *idx});
      any = true;
    }
    if (!any) return std::nullopt;
    out.id = recipe.id + "!" + name;
    return out;
  };
  if (name == "drop-flush") {
    auto idx = last_index([](const Step& s) {
      return s.action == Action::Post && (s.post.kind == OpKind::Flush || s.post.kind == OpKind::Read);
    });
    if (!idx) return std::nullopt;
    out = mutate(recipe, Mutation{Mutation::Kind::DropStep, *idx});
    out.id = recipe.id + "!" + name;
    return out;
  }
  if (name == "drop-responder-flush")
    return apply_all([](const Step& s) { return s.action == Action::LocalFlush; }, Mutation::Kind::DropStep);
  if (name == "skip-ack")
    return apply_all([](const Step& s) { return s.action == Action::WaitAck; }, Mutation::Kind::SkipWait);
  if (name == "deatomize")
    return apply_all([](const Step& s) { return s.action == Action::Post && s.post.kind == OpKind::WriteAtomic; },
                     Mutation::Kind::UnfenceOrDeAtomize);
  throw RecipeError("unknown mutant '" + name + "'");
}

Expectation expected_mutant_verdict(const ServerConfig& c, Primitive p, Arity arity, const std::string& mutant) {
  bool one_sided = p == Primitive::Write || p == Primitive::WriteImm;
  if (c.domain == PersistenceDomain::DMP && c.ddio && (mutant == "drop-responder-flush" || mutant == "skip-ack"))
    return Expectation::Violated;
  if (mutant == "drop-flush") {
    if (c.domain == PersistenceDomain::MHP && one_sided) return Expectation::Violated;
    if (c.domain == PersistenceDomain::WSP && c.transport == Transport::iWARP &&
        (one_sided || c.rqwrb_region == Region::PM))
      return Expectation::Violated;
  }
  if (mutant == "deatomize" && c.domain == PersistenceDomain::DMP && !c.ddio && p == Primitive::Write &&
      arity == Arity::Compound)
    return Expectation::Violated;
  return Expectation::None;
}

}  // namespace rpmem
