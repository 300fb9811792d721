#pragma once

// Recipe catalog for singleton (value a) and compound (a then b)
// updates, one cell per (domain, primitive, DDIO, RQWRB region).

#include <optional>
#include <string>
#include <vector>

#include "rpmem/config.hpp"
#include "rpmem/recipe.hpp"

namespace rpmem {

/// A cell as written in the table: either step text or "As above".
struct CatalogCell {
  Arity arity;
  PersistenceDomain domain;
  Primitive primitive;
  bool ddio;
  Region rqwrb;
  std::string text;
};

/// The raw transcription, 36 singleton cells then 36 compound cells.
const std::vector<CatalogCell>& catalog_cells();

/// Identifier of the table cell a scenario resolves to, after "As above"
/// resolution and the WSP-on-iWARP substitution.
std::string recipe_id(const ServerConfig& config, Primitive primitive, Arity arity);

/// Recipe variants selectable instead of the table's primary cell.
inline constexpr const char* kSendAckVariant = "send-ack";
std::vector<std::string> variant_names();
bool variant_applies(const ServerConfig& config, Primitive primitive, const std::string& variant);

/// The catalog recipe with the standard log workload installed. Throws
/// RecipeError for an inapplicable variant.
Recipe select_recipe(const ServerConfig& config, Primitive primitive, Arity arity,
                     const std::string& variant = "", const Workload& workload = {});

/// Named negative-test mutants: drop-flush, drop-responder-flush, skip-ack,
/// deatomize.
std::vector<std::string> named_mutants();

/// nullopt if the mutant has nothing to act on in this recipe. Throws
/// RecipeError for an unknown name.
std::optional<Recipe> apply_named_mutant(const Recipe& recipe, const std::string& name);

/// Expected verdict for a mutant, if one is known.
enum class Expectation { None, Violated, Correct };
Expectation expected_mutant_verdict(const ServerConfig& config, Primitive primitive, Arity arity,
                                    const std::string& mutant);

}  // namespace rpmem
