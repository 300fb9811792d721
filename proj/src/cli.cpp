#include "rpmem/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rpmem/bench.hpp"
#include "rpmem/catalog.hpp"
#include "rpmem/checker.hpp"

namespace rpmem {

namespace {

struct ScenarioFlags {
  std::string domain;
  std::string ddio;
  std::string rqwrb;
  std::string primitive;
  std::string arity;
  std::string transport = "ib";
  std::string mutant;
  std::string variant;
};

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& f, bool with_mutant) {
  cmd->add_option("--domain", f.domain, "persistence domain")->required()->check(CLI::IsMember({"dmp", "mhp", "wsp"}));
  cmd->add_option("--ddio", f.ddio, "DDIO setting")->required()->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--rqwrb", f.rqwrb, "receive buffer region")->required()->check(CLI::IsMember({"dram", "pm"}));
  cmd->add_option("--primitive", f.primitive, "update primitive")
      ->required()
      ->check(CLI::IsMember({"write", "writeimm", "write-imm", "send"}));
  cmd->add_option("--arity", f.arity, "update arity")->required()->check(CLI::IsMember({"singleton", "compound"}));
  cmd->add_option("--transport", f.transport, "transport")->check(CLI::IsMember({"ib", "iwarp"}));
  cmd->add_option("--variant", f.variant, "recipe variant")->check(CLI::IsMember(variant_names()));
  if (with_mutant) cmd->add_option("--mutant", f.mutant, "negative-test mutant")->check(CLI::IsMember(named_mutants()));
}

ServerConfig config_of(const ScenarioFlags& f) {
  ServerConfig c;
  c.domain = parse_domain(f.domain);
  c.ddio = parse_on_off(f.ddio);
  c.rqwrb_region = parse_region(f.rqwrb);
  c.transport = parse_transport(f.transport);
  return c;
}

void print_timestamp(std::ostream& out, bool suppressed) {
  if (suppressed) return;
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  out << "# run at " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << "\n";
}

void print_recipe(std::ostream& out, const Recipe& recipe) {
  out << "recipe " << recipe.id << "\n";
  std::istringstream lines(format_recipe(recipe));
  std::string line;
  int n = 1;
  while (std::getline(lines, line)) out << "  " << std::setw(2) << n++ << ". " << line << "\n";
}

std::string hex_words(const MemoryImage& image, const ValueDecl& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.new_words.size(); ++i) {
    if (i) s << ' ';
    s << "0x" << std::hex << read_word(image, v.target.offset + static_cast<std::uint32_t>(i * kUnitBytes));
  }
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

int cmd_list_configs(std::ostream& out) {
  int n = 1;
  for (const auto& c : enumerate_configs()) {
    out << std::setw(2) << n++ << "  " << to_string(c.domain) << "  DDIO " << (c.ddio ? "on " : "off") << "  RQWRB "
        << to_string(c.rqwrb_region) << "\n";
  }
  return 0;
}

Recipe build_recipe(const ScenarioFlags& f, const ServerConfig& c) {
  Recipe r = select_recipe(c, parse_primitive(f.primitive), parse_arity(f.arity), f.variant);
  if (!f.mutant.empty()) {
    auto m = apply_named_mutant(r, f.mutant);
    if (!m) throw RecipeError("mutant " + f.mutant + " does not apply to " + r.id);
    r = *m;
  }
  return r;
}

int cmd_show_recipe(const ScenarioFlags& f, std::ostream& out) {
  ServerConfig c = config_of(f);
  Recipe r = build_recipe(f, c);
  out << "config " << describe(c) << "\n";
  print_recipe(out, r);
  return 0;
}

int cmd_check(const ScenarioFlags& f, std::size_t budget, bool no_ts, std::ostream& out, std::ostream& err) {
  ServerConfig c = config_of(f);
  Recipe recipe = build_recipe(f, c);
  print_timestamp(out, no_ts);
  out << "config " << describe(c) << "\n";
  print_recipe(out, recipe);
  ExploreOptions opts;
  opts.state_budget = budget;
  Verdict v;
  try {
    v = explore(c, recipe, opts);
  } catch (const InconclusiveError& e) {
    out << "verdict Inconclusive\n";
    err << e.what() << "\n";
    return 2;
  }
  out << "verdict " << to_string(v.status) << "\n";
  out << "states " << v.stats.states << "  schedules " << v.stats.schedules << "  crash_points "
      << v.stats.crash_points << "\n";
  for (const auto& d : v.diagnostics) out << "note " << d << "\n";
  if (v.status == Status::Correct) return 0;

  const Counterexample& cx = *v.counterexample;
  out << "violated " << to_string(cx.obligation) << ": " << cx.detail << "\n";
  out << "trace\n";
  ReplayResult rr = replay(c, recipe, cx.schedule, cx.crash_index, opts.engine);
  int n = 1;
  for (const auto& line : rr.trace) out << "  " << std::setw(3) << n++ << ". " << line << "\n";
  out << "recovered\n";
  for (const auto& val : recipe.values) out << "  " << val.name << " = " << hex_words(cx.image, val) << "\n";
  return 1;
}

int cmd_matrix(const std::string& transport, bool mutants, const std::string& csv, std::size_t budget, bool no_ts,
               std::ostream& out) {
  ExploreOptions opts;
  opts.state_budget = budget;
  MatrixReport rep = run_matrix(parse_transport(transport), mutants, opts);
  if (!csv.empty()) write_file(csv, matrix_csv(rep));
  print_timestamp(out, no_ts);
  bool violated = false;
  for (const auto& r : rep.rows) {
    std::string verdict = r.inconclusive ? "Inconclusive" : to_string(r.verdict.status);
    if (!r.inconclusive && r.verdict.status == Status::Violated) violated = true;
    out << std::left << std::setw(44) << r.recipe_id << std::setw(10) << verdict << std::right << std::setw(9)
        << r.verdict.stats.states << " states";
    if (r.expected) out << "  (expected " << to_string(*r.expected) << ")";
    out << "\n";
  }
  out << "catalog " << rep.catalog_correct() << "/" << rep.catalog_rows() << " Correct\n";
  if (mutants) out << "expectations " << (rep.expectations_met() ? "met" : "NOT met") << "\n";
  if (rep.any_inconclusive()) return 2;
  return violated ? 1 : 0;
}

int cmd_bench(std::uint64_t n, const std::string& cost_path, const std::string& csv, bool no_ts, std::ostream& out) {
  CostModel cost;
  if (!cost_path.empty()) {
    std::ifstream f(cost_path);
    if (!f) throw BenchError("cannot read cost file " + cost_path);
    std::stringstream ss;
    ss << f.rdbuf();
    cost = parse_cost_model(ss.str());
  }
  BenchReport rep = run_benchmark(n, cost);
  if (!csv.empty()) write_file(csv, bench_csv(rep));
  print_timestamp(out, no_ts);
  out << "appends per scenario " << rep.appends << "\n";
  for (const auto& r : rep.rows) {
    out << std::left << std::setw(10) << to_string(r.arity) << std::setw(4) << to_string(r.config.domain)
        << std::setw(28) << r.label << std::right << std::setw(8) << r.latency_units << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crash-consistency checker and latency model for remote persistent-memory updates", "rpmem-check"};
  app.require_subcommand(1);
  bool no_ts = false;
  app.add_flag("--no-timestamp", no_ts, "omit the timestamp line");

  auto* list = app.add_subcommand("list-configs", "list the twelve server configurations");

  ScenarioFlags show_f;
  auto* show = app.add_subcommand("show-recipe", "print the recipe for a scenario");
  add_scenario_flags(show, show_f, true);

  ScenarioFlags check_f;
  std::size_t budget = ExploreOptions{}.state_budget;
  auto* check = app.add_subcommand("check", "explore every schedule and crash point of a scenario");
  add_scenario_flags(check, check_f, true);
  check->add_option("--budget", budget, "state budget")->check(CLI::PositiveNumber);
  check->add_flag("--no-timestamp", no_ts, "omit the timestamp line");

  bool mutants = false;
  std::string matrix_csv_path;
  std::string matrix_transport = "ib";
  auto* matrix = app.add_subcommand("matrix", "check all 72 scenarios");
  matrix->add_flag("--mutants", mutants, "also run the named mutants");
  matrix->add_option("--csv", matrix_csv_path, "write CSV here");
  matrix->add_option("--transport", matrix_transport, "transport")->check(CLI::IsMember({"ib", "iwarp"}));
  matrix->add_option("--budget", budget, "state budget per scenario")->check(CLI::PositiveNumber);
  matrix->add_flag("--no-timestamp", no_ts, "omit the timestamp line");

  std::uint64_t bench_n = 1000;
  std::string cost_path;
  std::string bench_csv_path;
  auto* bench = app.add_subcommand("bench", "model RemoteLog append latency");
  bench->add_option("--n", bench_n, "appends per scenario")->check(CLI::PositiveNumber);
  bench->add_option("--cost", cost_path, "cost model file");
  bench->add_option("--csv", bench_csv_path, "write CSV here");
  bench->add_flag("--no-timestamp", no_ts, "omit the timestamp line");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (list->parsed()) return cmd_list_configs(out);
    if (show->parsed()) return cmd_show_recipe(show_f, out);
    if (check->parsed()) return cmd_check(check_f, budget, no_ts, out, err);
    if (matrix->parsed()) return cmd_matrix(matrix_transport, mutants, matrix_csv_path, budget, no_ts, out);
    if (bench->parsed()) return cmd_bench(bench_n, cost_path, bench_csv_path, no_ts, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace rpmem
