#include "rpmem/bench.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <set>
#include <sstream>

#include "rpmem/catalog.hpp"

namespace rpmem {

namespace {

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

struct Field {
  const char* key;
  std::uint64_t CostModel::*member;
};

constexpr Field kFields[] = {
    {"one_way_hop", &CostModel::one_way_hop},
    {"rnic_dma", &CostModel::rnic_dma},
    {"iio_to_mem", &CostModel::iio_to_mem},
    {"cacheline_flush", &CostModel::cacheline_flush},
    {"cpu_receive_handle", &CostModel::cpu_receive_handle},
    {"cpu_copy_per_64B", &CostModel::cpu_copy_per_64B},
    {"completion_poll", &CostModel::completion_poll},
};

std::uint64_t lines_of(std::size_t bytes) { return (bytes + 63) / 64; }

std::size_t bench_bytes(const std::string& value) { return value == "b" ? kBenchTailBytes : kBenchRecordBytes; }

struct Timed {
  OpKind kind;
  std::uint64_t send = 0;
  std::uint64_t arrive = 0;
  std::uint64_t land = 0;      // effect visible in the memory subsystem
  std::uint64_t response = 0;  // non-posted only
};

}  // namespace

CostModel parse_cost_model(const std::string& text) {
  CostModel cost;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw BenchError("cost line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw BenchError("cost line " + std::to_string(lineno) + ": duplicate key " + key);
    if (key == "emulate_write_atomic") {
      if (val == "true" || val == "1") {
        cost.emulate_write_atomic = true;
      } else if (val == "false" || val == "0") {
        cost.emulate_write_atomic = false;
      } else {
        throw BenchError("cost line " + std::to_string(lineno) + ": expected true or false");
      }
      continue;
    }
    const Field* field = nullptr;
    for (const auto& f : kFields)
      if (key == f.key) field = &f;
    if (!field) throw BenchError("cost line " + std::to_string(lineno) + ": unknown key " + key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (val.empty() || ec != std::errc() || ptr != val.data() + val.size())
      throw BenchError("cost line " + std::to_string(lineno) + ": " + key + " needs a non-negative integer");
    cost.*(field->member) = v;
  }
  return cost;
}

std::string format_cost_model(const CostModel& cost) {
  std::ostringstream out;
  for (const auto& f : kFields) out << f.key << " = " << cost.*(f.member) << "\n";
  out << "emulate_write_atomic = " << (cost.emulate_write_atomic ? "true" : "false") << "\n";
  return out.str();
}

std::uint64_t time_recipe(const ServerConfig& config, const Recipe& recipe, const CostModel& c) {
  std::uint64_t t_rq = 0;
  std::uint64_t t_rsp = 0;
  std::uint64_t last_arrival = 0;
  std::uint64_t last_posted_exec = 0;
  std::vector<Timed> ops;
  std::vector<int> op_of_step(recipe.steps.size(), -1);
  std::deque<std::uint64_t> acks;
  std::size_t receives = 0;

  auto prior_effects = [&]() {
    std::uint64_t t = 0;
    for (const auto& o : ops) t = std::max(t, o.land);
    return t;
  };

  for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
    const Step& st = recipe.steps[i];
    switch (st.action) {
      case Action::Post: {
        Timed op{st.post.kind};
        op.send = t_rq;
        if (st.post.fenced)
          for (const auto& o : ops)
            if (!is_posted(o.kind)) op.send = std::max(op.send, o.response);
        op.arrive = std::max(op.send + c.one_way_hop, last_arrival);
        last_arrival = op.arrive;
        switch (op.kind) {
          case OpKind::Write:
          case OpKind::WriteImm:
          case OpKind::Send: {
            std::uint64_t exec = std::max(op.arrive, last_posted_exec) + c.rnic_dma;
            last_posted_exec = exec;
            op.land = exec + c.iio_to_mem;
            break;
          }
          case OpKind::Flush:
          case OpKind::Read: {
            std::uint64_t start = std::max(op.arrive, prior_effects());
            op.land = start + c.rnic_dma + c.iio_to_mem;
            op.response = op.land + c.one_way_hop;
            break;
          }
          case OpKind::WriteAtomic: {
            std::uint64_t start = std::max(op.arrive, prior_effects());
            // Read + pipelined Write + Read: two memory round trips at the responder.
            std::uint64_t rounds = c.emulate_write_atomic ? 2 : 1;
            op.land = start + rounds * (c.rnic_dma + c.iio_to_mem);
            op.response = op.land + c.one_way_hop;
            break;
          }
        }
        op_of_step[i] = static_cast<int>(ops.size());
        ops.push_back(op);
        break;
      }
      case Action::WaitCompletion: {
        int k = st.ref >= 0 ? op_of_step[static_cast<std::size_t>(st.ref)] : -1;
        if (k < 0) throw BenchError("completion wait without a post in " + recipe.id);
        const Timed& op = ops[static_cast<std::size_t>(k)];
        std::uint64_t done;
        if (!is_posted(op.kind)) {
          done = op.response;
        } else if (config.transport == Transport::iWARP) {
          done = op.send;
        } else {
          done = op.arrive + c.one_way_hop;
        }
        t_rq = std::max(t_rq, done + c.completion_poll);
        break;
      }
      case Action::WaitReceive: {
        std::size_t seen = 0;
        std::uint64_t ready = 0;
        bool found = false;
        for (const auto& o : ops) {
          ready = std::max(ready, o.land);
          if (consumes_receive(o.kind) && seen++ == receives) {
            found = true;
            break;
          }
        }
        if (!found) throw BenchError("receive without a message in " + recipe.id);
        ++receives;
        t_rsp = std::max(t_rsp, ready) + c.completion_poll + c.cpu_receive_handle;
        break;
      }
      case Action::CopyToTarget:
        for (const auto& v : st.values) t_rsp += c.cpu_copy_per_64B * lines_of(bench_bytes(v));
        break;
      case Action::LocalFlush:
        for (const auto& v : st.values) t_rsp += c.cacheline_flush * lines_of(bench_bytes(v));
        break;
      case Action::PostAck:
        acks.push_back(t_rsp + c.rnic_dma + c.one_way_hop + c.rnic_dma + c.iio_to_mem);
        break;
      case Action::WaitAck: {
        if (acks.empty()) throw BenchError("ack wait without an ack in " + recipe.id);
        t_rq = std::max(t_rq, acks.front()) + c.completion_poll + c.cpu_receive_handle;
        acks.pop_front();
        break;
      }
      case Action::AssertPersisted:
        break;
    }
  }
  return t_rq;
}

std::uint64_t time_verified(const ServerConfig& config, const Recipe& recipe, const CostModel& cost) {
  Verdict v = explore(config, recipe);
  if (v.status != Status::Correct)
    throw BenchError("refusing to time " + recipe.id + ": checker verdict " + to_string(v.status));
  return time_recipe(config, recipe, cost);
}

std::uint64_t simulate_append(const ServerConfig& config, Primitive primitive, Arity arity, const CostModel& cost,
                              const std::string& variant) {
  return time_verified(config, select_recipe(config, primitive, arity, variant), cost);
}

std::string scenario_label(const ServerConfig& config, Primitive primitive) {
  std::string label = config.ddio ? "DDIO_" : "NODDIO_";
  label += config.rqwrb_region == Region::DRAM ? "DRAM_RQWRB_" : "PM_RQWRB_";
  switch (primitive) {
    case Primitive::Write:
      return label + "WRITE";
    case Primitive::WriteImm:
      return label + "WRITE_IMM";
    case Primitive::Send:
      return label + "SEND";
  }
  return label;
}

std::size_t RemoteLog::append(const Bytes& payload) {
  Bytes rec = encode_record(payload);
  if (tail_ + rec.size() > bytes_.size()) throw BenchError("remote log full");
  std::copy(rec.begin(), rec.end(), bytes_.begin() + tail_);
  std::size_t at = tail_;
  tail_ += static_cast<std::uint32_t>(rec.size());
  return at;
}

MemoryImage RemoteLog::image() const {
  MemoryImage img;
  auto words = to_words(bytes_);
  for (std::size_t i = 0; i < words.size(); ++i)
    if (words[i] != 0) img[static_cast<std::uint32_t>(i * kUnitBytes)] = words[i];
  return img;
}

const BenchRow& BenchReport::find(const ServerConfig& config, Primitive primitive, Arity arity) const {
  for (const auto& r : rows)
    if (r.config.domain == config.domain && r.config.ddio == config.ddio &&
        r.config.rqwrb_region == config.rqwrb_region && r.primitive == primitive && r.arity == arity)
      return r;
  throw BenchError("no bench row for " + describe(config));
}

BenchReport run_benchmark(std::uint64_t appends, const CostModel& cost) {
  if (appends == 0) throw BenchError("append count must be positive");
  BenchReport report;
  report.appends = appends;

  // Every append writes the same shape of record; fill a log once to make
  // sure n records of that shape frame and scan back correctly.
  const std::size_t payload = kBenchRecordBytes - kRecordOverhead;
  RemoteLog log(static_cast<std::size_t>(appends) * kBenchRecordBytes);
  Bytes body(payload);
  for (std::uint64_t i = 0; i < appends; ++i) {
    for (std::size_t j = 0; j < payload; ++j) body[j] = static_cast<std::uint8_t>(i * 31 + j);
    log.append(body);
  }
  if (log.tail() != appends * kBenchRecordBytes) throw BenchError("remote log framing mismatch");

  for (Arity arity : {Arity::Singleton, Arity::Compound})
    for (const auto& config : enumerate_configs())
      for (Primitive p : {Primitive::Write, Primitive::WriteImm, Primitive::Send}) {
        // Appends are issued back to back, each waiting for the previous, so
        // the mean equals the latency of one append.
        std::uint64_t one = simulate_append(config, p, arity, cost);
        report.rows.push_back({scenario_label(config, p), config, p, arity, one});
      }
  // Sort by arity, then domain, keeping the insertion order otherwise.
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const BenchRow& x, const BenchRow& y) {
    return std::pair(x.arity, x.config.domain) < std::pair(y.arity, y.config.domain);
  });
  return report;
}

std::string bench_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "scenario_label,primitive,arity,domain,ddio,rqwrb,latency_units\n";
  for (const auto& r : report.rows) {
    out << r.label << ',' << cli_name(r.primitive) << ',' << cli_name(r.arity) << ',' << to_string(r.config.domain)
        << ',' << (r.config.ddio ? "on" : "off") << ',' << to_string(r.config.rqwrb_region) << ','
        << r.latency_units << '\n';
  }
  return out.str();
}

}  // namespace rpmem
