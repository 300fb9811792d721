#pragma once

// RemoteLog appends timed under a latency cost model instead of hardware.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpmem/checker.hpp"
#include "rpmem/config.hpp"
#include "rpmem/log_record.hpp"
#include "rpmem/recipe.hpp"

namespace rpmem {

class BenchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CostModel {
  std::uint64_t one_way_hop = 800;
  std::uint64_t rnic_dma = 150;
  std::uint64_t iio_to_mem = 100;
  std::uint64_t cacheline_flush = 60;
  std::uint64_t cpu_receive_handle = 250;
  std::uint64_t cpu_copy_per_64B = 30;
  std::uint64_t completion_poll = 50;
  // Time Write_atomic as Read + pipelined Write + Read instead of natively.
  bool emulate_write_atomic = false;

  bool operator==(const CostModel&) const = default;
};

/// Parses `key = integer` lines ('#' starts a comment). Unknown keys,
/// duplicates, negative or malformed values throw BenchError.
CostModel parse_cost_model(const std::string& text);
std::string format_cost_model(const CostModel& cost);

/// Bytes each declared value occupies in a RemoteLog append: the 64-byte
/// record and, for compound appends, the 8-byte tail index.
inline constexpr std::size_t kBenchRecordBytes = 64;
inline constexpr std::size_t kBenchTailBytes = 8;

/// Requester-observed latency of one execution of `recipe`. Waits
/// serialize; back-to-back posts pipeline.
std::uint64_t time_recipe(const ServerConfig& config, const Recipe& recipe, const CostModel& cost);

/// time_recipe after the checker has found `recipe` Correct; throws
/// BenchError otherwise.
std::uint64_t time_verified(const ServerConfig& config, const Recipe& recipe, const CostModel& cost);

/// Times the catalog recipe of a scenario after confirming it is Correct;
/// throws BenchError for a Violated recipe.
std::uint64_t simulate_append(const ServerConfig& config, Primitive primitive, Arity arity, const CostModel& cost,
                              const std::string& variant = "");

/// Bar label, e.g. DDIO_DRAM_RQWRB_WRITE or NODDIO_PM_RQWRB_WRITE_IMM.
std::string scenario_label(const ServerConfig& config, Primitive primitive);

/// A contiguous checksum-framed log in a flat byte buffer.
class RemoteLog {
 public:
  explicit RemoteLog(std::size_t capacity) : bytes_(capacity, 0) {}
  /// Appends one record; throws BenchError when full.
  std::size_t append(const Bytes& payload);
  std::uint32_t tail() const { return tail_; }
  const Bytes& bytes() const { return bytes_; }
  MemoryImage image() const;

 private:
  Bytes bytes_;
  std::uint32_t tail_ = 0;
};

struct BenchRow {
  std::string label;
  ServerConfig config;
  Primitive primitive;
  Arity arity;
  std::uint64_t latency_units = 0;  // mean over the appends
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::uint64_t appends = 0;

  const BenchRow& find(const ServerConfig& config, Primitive primitive, Arity arity) const;
};

BenchReport run_benchmark(std::uint64_t appends, const CostModel& cost);

std::string bench_csv(const BenchReport& report);

}  // namespace rpmem
