#pragma once

// Responder storage stages, persistence domains and power-failure recovery.
//
// Data is tracked in 8-byte units. A unit is either "in flight" (a copy
// sitting in an RNIC, IIO, L3 or IMC buffer) or stored in a DIMM cell. Every
// write toward a home address carries a per-home version so that recovery
// can pick the newest surviving copy.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rpmem {

using Word = std::uint64_t;
inline constexpr std::size_t kUnitBytes = 8;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Region : std::uint8_t { DRAM, PM };

struct Address {
  Region region = Region::PM;
  std::uint32_t offset = 0;

  Address plus_units(std::size_t n) const {
    return Address{region, static_cast<std::uint32_t>(offset + n * kUnitBytes)};
  }
  auto operator<=>(const Address&) const = default;
};

enum class Stage : std::uint8_t {
  RequesterTransport,
  ResponderRNIC,
  IIOBuffer,
  L3Cache,
  IMCBuffer,
  PMDimm,
  DRAMDimm,
};

enum class PersistenceDomain : std::uint8_t { DMP, MHP, WSP };

std::string to_string(Region r);
std::string to_string(Stage s);
std::string to_string(PersistenceDomain d);

class StageSet {
 public:
  constexpr StageSet() = default;
  constexpr StageSet(std::initializer_list<Stage> stages) {
    for (Stage s : stages) insert(s);
  }
  constexpr void insert(Stage s) { bits_ |= bit(s); }
  constexpr bool contains(Stage s) const { return (bits_ & bit(s)) != 0; }
  constexpr bool is_subset_of(StageSet other) const { return (bits_ & ~other.bits_) == 0; }
  std::vector<Stage> members() const;
  bool operator==(const StageSet&) const = default;

 private:
  static constexpr std::uint8_t bit(Stage s) { return std::uint8_t(1u << static_cast<unsigned>(s)); }
  std::uint8_t bits_ = 0;
};

/// Stages whose contents survive a power failure once the failure-time drain
/// (ADR or residual power) has run.
StageSet persistence_stages(PersistenceDomain domain);

inline constexpr std::uint16_t kNoOwner = 0xffff;

struct DataUnit {
  Address home;
  Word value = 0;
  Stage stage = Stage::ResponderRNIC;
  bool dirty = false;
  std::uint32_t version = 0;
  // Send-queue index of the RDMA request that carried this unit, until the
  // unit lands in its visibility stage.
  std::uint16_t owner = kNoOwner;

  auto key() const { return std::tie(stage, home, version, owner, value, dirty); }
  bool operator==(const DataUnit& o) const { return key() == o.key(); }
  bool operator<(const DataUnit& o) const { return key() < o.key(); }
};

struct DimmCell {
  Word value = 0;
  std::uint32_t version = 0;
  bool operator==(const DimmCell&) const = default;
};

/// Recovered PM contents, keyed by PM offset. Offsets never written read as 0.
using MemoryImage = std::map<std::uint32_t, Word>;

Word read_word(const MemoryImage& image, std::uint32_t offset);
std::vector<std::uint8_t> read_bytes(const MemoryImage& image, std::uint32_t offset, std::size_t length);

/// Responder memory: in-flight copies plus PM and DRAM DIMM cells.
class MemorySystem {
 public:
  const std::vector<DataUnit>& units() const { return units_; }
  const std::vector<std::pair<std::uint32_t, DimmCell>>& pm_cells() const { return pm_dimm_; }
  const std::vector<std::pair<std::uint32_t, DimmCell>>& dram_cells() const { return dram_dimm_; }

  /// Pre-recipe PM contents (version 0).
  void set_initial_pm(std::uint32_t offset, Word value);

  /// Allocates the next version for a write toward `home`.
  std::uint32_t next_version(Address home) const;

  /// Places a copy. L3 and IMC keep one (newest) copy per home; DIMM cells
  /// keep the newest value; RNIC and IIO copies coexist.
  void place(DataUnit unit);

  /// Moves units[index] to `stage`, clearing ownership when it reaches a
  /// visibility stage.
  void move(std::size_t index, Stage stage);

  /// Moves units[index] out of RNIC/IIO into the stage inbound DMA lands in.
  void land(std::size_t index, bool ddio);

  DataUnit& unit(std::size_t index) { return units_.at(index); }

  void append_key(std::string& out) const;

 private:
  void canonicalize();

  std::vector<DataUnit> units_;
  std::vector<std::pair<std::uint32_t, DimmCell>> pm_dimm_;
  std::vector<std::pair<std::uint32_t, DimmCell>> dram_dimm_;
};

/// The newest surviving copy of every PM address after a power failure.
MemoryImage recover_image(const MemorySystem& memory, PersistenceDomain domain);

/// Cache-line flush plus fence over [start, start+length): dirty L3 units
/// move to the IMC buffers. Throws ModelError for non-PM ranges.
void responder_local_flush(MemorySystem& memory, Address start, std::size_t length);

enum class MemoryEventKind : std::uint8_t { Evict, Drain };

struct MemoryEvent {
  MemoryEventKind kind;
  std::size_t unit;
  bool operator==(const MemoryEvent&) const = default;
};

/// One eviction per dirty PM-homed L3 unit, in any order.
std::vector<MemoryEvent> spontaneous_eviction_events(const MemorySystem& memory);

/// One drain per PM-homed IMC unit (IMC buffer -> PM DIMM).
std::vector<MemoryEvent> imc_drain_events(const MemorySystem& memory);

void apply_memory_event(MemorySystem& memory, const MemoryEvent& event);

}  // namespace rpmem
