#include "rpmem/memory_model.hpp"

#include <algorithm>

namespace rpmem {

std::string to_string(Region r) { return r == Region::DRAM ? "DRAM" : "PM"; }

std::string to_string(Stage s) {
  switch (s) {
    case Stage::RequesterTransport: return "RequesterTransport";
    case Stage::ResponderRNIC: return "ResponderRNIC";
    case Stage::IIOBuffer: return "IIOBuffer";
    case Stage::L3Cache: return "L3Cache";
    case Stage::IMCBuffer: return "IMCBuffer";
    case Stage::PMDimm: return "PMDimm";
    case Stage::DRAMDimm: return "DRAMDimm";
  }
  return "?";
}

std::string to_string(PersistenceDomain d) {
  switch (d) {
    case PersistenceDomain::DMP: return "DMP";
    case PersistenceDomain::MHP: return "MHP";
    case PersistenceDomain::WSP: return "WSP";
  }
  return "?";
}

std::vector<Stage> StageSet::members() const {
  std::vector<Stage> out;
  for (unsigned i = 0; i <= static_cast<unsigned>(Stage::DRAMDimm); ++i) {
    if (contains(static_cast<Stage>(i))) out.push_back(static_cast<Stage>(i));
  }
  return out;
}

StageSet persistence_stages(PersistenceDomain domain) {
  switch (domain) {
    case PersistenceDomain::DMP:
      return {Stage::IMCBuffer, Stage::PMDimm};
    case PersistenceDomain::MHP:
      return {Stage::IIOBuffer, Stage::L3Cache, Stage::IMCBuffer, Stage::PMDimm};
    case PersistenceDomain::WSP:
      return {Stage::ResponderRNIC, Stage::IIOBuffer, Stage::L3Cache, Stage::IMCBuffer, Stage::PMDimm};
  }
  return {};
}

Word read_word(const MemoryImage& image, std::uint32_t offset) {
  auto it = image.find(offset);
  return it == image.end() ? 0 : it->second;
}

std::vector<std::uint8_t> read_bytes(const MemoryImage& image, std::uint32_t offset, std::size_t length) {
  std::vector<std::uint8_t> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    std::uint32_t byte = offset + static_cast<std::uint32_t>(i);
    std::uint32_t base = byte - byte % kUnitBytes;
    Word w = read_word(image, base);
    out[i] = static_cast<std::uint8_t>(w >> (8 * (byte - base)));
  }
  return out;
}

namespace {

using CellMap = std::vector<std::pair<std::uint32_t, DimmCell>>;

CellMap::iterator find_cell(CellMap& cells, std::uint32_t offset) {
  return std::lower_bound(cells.begin(), cells.end(), offset,
                          [](const auto& c, std::uint32_t off) { return c.first < off; });
}

const DimmCell* lookup_cell(const CellMap& cells, std::uint32_t offset) {
  auto it = std::lower_bound(cells.begin(), cells.end(), offset,
                             [](const auto& c, std::uint32_t off) { return c.first < off; });
  return (it != cells.end() && it->first == offset) ? &it->second : nullptr;
}

void store_cell(CellMap& cells, std::uint32_t offset, DimmCell cell) {
  auto it = find_cell(cells, offset);
  if (it != cells.end() && it->first == offset) {
    if (cell.version >= it->second.version) it->second = cell;
  } else {
    cells.insert(it, {offset, cell});
  }
}

bool single_copy_stage(Stage s) { return s == Stage::L3Cache || s == Stage::IMCBuffer; }

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

void MemorySystem::set_initial_pm(std::uint32_t offset, Word value) {
  if (offset % kUnitBytes != 0) throw ModelError("unaligned PM offset " + std::to_string(offset));
  store_cell(pm_dimm_, offset, DimmCell{value, 0});
}

std::uint32_t MemorySystem::next_version(Address home) const {
  std::uint32_t v = 0;
  const DimmCell* cell = lookup_cell(home.region == Region::PM ? pm_dimm_ : dram_dimm_, home.offset);
  if (cell) v = cell->version;
  for (const auto& u : units_) {
    if (u.home == home) v = std::max(v, u.version);
  }
  return v + 1;
}

void MemorySystem::place(DataUnit unit) {
  if (unit.home.offset % kUnitBytes != 0) throw ModelError("unaligned address " + std::to_string(unit.home.offset));
  if (unit.stage == Stage::PMDimm || unit.stage == Stage::DRAMDimm) {
    store_cell(unit.stage == Stage::PMDimm ? pm_dimm_ : dram_dimm_, unit.home.offset,
               DimmCell{unit.value, unit.version});
    return;
  }
  if (single_copy_stage(unit.stage)) {
    unit.owner = kNoOwner;
    for (auto it = units_.begin(); it != units_.end(); ++it) {
      if (it->stage == unit.stage && it->home == unit.home) {
        if (it->version > unit.version) return;
        units_.erase(it);
        break;
      }
    }
  }
  units_.push_back(unit);
  canonicalize();
}

void MemorySystem::move(std::size_t index, Stage stage) {
  DataUnit u = units_.at(index);
  units_.erase(units_.begin() + static_cast<std::ptrdiff_t>(index));
  u.stage = stage;
  if (stage == Stage::IMCBuffer || stage == Stage::PMDimm || stage == Stage::DRAMDimm) u.dirty = false;
  place(u);
}

void MemorySystem::land(std::size_t index, bool ddio) {
  DataUnit u = units_.at(index);
  units_.erase(units_.begin() + static_cast<std::ptrdiff_t>(index));
  u.owner = kNoOwner;
  if (u.home.region == Region::DRAM) {
    u.stage = Stage::DRAMDimm;
    u.dirty = false;
  } else if (ddio) {
    u.stage = Stage::L3Cache;
    u.dirty = true;
  } else {
    u.stage = Stage::IMCBuffer;
    u.dirty = false;
  }
  place(u);
}

void MemorySystem::canonicalize() { std::sort(units_.begin(), units_.end()); }

void MemorySystem::append_key(std::string& out) const {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(units_.size()));
  for (const auto& u : units_) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(u.stage));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(u.home.region));
    put<std::uint32_t>(out, u.home.offset);
    put<std::uint32_t>(out, u.version);
    put<std::uint16_t>(out, u.owner);
    put<std::uint64_t>(out, u.value);
    put<std::uint8_t>(out, u.dirty ? 1 : 0);
  }
  for (const CellMap* cells : {&pm_dimm_, &dram_dimm_}) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(cells->size()));
    for (const auto& [off, cell] : *cells) {
      put<std::uint32_t>(out, off);
      put<std::uint32_t>(out, cell.version);
      put<std::uint64_t>(out, cell.value);
    }
  }
}

MemoryImage recover_image(const MemorySystem& memory, PersistenceDomain domain) {
  StageSet survive = persistence_stages(domain);
  std::map<std::uint32_t, DimmCell> best;
  for (const auto& [off, cell] : memory.pm_cells()) best[off] = cell;
  for (const auto& u : memory.units()) {
    if (u.home.region != Region::PM || !survive.contains(u.stage)) continue;
    auto it = best.find(u.home.offset);
    if (it == best.end() || u.version > it->second.version) best[u.home.offset] = DimmCell{u.value, u.version};
  }
  MemoryImage image;
  for (const auto& [off, cell] : best) image[off] = cell.value;
  return image;
}

void responder_local_flush(MemorySystem& memory, Address start, std::size_t length) {
  if (start.region != Region::PM) throw ModelError("local flush over a non-PM range");
  std::uint64_t end = std::uint64_t(start.offset) + length;
  for (;;) {
    const auto& units = memory.units();
    auto it = std::find_if(units.begin(), units.end(), [&](const DataUnit& u) {
      return u.stage == Stage::L3Cache && u.dirty && u.home.region == Region::PM && u.home.offset >= start.offset &&
             u.home.offset < end;
    });
    if (it == units.end()) return;
    memory.move(static_cast<std::size_t>(it - units.begin()), Stage::IMCBuffer);
  }
}

std::vector<MemoryEvent> spontaneous_eviction_events(const MemorySystem& memory) {
  std::vector<MemoryEvent> out;
  const auto& units = memory.units();
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].stage == Stage::L3Cache && units[i].dirty && units[i].home.region == Region::PM)
      out.push_back({MemoryEventKind::Evict, i});
  }
  return out;
}

std::vector<MemoryEvent> imc_drain_events(const MemorySystem& memory) {
  std::vector<MemoryEvent> out;
  const auto& units = memory.units();
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].stage == Stage::IMCBuffer && units[i].home.region == Region::PM)
      out.push_back({MemoryEventKind::Drain, i});
  }
  return out;
}

void apply_memory_event(MemorySystem& memory, const MemoryEvent& event) {
  const auto& units = memory.units();
  if (event.unit >= units.size()) throw ModelError("memory event names a missing unit");
  const DataUnit& u = units[event.unit];
  if (event.kind == MemoryEventKind::Evict) {
    if (u.stage != Stage::L3Cache || !u.dirty) throw ModelError("eviction of a unit that is not dirty in L3");
    memory.move(event.unit, Stage::IMCBuffer);
  } else {
    if (u.stage != Stage::IMCBuffer) throw ModelError("drain of a unit outside the IMC buffers");
    memory.move(event.unit, Stage::PMDimm);
  }
}

}  // namespace rpmem
