#include "rpmem/log_record.hpp"

#include <algorithm>
#include <boost/crc.hpp>

namespace rpmem {

namespace {

void put_le32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le32(std::span<const std::uint8_t> b) {
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

std::uint32_t crc32c(std::span<const std::uint8_t> data) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

std::size_t record_size(std::size_t payload_length) {
  std::size_t raw = payload_length + kRecordOverhead;
  return (raw + kUnitBytes - 1) / kUnitBytes * kUnitBytes;
}

Bytes encode_record(std::span<const std::uint8_t> payload, std::size_t max_bytes) {
  if (payload.size() > 0xffffffffu || record_size(payload.size()) > max_bytes)
    throw ModelError("record payload of " + std::to_string(payload.size()) + " bytes does not fit");
  Bytes out;
  out.reserve(record_size(payload.size()));
  put_le32(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  put_le32(out, crc32c(out));
  out.resize(record_size(payload.size()), 0);
  return out;
}

std::optional<Bytes> decode_record(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kRecordOverhead) return std::nullopt;
  std::uint32_t length = get_le32(bytes);
  if (length > bytes.size() - kRecordOverhead) return std::nullopt;
  std::uint32_t stored = get_le32(bytes.subspan(4 + length, 4));
  if (crc32c(bytes.first(4 + length)) != stored) return std::nullopt;
  return Bytes(bytes.begin() + 4, bytes.begin() + 4 + length);
}

std::optional<Bytes> decode_record_at(const MemoryImage& image, std::uint32_t offset, std::size_t max_bytes) {
  Bytes raw = read_bytes(image, offset, max_bytes);
  return decode_record(raw);
}

std::vector<Word> to_words(std::span<const std::uint8_t> bytes) {
  std::vector<Word> out((bytes.size() + kUnitBytes - 1) / kUnitBytes, 0);
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i / kUnitBytes] |= Word(bytes[i]) << (8 * (i % kUnitBytes));
  return out;
}

Bytes from_words(std::span<const Word> words) {
  Bytes out;
  out.reserve(words.size() * kUnitBytes);
  for (Word w : words)
    for (std::size_t i = 0; i < kUnitBytes; ++i) out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
  return out;
}

std::uint32_t scan_log_tail(const MemoryImage& image, const LogLayout& layout) {
  std::uint32_t limit = layout.capacity;
  if (layout.tail_index) {
    Word committed = read_word(image, *layout.tail_index);
    limit = static_cast<std::uint32_t>(std::min<Word>(committed, layout.capacity));
  }
  Bytes region = read_bytes(image, layout.base, layout.capacity);
  std::uint32_t pos = 0;
  while (pos < limit) {
    auto rec = decode_record(std::span<const std::uint8_t>(region).subspan(pos, limit - pos));
    if (!rec) break;
    std::size_t size = record_size(rec->size());
    if (size > limit - pos) break;
    pos += static_cast<std::uint32_t>(size);
  }
  return pos;
}

}  // namespace rpmem
