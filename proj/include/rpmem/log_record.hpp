#pragma once

// Checksum-framed records: length (LE4) | payload | CRC-32C (LE4) over
// length+payload, zero-padded to a whole number of 8-byte units.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rpmem/memory_model.hpp"

namespace rpmem {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kRecordOverhead = 8;

std::uint32_t crc32c(std::span<const std::uint8_t> data);

std::size_t record_size(std::size_t payload_length);

/// Throws ModelError if the framed record would exceed `max_bytes`.
Bytes encode_record(std::span<const std::uint8_t> payload, std::size_t max_bytes = 1u << 20);

/// Parses a record at the front of `bytes`; nullopt if the length is
/// implausible for the available space or the checksum fails.
std::optional<Bytes> decode_record(std::span<const std::uint8_t> bytes);

/// Reads a record out of a recovered image.
std::optional<Bytes> decode_record_at(const MemoryImage& image, std::uint32_t offset, std::size_t max_bytes);

/// Little-endian 8-byte units; the input is zero-padded to a unit multiple.
std::vector<Word> to_words(std::span<const std::uint8_t> bytes);
Bytes from_words(std::span<const Word> words);

struct LogLayout {
  std::uint32_t base = 0;      // PM offset of the first record
  std::uint32_t capacity = 0;  // bytes available for records
  std::optional<std::uint32_t> tail_index;  // PM offset of the committed-tail word
};

/// Byte offset (relative to base) of the first record that fails
/// validation. When a tail index is present the result never exceeds the
/// committed tail it records.
std::uint32_t scan_log_tail(const MemoryImage& image, const LogLayout& layout);

}  // namespace rpmem
