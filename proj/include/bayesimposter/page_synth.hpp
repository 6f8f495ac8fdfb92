#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bayesimposter/bayes_estimator.hpp"
#include "bayesimposter/ics_model.hpp"
#include "bayesimposter/rng.hpp"

namespace bayesimposter::page {

constexpr std::size_t kPageSize = 4096;
// The threshold tag is pinned here so its upper byte sits at row offset
// 0x0743, the coordinate observed in the reconstructed DRAM dump.
constexpr std::size_t kThresholdOffset = 0x0742;

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TagKind { Bool, Enum, Int16, Int64, Float64 };

enum class TagSource { State, Measurement, Constant };

struct TagDescriptor {
  std::string name;
  TagKind kind = TagKind::Bool;
  std::size_t offset = 0;
  std::size_t width = 1;
  TagSource source = TagSource::Constant;
  int source_id = -1;                // state/measurement variable id
  std::vector<std::int64_t> domain;  // admissible stored values
};

struct ProtocolConstant {
  std::string name;
  std::uint64_t value = 0;
};

struct ProtocolProfile {
  std::string variant;
  std::string dll_name;
  std::vector<ProtocolConstant> constants;

  // The five supported broker variants with their control DLL names.
  static const std::vector<std::pair<std::string, std::string>>& variants();
  static ProtocolProfile named(const std::string& variant);
};

struct SignatureSlot {
  std::size_t offset = 0;
  std::uint64_t value = 0;  // drawn fresh per victim instantiation
};

struct TagTableLayout {
  std::size_t page_count = 1;
  std::vector<TagDescriptor> tags;
  ProtocolProfile profile;
  std::optional<SignatureSlot> signature;

  std::size_t image_size() const { return page_count * kPageSize; }
  const TagDescriptor* find(const std::string& name) const;
  std::string to_json() const;
  static TagTableLayout from_json(const std::string& text);
};

struct BssImage {
  std::vector<std::uint8_t> bytes;

  bool operator==(const BssImage&) const = default;
};

// Raw `.page` files: exact bytes, length must be a multiple of 4096.
void write_page_file(const std::string& path, const BssImage& image);
BssImage read_page_file(const std::string& path);

using TagValues = std::map<std::string, std::int64_t>;

// Packs the scenario's variables into a page-aligned tag table: protocol
// constants first, one byte per state tag (bool for binary domains, enum
// otherwise), int16 per measurement tag, little-endian throughout. Tag order
// within each class is a seeded shuffle (stand-in for link order); the
// threshold tag is pinned at kThresholdOffset when it fits. page_count = 0
// picks the minimal count; an explicit count that is too small raises
// CapacityError.
TagTableLayout layout_from_model(const ics::WarehouseScenario& scenario,
                                 const ProtocolProfile& profile, std::uint64_t seed,
                                 std::size_t page_count = 0);

// Byte-exact serialization. Every non-constant tag needs a value inside its
// domain; constants come from the profile; unset padding stays zero.
BssImage synthesize_page(const TagTableLayout& layout, const TagValues& values);

struct DecodeFlag {
  std::string tag;
  std::int64_t raw = 0;
  std::string reason;  // "out-of-range"
};

struct DecodeReport {
  TagValues values;  // raw decoded values, including corrupted ones
  std::vector<DecodeFlag> flags;

  std::string to_json() const;
};

DecodeReport decode_page(const BssImage& image, const TagTableLayout& layout);

// Sum over tags of log2(effective domain size); constants contribute 0, the
// signature slot contributes 64.
double entropy_bits(const TagTableLayout& layout);

// Spray cost for guessing this layout by brute force, from the per-tag
// domain sizes (states and measurements counted as separate classes).
bayes::Combinatorics bruteforce_cost(const TagTableLayout& layout);

// Reserves a free 8-byte slot and fills it with a fresh 64-bit draw.
TagTableLayout apply_signature_defense(const TagTableLayout& layout, Rng& rng);

}  // namespace bayesimposter::page
