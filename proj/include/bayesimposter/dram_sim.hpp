#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bayesimposter/page_synth.hpp"
#include "bayesimposter/rng.hpp"

namespace bayesimposter::dram {

struct DramGeometry {
  int channels = 1;
  int dimms = 2;
  int ranks = 1;
  int banks_per_dimm = 8;
  std::uint32_t rows = 1u << 15;
  int columns = 1024;

  int total_banks() const { return channels * dimms * ranks * banks_per_dimm; }
  // One 4 KiB frame per (bank,row): bank interleaves on the low frame bits.
  std::uint64_t frame_count() const { return static_cast<std::uint64_t>(total_banks()) * rows; }

  struct Address {
    int channel = 0;
    int dimm = 0;
    int rank = 0;
    int bank = 0;
    std::uint32_t row = 0;
  };

  Address map_frame(std::uint64_t frame) const;
  std::uint64_t frame_of(int bank, std::uint32_t row) const;

  void validate() const;
};

enum class FlipDirection { OneToZero, ZeroToOne };

const char* to_string(FlipDirection d);

struct FlipCell {
  int bank = 0;
  std::uint32_t row = 0;
  std::uint16_t byte_offset = 0;  // within the 4096-byte frame
  std::uint8_t bit_index = 0;     // 0..7
  FlipDirection direction = FlipDirection::OneToZero;
  std::uint64_t threshold_activations = 1'000'000;
};

struct FlipMap {
  std::vector<FlipCell> cells;

  std::string to_json() const;
  static FlipMap from_json(const std::string& text);
};

struct HammerConfig {
  std::uint64_t reads_per_address = 2'000'000;
  int aggressors_per_iteration = 4;
  double per_row_seconds = 51.45;
  double flips_per_vulnerable_row = 3.0;  // calibration linking row count to locations
  std::uint8_t fill_byte = 0xFF;          // profiling fill pattern
  double flip_attenuation = 1.0;          // < 1 models DRAM-hardware mitigations

  void validate() const;
};

struct ProfileEntry {
  std::uint64_t frame = 0;
  std::uint16_t page_offset = 0;
  std::uint8_t bit_index = 0;
  FlipDirection direction = FlipDirection::OneToZero;
};

struct ProfileResult {
  std::vector<ProfileEntry> flips;
  std::vector<std::pair<int, std::uint32_t>> aggressor_rows;  // (bank,row) hammered
  double elapsed_seconds = 0.0;
  std::uint64_t rows_hammered = 0;

  std::string to_json() const;
};

struct AppliedFlip {
  std::uint64_t frame = 0;
  std::uint16_t byte_offset = 0;
  std::uint8_t bit_index = 0;
  FlipDirection direction = FlipDirection::OneToZero;
  std::uint8_t before = 0;
  std::uint8_t after = 0;
};

// Simulated DRAM: seeded persistent vulnerable-cell map over a linear
// frame->(bank,row) geometry, sparse resident page contents, single-sided
// hammering with same-bank row-adjacency semantics.
class DramSim {
 public:
  // density = expected vulnerable cells per page, drawn per frame.
  DramSim(std::uint64_t seed, DramGeometry geometry, double density);
  // Injected cell list; used by targeted tests and scenarios.
  DramSim(DramGeometry geometry, FlipMap cells);

  const DramGeometry& geometry() const { return geometry_; }
  const FlipMap& flip_map() const { return flip_map_; }

  void place_page(std::uint64_t frame, const page::BssImage& image);
  // Resident bytes; fill pattern where profiling filled, zeros elsewhere.
  std::vector<std::uint8_t> read_page(std::uint64_t frame) const;

  // Hammers the given aggressor (bank,row) pairs with reads_per_address
  // activations each. A cell fires when some aggressor sits in its bank at
  // |row delta| = 1 and the accumulated activations meet its threshold; the
  // flip lands in the resident byte, in the cell's direction, idempotently.
  std::vector<AppliedFlip> hammer(const std::vector<std::pair<int, std::uint32_t>>& aggressors,
                                  const HammerConfig& config);

  // Single-sided profiling pass over block_pages frames starting at frame 0:
  // fills them with config.fill_byte, hammers aggressors_per_iteration
  // randomly chosen frames per iteration (one iteration per batch, covering
  // the block), then reports the observable flips against the fill pattern.
  ProfileResult profile(std::uint64_t block_pages, const HammerConfig& config, Rng& rng);

  // Cells of the ground-truth map adjacent (same bank, |row delta| = 1) to
  // any of the given aggressor rows.
  std::vector<FlipCell> cells_adjacent_to(
      const std::vector<std::pair<int, std::uint32_t>>& aggressors) const;

 private:
  void index_cells();
  std::vector<std::uint8_t>& resident_page(std::uint64_t frame);

  DramGeometry geometry_;
  FlipMap flip_map_;
  std::multimap<std::uint64_t, std::size_t> cells_by_frame_;  // frame -> cell index
  std::unordered_map<std::uint64_t, std::vector<std::uint8_t>> resident_;
  std::optional<std::pair<std::uint64_t, std::uint8_t>> fill_state_;  // (page count, byte)
};

// Reported profiling cost: (locations / flips_per_vulnerable_row) rows at
// per_row_seconds each, scaled by co-located VPS memory pressure
// (1.0 / 1.25 / 1.6 at 1 / 3 / 6 VPSs, linear in between).
double profiling_time_hours(std::uint64_t target_locations, const HammerConfig& config,
                            int vps_count);

}  // namespace bayesimposter::dram
