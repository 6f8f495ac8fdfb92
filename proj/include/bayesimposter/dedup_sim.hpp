#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bayesimposter::dedup {

constexpr std::size_t kPageSize = 4096;

using FrameNo = std::uint32_t;
using Owner = std::pair<int, int>;  // (vps id, page index)

struct ScanConfig {
  int pages_to_scan = 100;     // candidates per wake
  int sleep_millisec = 20;     // clock advance per tick
  double gb_scan_minutes = 5.0;  // nominal reported scan rate

  void validate() const;
};

struct PageFrame {
  FrameNo frame_no = 0;
  std::vector<std::uint8_t> content;
  std::set<Owner> owners;
  bool write_protected = false;
  bool merged = false;
  bool live = true;
};

enum class EventKind { InsertedUnstable, Merged, CowBreak, DroppedChangedChecksum };

const char* to_string(EventKind kind);

struct DedupEvent {
  std::int64_t t_ms = 0;
  EventKind kind = EventKind::InsertedUnstable;
  std::vector<FrameNo> frames;

  std::string to_json_line() const;
};

enum class LatencyClass { Fast, Slow };

// Frame store plus the samepage-merging forest and its simulated clock.
// One instance is one logical timeline: callers serialize access.
class FrameStore {
 public:
  FrameStore();
  FrameStore(const FrameStore&) = delete;
  FrameStore& operator=(const FrameStore&) = delete;

  // Allocates one frame per page, none merged. Throws on a duplicate id.
  void register_vps(int vps_id, const std::vector<std::vector<std::uint8_t>>& pages);

  // Processes pages_to_scan candidates in round-robin frame order, then
  // advances the clock by sleep_millisec. Per candidate: stable-tree search
  // and merge on content match; otherwise a checksum-stability gate, then
  // unstable-tree search (merge both into stable on a match, insert
  // otherwise). A changed or first-seen checksum drops the candidate.
  std::vector<DedupEvent> scan_tick(const ScanConfig& config);

  // In-place write on a private frame (Fast); copy-on-write split on a
  // merged frame (Slow): the writer gets a private copy and the shared frame
  // is demoted once fewer than two owners remain.
  LatencyClass write_page(int vps_id, int page_idx, std::span<const std::uint8_t> data);

  // Write probe: returns true iff the probe write came back Slow, then
  // restores the original bytes with a second write.
  bool detect_merge_via_timing(int vps_id, int page_idx);

  void set_ksm_enabled(bool enabled) { ksm_enabled_ = enabled; }
  bool ksm_enabled() const { return ksm_enabled_; }

  FrameNo frame_of(int vps_id, int page_idx) const;
  const PageFrame& frame(FrameNo no) const;
  std::int64_t sim_time_ms() const { return sim_time_ms_; }
  const std::vector<DedupEvent>& event_log() const { return event_log_; }
  std::size_t live_frame_count() const;
  std::size_t merged_frame_count() const;
  // Number of live unmerged frames, i.e. scan candidates per full pass.
  std::size_t candidate_count() const;

  // memcmp invocations performed by tree lookups/inserts since construction.
  std::uint64_t content_comparisons() const { return comparisons_; }
  std::size_t stable_size() const { return stable_.size(); }
  std::size_t unstable_size() const { return unstable_.size(); }
  // In-order frame lists; contents must come out sorted.
  std::vector<FrameNo> stable_inorder() const;
  std::vector<FrameNo> unstable_inorder() const;

  std::string events_to_jsonl() const;
  std::string snapshot_json() const;  // debugging dump

 private:
  struct ContentLess {
    FrameStore* store = nullptr;
    bool operator()(FrameNo a, FrameNo b) const;
  };
  using ContentTree = std::set<FrameNo, ContentLess>;

  PageFrame& frame_mut(FrameNo no);
  FrameNo alloc_frame(std::vector<std::uint8_t> content, Owner owner);
  void unstable_evict(FrameNo no);
  void emit(EventKind kind, std::vector<FrameNo> frames);
  FrameNo next_candidate();

  std::vector<PageFrame> frames_;
  std::map<int, std::map<int, FrameNo>> vps_pages_;
  ContentTree stable_;
  ContentTree unstable_;
  std::map<FrameNo, std::uint32_t> checksums_;
  std::vector<DedupEvent> event_log_;
  std::int64_t sim_time_ms_ = 0;
  FrameNo scan_cursor_ = 0;
  bool ksm_enabled_ = true;
  mutable std::uint64_t comparisons_ = 0;
};

// Reported scan duration: gb_scan_minutes per GiB of scannable memory.
// Callers pass the total co-located bytes (single-VPS size times VPS count).
double dedup_time_minutes(std::uint64_t total_bytes, const ScanConfig& config);

std::uint32_t page_checksum(std::span<const std::uint8_t> data);

}  // namespace bayesimposter::dedup
