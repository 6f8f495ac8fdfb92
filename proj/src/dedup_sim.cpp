#include "bayesimposter/dedup_sim.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bayesimposter::dedup {

using nlohmann::json;

void ScanConfig::validate() const {
  if (pages_to_scan < 1) throw std::invalid_argument("scan config: pages_to_scan must be >= 1");
  if (sleep_millisec < 0) throw std::invalid_argument("scan config: sleep_millisec must be >= 0");
  if (gb_scan_minutes <= 0.0) throw std::invalid_argument("scan config: gb_scan_minutes must be positive");
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::InsertedUnstable: return "inserted-unstable";
    case EventKind::Merged: return "merged";
    case EventKind::CowBreak: return "cow-break";
    case EventKind::DroppedChangedChecksum: return "dropped-changed-checksum";
  }
  return "unknown";
}

std::string DedupEvent::to_json_line() const {
  json j;
  j["t"] = t_ms;
  j["kind"] = to_string(kind);
  j["frames"] = frames;
  return j.dump();
}

// Adler-style 32-bit rolling checksum; only stability across visits matters.
std::uint32_t page_checksum(std::span<const std::uint8_t> data) {
  std::uint32_t a = 1, b = 0;
  for (std::uint8_t byte : data) {
    a = (a + byte) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

bool FrameStore::ContentLess::operator()(FrameNo a, FrameNo b) const {
  ++store->comparisons_;
  const auto& ca = store->frames_[a].content;
  const auto& cb = store->frames_[b].content;
  return std::memcmp(ca.data(), cb.data(), kPageSize) < 0;
}

FrameStore::FrameStore() : stable_(ContentLess{this}), unstable_(ContentLess{this}) {}

PageFrame& FrameStore::frame_mut(FrameNo no) {
  if (no >= frames_.size()) throw std::out_of_range("frame number out of range");
  return frames_[no];
}

const PageFrame& FrameStore::frame(FrameNo no) const {
  if (no >= frames_.size()) throw std::out_of_range("frame number out of range");
  return frames_[no];
}

FrameNo FrameStore::alloc_frame(std::vector<std::uint8_t> content, Owner owner) {
  if (content.size() != kPageSize) throw std::invalid_argument("page content must be 4096 bytes");
  PageFrame f;
  f.frame_no = static_cast<FrameNo>(frames_.size());
  f.content = std::move(content);
  f.owners.insert(owner);
  frames_.push_back(std::move(f));
  return frames_.back().frame_no;
}

void FrameStore::register_vps(int vps_id, const std::vector<std::vector<std::uint8_t>>& pages) {
  if (vps_pages_.count(vps_id)) {
    throw std::invalid_argument("register_vps: id already in use");
  }
  auto& mapping = vps_pages_[vps_id];
  for (std::size_t idx = 0; idx < pages.size(); ++idx) {
    mapping[static_cast<int>(idx)] = alloc_frame(pages[idx], Owner{vps_id, static_cast<int>(idx)});
  }
}

FrameNo FrameStore::frame_of(int vps_id, int page_idx) const {
  auto vit = vps_pages_.find(vps_id);
  if (vit == vps_pages_.end()) throw std::out_of_range("unknown vps id");
  auto pit = vit->second.find(page_idx);
  if (pit == vit->second.end()) throw std::out_of_range("page not mapped");
  return pit->second;
}

std::size_t FrameStore::live_frame_count() const {
  return static_cast<std::size_t>(std::count_if(frames_.begin(), frames_.end(),
                                                [](const PageFrame& f) { return f.live; }));
}

std::size_t FrameStore::merged_frame_count() const {
  return static_cast<std::size_t>(std::count_if(
      frames_.begin(), frames_.end(), [](const PageFrame& f) { return f.live && f.merged; }));
}

std::size_t FrameStore::candidate_count() const {
  return static_cast<std::size_t>(std::count_if(
      frames_.begin(), frames_.end(), [](const PageFrame& f) { return f.live && !f.merged; }));
}

void FrameStore::emit(EventKind kind, std::vector<FrameNo> frames) {
  event_log_.push_back(DedupEvent{sim_time_ms_, kind, std::move(frames)});
}

void FrameStore::unstable_evict(FrameNo no) {
  // set::erase(key) would memcmp against mutated content; scan for identity.
  for (auto it = unstable_.begin(); it != unstable_.end(); ++it) {
    if (*it == no) {
      unstable_.erase(it);
      return;
    }
  }
}

FrameNo FrameStore::next_candidate() {
  const auto n = static_cast<FrameNo>(frames_.size());
  for (FrameNo probed = 0; probed < n; ++probed) {
    const FrameNo no = (scan_cursor_ + probed) % n;
    const auto& f = frames_[no];
    if (f.live && !f.merged) {
      scan_cursor_ = (no + 1) % n;
      return no;
    }
  }
  return n;  // no candidates
}

std::vector<DedupEvent> FrameStore::scan_tick(const ScanConfig& config) {
  config.validate();
  const std::size_t log_mark = event_log_.size();
  if (ksm_enabled_ && !frames_.empty()) {
    for (int scanned = 0; scanned < config.pages_to_scan; ++scanned) {
      const FrameNo cand = next_candidate();
      if (cand >= frames_.size()) break;

      // 1. Stable tree: content match means the candidate's owners move onto
      //    the already write-protected frame.
      if (auto sit = stable_.find(cand); sit != stable_.end()) {
        PageFrame& stable_frame = frame_mut(*sit);
        PageFrame& victim = frame_mut(cand);
        for (const Owner& o : victim.owners) {
          vps_pages_[o.first][o.second] = stable_frame.frame_no;
          stable_frame.owners.insert(o);
        }
        victim.owners.clear();
        victim.live = false;
        unstable_evict(cand);
        checksums_.erase(cand);
        emit(EventKind::Merged, {stable_frame.frame_no, cand});
        continue;
      }

      // 2. Checksum stability gate; a first visit counts as changed.
      const std::uint32_t ck = page_checksum(frames_[cand].content);
      auto ckit = checksums_.find(cand);
      if (ckit == checksums_.end() || ckit->second != ck) {
        checksums_[cand] = ck;
        emit(EventKind::DroppedChangedChecksum, {cand});
        continue;
      }

      // 3. Unstable tree search / insert.
      auto uit = unstable_.find(cand);
      if (uit != unstable_.end() && *uit != cand) {
        // Partner with equal content: both collapse onto the earlier arrival,
        // which becomes a write-protected stable frame.
        const FrameNo survivor = *uit;
        unstable_.erase(uit);
        PageFrame& keep = frame_mut(survivor);
        PageFrame& gone = frame_mut(cand);
        for (const Owner& o : gone.owners) {
          vps_pages_[o.first][o.second] = survivor;
          keep.owners.insert(o);
        }
        gone.owners.clear();
        gone.live = false;
        checksums_.erase(cand);
        checksums_.erase(survivor);
        keep.merged = true;
        keep.write_protected = true;
        stable_.insert(survivor);
        emit(EventKind::Merged, {survivor, cand});
      } else if (uit == unstable_.end()) {
        unstable_.insert(cand);
        emit(EventKind::InsertedUnstable, {cand});
      }
      // Candidate already present in the tree: nothing to do this pass.
    }
  }
  sim_time_ms_ += config.sleep_millisec;
  return {event_log_.begin() + static_cast<std::ptrdiff_t>(log_mark), event_log_.end()};
}

LatencyClass FrameStore::write_page(int vps_id, int page_idx, std::span<const std::uint8_t> data) {
  if (data.size() != kPageSize) throw std::invalid_argument("write_page: data must be 4096 bytes");
  const FrameNo no = frame_of(vps_id, page_idx);
  PageFrame& f = frame_mut(no);
  const Owner owner{vps_id, page_idx};

  if (f.merged) {
    // Copy-on-write: the writer leaves the shared frame.
    f.owners.erase(owner);
    const FrameNo copy = alloc_frame(std::vector<std::uint8_t>(data.begin(), data.end()), owner);
    vps_pages_[vps_id][page_idx] = copy;
    PageFrame& shared = frame_mut(no);  // alloc may have reallocated frames_
    if (shared.owners.size() < 2) {
      shared.merged = false;
      shared.write_protected = false;
      for (auto it = stable_.begin(); it != stable_.end(); ++it) {
        if (*it == no) {
          stable_.erase(it);
          break;
        }
      }
    }
    emit(EventKind::CowBreak, {no, copy});
    return LatencyClass::Slow;
  }

  unstable_evict(no);  // tree keys must not mutate underneath the comparator
  f.content.assign(data.begin(), data.end());
  return LatencyClass::Fast;
}

bool FrameStore::detect_merge_via_timing(int vps_id, int page_idx) {
  const FrameNo no = frame_of(vps_id, page_idx);
  std::vector<std::uint8_t> original = frame(no).content;
  std::vector<std::uint8_t> probe = original;
  probe[0] ^= 0xA5;
  const LatencyClass cls = write_page(vps_id, page_idx, probe);
  write_page(vps_id, page_idx, original);
  return cls == LatencyClass::Slow;
}

std::vector<FrameNo> FrameStore::stable_inorder() const {
  return {stable_.begin(), stable_.end()};
}

std::vector<FrameNo> FrameStore::unstable_inorder() const {
  return {unstable_.begin(), unstable_.end()};
}

double dedup_time_minutes(std::uint64_t total_bytes, const ScanConfig& config) {
  if (total_bytes == 0) throw std::invalid_argument("dedup_time: total_bytes must be positive");
  return config.gb_scan_minutes * (static_cast<double>(total_bytes) / (1024.0 * 1024.0 * 1024.0));
}

std::string FrameStore::events_to_jsonl() const {
  std::ostringstream out;
  for (const auto& e : event_log_) out << e.to_json_line() << "\n";
  return out.str();
}

std::string FrameStore::snapshot_json() const {
  json j;
  j["sim_time_ms"] = sim_time_ms_;
  j["ksm_enabled"] = ksm_enabled_;
  json fl = json::array();
  for (const auto& f : frames_) {
    json owners = json::array();
    for (const auto& o : f.owners) owners.push_back({o.first, o.second});
    fl.push_back({{"frame", f.frame_no},
                  {"live", f.live},
                  {"merged", f.merged},
                  {"write_protected", f.write_protected},
                  {"owners", owners},
                  {"checksum", page_checksum(f.content)}});
  }
  j["frames"] = fl;
  j["stable"] = stable_inorder();
  j["unstable"] = unstable_inorder();
  return j.dump(2);
}

}  // namespace bayesimposter::dedup
