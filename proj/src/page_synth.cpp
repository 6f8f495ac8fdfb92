#include "bayesimposter/page_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bayesimposter::page {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t width_of(TagKind kind) {
  switch (kind) {
    case TagKind::Bool:
    case TagKind::Enum:
      return 1;
    case TagKind::Int16:
      return 2;
    case TagKind::Int64:
    case TagKind::Float64:
      return 8;
  }
  return 1;
}

const char* kind_name(TagKind k) {
  switch (k) {
    case TagKind::Bool: return "bool";
    case TagKind::Enum: return "enum";
    case TagKind::Int16: return "int16";
    case TagKind::Int64: return "int64";
    case TagKind::Float64: return "float64";
  }
  return "bool";
}

TagKind kind_from_name(const std::string& s) {
  if (s == "bool") return TagKind::Bool;
  if (s == "enum") return TagKind::Enum;
  if (s == "int16") return TagKind::Int16;
  if (s == "int64") return TagKind::Int64;
  if (s == "float64") return TagKind::Float64;
  throw std::invalid_argument("unknown tag kind: " + s);
}

const char* source_name(TagSource s) {
  switch (s) {
    case TagSource::State: return "state";
    case TagSource::Measurement: return "measurement";
    case TagSource::Constant: return "constant";
  }
  return "constant";
}

TagSource source_from_name(const std::string& s) {
  if (s == "state") return TagSource::State;
  if (s == "measurement") return TagSource::Measurement;
  if (s == "constant") return TagSource::Constant;
  throw std::invalid_argument("unknown tag source: " + s);
}

void store_le(std::vector<std::uint8_t>& bytes, std::size_t offset, std::uint64_t value,
              std::size_t width) {
  for (std::size_t b = 0; b < width; ++b) {
    bytes[offset + b] = static_cast<std::uint8_t>(value >> (8 * b));
  }
}

std::uint64_t load_le(const std::vector<std::uint8_t>& bytes, std::size_t offset, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < width; ++b) {
    v |= static_cast<std::uint64_t>(bytes[offset + b]) << (8 * b);
  }
  return v;
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng.uniform_int(i)]);
  }
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& ProtocolProfile::variants() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"EMQ X", "erlexec.dll"},
      {"Mosquitto", "mosquitto.dll"},
      {"MQTT-C", "mqtt_pal.dll"},
      {"eMQTT5", "MQTT_client.dll"},
      {"wolfMQTT", "MqttMessage.dll"},
  };
  return table;
}

ProtocolProfile ProtocolProfile::named(const std::string& variant) {
  for (const auto& [name, dll] : variants()) {
    if (name == variant) {
      ProtocolProfile p;
      p.variant = name;
      p.dll_name = dll;
      // Stand-ins for the broker's fixed globals; both sides derive the
      // identical values from the variant name alone.
      static const char* const kConstantNames[] = {
          "proto_version", "keepalive_default", "max_inflight",
          "session_expiry", "qos_policy",       "broker_build_id",
      };
      for (const char* cname : kConstantNames) {
        p.constants.push_back(ProtocolConstant{cname, fnv1a(name + std::string(":") + cname)});
      }
      return p;
    }
  }
  throw std::invalid_argument("unknown protocol variant: " + variant);
}

const TagDescriptor* TagTableLayout::find(const std::string& name) const {
  for (const auto& t : tags) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

TagTableLayout layout_from_model(const ics::WarehouseScenario& scenario,
                                 const ProtocolProfile& profile, std::uint64_t seed,
                                 std::size_t page_count) {
  const auto& model = scenario.model;
  TagTableLayout layout;
  layout.profile = profile;

  std::size_t cursor = 0;
  for (const auto& c : profile.constants) {
    TagDescriptor t;
    t.name = c.name;
    t.kind = TagKind::Int64;
    t.width = width_of(t.kind);
    t.offset = cursor;
    t.source = TagSource::Constant;
    t.domain = {static_cast<std::int64_t>(c.value)};
    cursor += t.width;
    layout.tags.push_back(std::move(t));
  }

  Rng rng(mix_seed(seed, 0x7a6));
  std::vector<int> state_order(static_cast<std::size_t>(model.state_count()));
  for (std::size_t i = 0; i < state_order.size(); ++i) state_order[i] = static_cast<int>(i);
  seeded_shuffle(state_order, rng);

  for (int i : state_order) {
    const auto& v = model.states[static_cast<std::size_t>(i)];
    TagDescriptor t;
    t.name = v.name;
    t.kind = v.domain_size() == 2 ? TagKind::Bool : TagKind::Enum;
    t.width = width_of(t.kind);
    t.offset = cursor;
    t.source = TagSource::State;
    t.source_id = v.id;
    for (int c = 0; c < v.domain_size(); ++c) t.domain.push_back(c);
    cursor += t.width;
    layout.tags.push_back(std::move(t));
  }

  auto add_measurement = [&](int j, std::size_t offset) {
    const auto& m = model.measurements[static_cast<std::size_t>(j)];
    TagDescriptor t;
    t.name = m.name;
    t.kind = TagKind::Int16;
    t.width = width_of(t.kind);
    t.offset = offset;
    t.source = TagSource::Measurement;
    t.source_id = m.id;
    for (int v : m.values) t.domain.push_back(v);
    const std::size_t end = offset + t.width;
    layout.tags.push_back(std::move(t));
    return end;
  };

  if (!model.measurements.empty()) {
    cursor = (cursor + 1) & ~std::size_t{1};  // int16 alignment
    const bool pin_threshold = scenario.threshold_var >= 0 &&
                               scenario.threshold_var < model.measurement_count() &&
                               cursor <= kThresholdOffset;
    std::vector<int> meas_order;
    for (int j = 0; j < model.measurement_count(); ++j) {
      if (!(pin_threshold && j == scenario.threshold_var)) meas_order.push_back(j);
    }
    seeded_shuffle(meas_order, rng);
    if (pin_threshold) cursor = add_measurement(scenario.threshold_var, kThresholdOffset);
    for (int j : meas_order) cursor = add_measurement(j, cursor);
  }

  const std::size_t needed = (cursor + kPageSize - 1) / kPageSize;
  if (page_count == 0) {
    layout.page_count = std::max<std::size_t>(1, needed);
  } else {
    if (needed > page_count) {
      throw CapacityError("layout does not fit in " + std::to_string(page_count) + " page(s)");
    }
    layout.page_count = page_count;
  }
  return layout;
}

BssImage synthesize_page(const TagTableLayout& layout, const TagValues& values) {
  BssImage image;
  image.bytes.assign(layout.image_size(), 0);  // zero-initialized .bss semantics
  for (const auto& t : layout.tags) {
    std::int64_t v;
    if (t.source == TagSource::Constant) {
      v = t.domain.at(0);
    } else {
      auto it = values.find(t.name);
      if (it == values.end()) {
        throw std::invalid_argument("synthesize_page: missing value for tag " + t.name);
      }
      v = it->second;
      if (!t.domain.empty() && std::find(t.domain.begin(), t.domain.end(), v) == t.domain.end()) {
        throw std::invalid_argument("synthesize_page: value outside domain for tag " + t.name);
      }
    }
    store_le(image.bytes, t.offset, static_cast<std::uint64_t>(v), t.width);
  }
  if (layout.signature) {
    store_le(image.bytes, layout.signature->offset, layout.signature->value, 8);
  }
  return image;
}

DecodeReport decode_page(const BssImage& image, const TagTableLayout& layout) {
  if (image.bytes.size() != layout.image_size()) {
    throw std::invalid_argument("decode_page: image length does not match layout");
  }
  DecodeReport report;
  for (const auto& t : layout.tags) {
    const auto raw = static_cast<std::int64_t>(load_le(image.bytes, t.offset, t.width));
    report.values[t.name] = raw;
    if (!t.domain.empty() && std::find(t.domain.begin(), t.domain.end(), raw) == t.domain.end()) {
      report.flags.push_back(DecodeFlag{t.name, raw, "out-of-range"});
    }
  }
  return report;
}

double entropy_bits(const TagTableLayout& layout) {
  double bits = 0.0;
  for (const auto& t : layout.tags) {
    if (t.source == TagSource::Constant) continue;
    bits += std::log2(static_cast<double>(t.domain.size()));
  }
  if (layout.signature) bits += 64.0;
  return bits;
}

bayes::Combinatorics bruteforce_cost(const TagTableLayout& layout) {
  std::vector<int> state_sizes;
  std::vector<int> meas_sizes;
  for (const auto& t : layout.tags) {
    if (t.source == TagSource::State) state_sizes.push_back(static_cast<int>(t.domain.size()));
    if (t.source == TagSource::Measurement) meas_sizes.push_back(static_cast<int>(t.domain.size()));
  }
  return bayes::combinations(state_sizes, meas_sizes);
}

TagTableLayout apply_signature_defense(const TagTableLayout& layout, Rng& rng) {
  TagTableLayout defended = layout;
  const std::size_t size = layout.image_size();
  for (std::size_t offset = size - 8;; offset -= 8) {
    bool overlaps = false;
    for (const auto& t : layout.tags) {
      if (offset < t.offset + t.width && t.offset < offset + 8) {
        overlaps = true;
        break;
      }
    }
    if (!overlaps) {
      defended.signature = SignatureSlot{offset, rng.next_u64()};
      return defended;
    }
    if (offset == 0) break;
  }
  throw CapacityError("apply_signature_defense: no free 8-byte slot");
}

void write_page_file(const std::string& path, const BssImage& image) {
  if (image.bytes.size() % kPageSize != 0) {
    throw std::invalid_argument("write_page_file: length not a multiple of 4096");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_page_file: cannot open " + path);
  out.write(reinterpret_cast<const char*>(image.bytes.data()),
            static_cast<std::streamsize>(image.bytes.size()));
}

BssImage read_page_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("read_page_file: cannot open " + path);
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size == 0 || size % kPageSize != 0) {
    throw std::invalid_argument("read_page_file: length not a multiple of 4096");
  }
  BssImage image;
  image.bytes.resize(size);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(image.bytes.data()), static_cast<std::streamsize>(size));
  return image;
}

// --- serialization ---

std::string TagTableLayout::to_json() const {
  json j;
  j["page_count"] = page_count;
  j["profile"] = {{"variant", profile.variant}, {"dll_name", profile.dll_name}};
  json consts = json::array();
  for (const auto& c : profile.constants) {
    consts.push_back({{"name", c.name}, {"value", c.value}});
  }
  j["profile"]["constants"] = consts;
  json tag_list = json::array();
  for (const auto& t : tags) {
    tag_list.push_back({{"name", t.name},
                        {"kind", kind_name(t.kind)},
                        {"offset", t.offset},
                        {"width", t.width},
                        {"source", source_name(t.source)},
                        {"source_id", t.source_id},
                        {"domain", t.domain}});
  }
  j["tags"] = tag_list;
  if (signature) {
    j["signature"] = {{"offset", signature->offset}, {"value", signature->value}};
  }
  return j.dump();
}

TagTableLayout TagTableLayout::from_json(const std::string& text) {
  json j = json::parse(text);
  TagTableLayout layout;
  layout.page_count = j.at("page_count").get<std::size_t>();
  layout.profile.variant = j.at("profile").at("variant").get<std::string>();
  layout.profile.dll_name = j.at("profile").at("dll_name").get<std::string>();
  for (const auto& c : j.at("profile").at("constants")) {
    layout.profile.constants.push_back(
        ProtocolConstant{c.at("name").get<std::string>(), c.at("value").get<std::uint64_t>()});
  }
  for (const auto& e : j.at("tags")) {
    TagDescriptor t;
    t.name = e.at("name").get<std::string>();
    t.kind = kind_from_name(e.at("kind").get<std::string>());
    t.offset = e.at("offset").get<std::size_t>();
    t.width = e.at("width").get<std::size_t>();
    t.source = source_from_name(e.at("source").get<std::string>());
    t.source_id = e.at("source_id").get<int>();
    t.domain = e.at("domain").get<std::vector<std::int64_t>>();
    layout.tags.push_back(std::move(t));
  }
  if (j.contains("signature")) {
    layout.signature = SignatureSlot{j.at("signature").at("offset").get<std::size_t>(),
                                     j.at("signature").at("value").get<std::uint64_t>()};
  }
  return layout;
}

std::string DecodeReport::to_json() const {
  json j;
  j["values"] = values;
  json flags_json = json::array();
  for (const auto& f : flags) {
    flags_json.push_back({{"tag", f.tag}, {"raw", f.raw}, {"reason", f.reason}});
  }
  j["flags"] = flags_json;
  return j.dump();
}

}  // namespace bayesimposter::page
