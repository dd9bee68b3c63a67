#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dabn/hash.hpp"
#include "dabn/matrix.hpp"
#include "dabn/rng.hpp"

namespace dabn {

// One timestamped 3-axis accelerometer reading tagged with the recording
// subject and activity.
struct Sample {
  std::string subject;
  std::string activity;
  std::int64_t timestamp_ns = 0;
  std::array<double, 3> accel{};
};

// A fixed-length block of consecutive samples; the classification unit.
struct Window {
  std::string subject;
  std::string label;
  std::size_t index = 0;  // position in the subject's ordered window list
  Matrix data;            // window_len x 3
};

struct SeriesInfo {
  std::string subject;
  std::string activity;
  std::size_t raw_count = 0;
  std::size_t window_count = 0;
};

// Preprocessed windows for a set of subjects, together with the label set and
// a descriptor of the pipeline that produced them.
struct Dataset {
  std::vector<std::string> labels;    // ordered label set
  std::vector<std::string> subjects;  // ordered subject ids
  std::vector<std::vector<Window>> windows;  // [subject_idx][tau]
  std::vector<SeriesInfo> series;
  std::size_t window_len = 40;
  std::size_t stride = 20;
  std::string pipeline;

  std::size_t label_index(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) return i;
    throw std::invalid_argument("unknown label: " + std::string(label));
  }
  std::size_t subject_index(std::string_view subject) const {
    for (std::size_t i = 0; i < subjects.size(); ++i)
      if (subjects[i] == subject) return i;
    throw std::invalid_argument("unknown subject: " + std::string(subject));
  }
  std::size_t total_windows() const {
    std::size_t n = 0;
    for (const auto& w : windows) n += w.size();
    return n;
  }
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

struct IngestResult {
  // groups keyed by (subject, activity), sorted, each time-sorted
  std::vector<std::vector<Sample>> groups;
  std::size_t malformed_rows = 0;
};

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

inline bool parse_i64(const std::string& s, std::int64_t& out) {
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r' ||
                          f.back() == ';'))
      f.pop_back();
  }
  return fields;
}

}  // namespace detail

// Reads `subject,activity,timestamp_ns,x,y,z` rows (header optional), groups
// them by (subject, activity) and sorts each group by time. Malformed rows
// are skipped and counted.
inline IngestResult ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open input csv: " + path);

  std::map<std::pair<std::string, std::string>, std::vector<Sample>> groups;
  IngestResult result;
  std::string line;
  bool first = true;
  std::size_t valid = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    bool ok = fields.size() == 6;
    Sample s;
    if (ok) {
      s.subject = fields[0];
      s.activity = fields[1];
      ok = !s.subject.empty() && !s.activity.empty() &&
           detail::parse_i64(fields[2], s.timestamp_ns) &&
           detail::parse_double(fields[3], s.accel[0]) &&
           detail::parse_double(fields[4], s.accel[1]) &&
           detail::parse_double(fields[5], s.accel[2]);
    }
    if (!ok) {
      // A leading header row does not count as malformed.
      if (!first) ++result.malformed_rows;
      first = false;
      continue;
    }
    first = false;
    groups[{s.subject, s.activity}].push_back(std::move(s));
    ++valid;
  }
  if (valid == 0) throw std::runtime_error("no valid rows in input csv: " + path);

  for (auto& [key, samples] : groups) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const Sample& a, const Sample& b) {
                       return a.timestamp_ns < b.timestamp_ns;
                     });
    result.groups.push_back(std::move(samples));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Preprocessing chain
// ---------------------------------------------------------------------------

inline constexpr std::int64_t kResampleStepNs = 50'000'000;  // 20 Hz

// Linear interpolation onto an exact 50 ms grid starting at the first input
// timestamp; grid points beyond the last input are dropped.
inline std::vector<Sample> resample_20hz(std::span<const Sample> series) {
  if (series.size() < 2) throw std::invalid_argument("resample_20hz: need at least 2 samples");
  for (std::size_t i = 1; i < series.size(); ++i)
    if (series[i].timestamp_ns <= series[i - 1].timestamp_ns)
      throw std::invalid_argument("resample_20hz: timestamps must be strictly increasing");

  std::vector<Sample> out;
  const std::int64_t t0 = series.front().timestamp_ns;
  const std::int64_t t_last = series.back().timestamp_ns;
  std::size_t j = 0;
  for (std::int64_t k = 0;; ++k) {
    const std::int64_t t = t0 + k * kResampleStepNs;
    if (t > t_last) break;
    while (j + 1 < series.size() && series[j + 1].timestamp_ns < t) ++j;
    Sample s = series[j];
    s.timestamp_ns = t;
    if (t > series[j].timestamp_ns) {
      const Sample& a = series[j];
      const Sample& b = series[j + 1];
      const double w = static_cast<double>(t - a.timestamp_ns) /
                       static_cast<double>(b.timestamp_ns - a.timestamp_ns);
      for (int ax = 0; ax < 3; ++ax)
        s.accel[static_cast<std::size_t>(ax)] =
            (1.0 - w) * a.accel[static_cast<std::size_t>(ax)] +
            w * b.accel[static_cast<std::size_t>(ax)];
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Non-centered moving average: each output is the mean of the current and up
// to width-1 preceding inputs, so early outputs average what exists so far.
inline std::vector<Sample> moving_average(std::span<const Sample> series,
                                          std::size_t width = 4) {
  if (series.empty()) throw std::invalid_argument("moving_average: empty series");
  if (width == 0) throw std::invalid_argument("moving_average: width must be >= 1");
  std::vector<Sample> out(series.begin(), series.end());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i + 1 >= width ? i + 1 - width : 0;
    const double n = static_cast<double>(i - lo + 1);
    for (std::size_t ax = 0; ax < 3; ++ax) {
      double sum = 0.0;
      for (std::size_t k = lo; k <= i; ++k) sum += series[k].accel[ax];
      out[i].accel[ax] = sum / n;
    }
  }
  return out;
}

// Min-max normalization into [0,1]; out-of-range readings are clamped first.
inline std::vector<Sample> minmax_normalize(std::span<const Sample> series, double lo = -78.0,
                                            double hi = 78.0) {
  if (!(lo < hi)) throw std::invalid_argument("minmax_normalize: lo must be < hi");
  std::vector<Sample> out(series.begin(), series.end());
  for (Sample& s : out)
    for (double& v : s.accel) v = (std::clamp(v, lo, hi) - lo) / (hi - lo);
  return out;
}

// Sliding windows of length nu with the given stride; each window takes the
// majority label, ties broken by the label occurring earliest in the window.
inline std::vector<Window> make_windows(std::span<const Sample> series, std::size_t nu = 40,
                                        std::size_t stride = 20) {
  if (nu == 0 || stride == 0) throw std::invalid_argument("make_windows: nu and stride >= 1");
  if (series.size() < nu)
    throw std::invalid_argument("make_windows: series shorter than one window");
  const std::size_t count = (series.size() - nu) / stride + 1;
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    Window win;
    win.subject = series[start].subject;
    win.index = w;
    win.data = Matrix(nu, 3);
    std::vector<std::string> order;        // labels by first occurrence
    std::vector<std::size_t> occurrences;  // aligned counts
    for (std::size_t i = 0; i < nu; ++i) {
      const Sample& s = series[start + i];
      for (std::size_t ax = 0; ax < 3; ++ax) win.data(i, ax) = s.accel[ax];
      bool seen = false;
      for (std::size_t k = 0; k < order.size(); ++k)
        if (order[k] == s.activity) {
          ++occurrences[k];
          seen = true;
          break;
        }
      if (!seen) {
        order.push_back(s.activity);
        occurrences.push_back(1);
      }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < order.size(); ++k)
      if (occurrences[k] > occurrences[best]) best = k;  // strict: ties keep earliest
    win.label = order[best];
    out.push_back(std::move(win));
  }
  return out;
}

struct PipelineParams {
  std::size_t filter_width = 4;
  double minmax_lo = -78.0;
  double minmax_hi = 78.0;
  std::size_t window_len = 40;
  std::size_t stride = 20;

  std::string descriptor() const {
    std::ostringstream os;
    os << "resample20hz|mavg" << filter_width << "|minmax[" << minmax_lo << "," << minmax_hi
       << "]|win" << window_len << "s" << stride;
    return os.str();
  }
};

// Full preprocessing chain over per-(subject, activity) groups, in the fixed
// order resample -> moving_average -> minmax_normalize -> make_windows, then
// a deterministic ordered merge into a Dataset.
inline Dataset run_pipeline(const std::vector<std::vector<Sample>>& groups,
                            const PipelineParams& params = {}) {
  Dataset ds;
  ds.window_len = params.window_len;
  ds.stride = params.stride;
  ds.pipeline = params.descriptor();

  struct GroupWindows {
    std::string subject;
    std::string activity;
    std::vector<Window> wins;
    std::size_t raw_count;
  };
  std::vector<GroupWindows> processed;
  for (const auto& group : groups) {
    if (group.empty()) continue;
    // duplicate timestamps occur in raw recordings; keep the first reading
    std::vector<Sample> deduped;
    deduped.reserve(group.size());
    for (const Sample& s : group)
      if (deduped.empty() || s.timestamp_ns > deduped.back().timestamp_ns) deduped.push_back(s);
    auto series = resample_20hz(deduped);
    const std::size_t raw = series.size();
    series = moving_average(series, params.filter_width);
    series = minmax_normalize(series, params.minmax_lo, params.minmax_hi);
    auto wins = make_windows(series, params.window_len, params.stride);
    for (auto& w : wins) w.label = group.front().activity;
    processed.push_back(
        {group.front().subject, group.front().activity, std::move(wins), raw});
  }
  if (processed.empty()) throw std::runtime_error("run_pipeline: no usable groups");

  std::sort(processed.begin(), processed.end(), [](const GroupWindows& a, const GroupWindows& b) {
    return std::tie(a.subject, a.activity) < std::tie(b.subject, b.activity);
  });
  for (const auto& g : processed) {
    if (std::find(ds.labels.begin(), ds.labels.end(), g.activity) == ds.labels.end())
      ds.labels.push_back(g.activity);
    if (std::find(ds.subjects.begin(), ds.subjects.end(), g.subject) == ds.subjects.end())
      ds.subjects.push_back(g.subject);
  }
  std::sort(ds.labels.begin(), ds.labels.end());
  std::sort(ds.subjects.begin(), ds.subjects.end());

  ds.windows.resize(ds.subjects.size());
  for (auto& g : processed) {
    const std::size_t si = ds.subject_index(g.subject);
    ds.series.push_back({g.subject, g.activity, g.raw_count, g.wins.size()});
    for (auto& w : g.wins) {
      w.index = ds.windows[si].size();
      ds.windows[si].push_back(std::move(w));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Domain-specific batches
// ---------------------------------------------------------------------------

// A batch of windows drawn from exactly one source subject.
struct DomainBatch {
  std::string source;
  std::size_t ordinal = 0;
  std::vector<Window> windows;

  DomainBatch(std::string src, std::size_t ord, std::vector<Window> wins)
      : source(std::move(src)), ordinal(ord), windows(std::move(wins)) {
    if (windows.empty()) throw std::logic_error("DomainBatch: empty batch");
    for (const Window& w : windows)
      if (w.subject != source)
        throw std::logic_error("DomainBatch: window from foreign subject " + w.subject);
  }
};

// Per-source random partition into batches of exactly q windows, drawn
// without replacement; per-source leftovers are dropped for the epoch and the
// batch order across sources is itself shuffled.
inline std::vector<DomainBatch> make_domain_batches(const Dataset& ds,
                                                    std::span<const std::size_t> source_idx,
                                                    std::size_t q, Rng& rng) {
  if (q <= 1) throw std::invalid_argument("make_domain_batches: batch size must be > 1");
  for (const std::size_t si : source_idx)
    if (q > ds.windows[si].size())
      throw std::invalid_argument("make_domain_batches: batch size exceeds windows of subject " +
                                  ds.subjects[si]);

  std::vector<DomainBatch> batches;
  for (const std::size_t si : source_idx) {
    const auto& wins = ds.windows[si];
    std::vector<std::size_t> perm(wins.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    const std::size_t nbatches = wins.size() / q;
    for (std::size_t p = 0; p < nbatches; ++p) {
      std::vector<Window> chunk;
      chunk.reserve(q);
      for (std::size_t i = 0; i < q; ++i) chunk.push_back(wins[perm[p * q + i]]);
      batches.emplace_back(ds.subjects[si], p, std::move(chunk));
    }
  }
  std::vector<std::size_t> order(batches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<DomainBatch> shuffled;
  shuffled.reserve(batches.size());
  for (const std::size_t i : order) shuffled.push_back(std::move(batches[i]));
  return shuffled;
}

// ---------------------------------------------------------------------------
// Dataset cache (versioned binary)
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void put_raw(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_raw(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw std::runtime_error("dataset cache: truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

inline std::string serialize_dataset(const Dataset& ds) {
  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["pipeline"] = ds.pipeline;
  manifest["window_len"] = ds.window_len;
  manifest["stride"] = ds.stride;
  manifest["labels"] = ds.labels;
  manifest["subjects"] = ds.subjects;
  nlohmann::json series = nlohmann::json::array();
  for (const auto& s : ds.series)
    series.push_back({{"subject", s.subject},
                      {"activity", s.activity},
                      {"raw_count", s.raw_count},
                      {"window_count", s.window_count}});
  manifest["series"] = series;

  std::string buf = "DADS1";
  const std::string mjson = manifest.dump();
  detail::put_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(mjson.size()));
  buf += mjson;
  detail::put_raw<std::uint64_t>(buf, ds.total_windows());
  for (std::size_t si = 0; si < ds.subjects.size(); ++si) {
    for (const Window& w : ds.windows[si]) {
      detail::put_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(si));
      detail::put_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(ds.label_index(w.label)));
      detail::put_raw<std::uint64_t>(buf, w.index);
      buf.append(reinterpret_cast<const char*>(w.data.data.data()),
                 w.data.data.size() * sizeof(double));
    }
  }
  return buf;
}

inline Dataset deserialize_dataset(const std::string& buf) {
  if (buf.size() < 9 || buf.compare(0, 5, "DADS1") != 0)
    throw std::runtime_error("dataset cache: bad magic");
  std::size_t pos = 5;
  const auto mlen = detail::get_raw<std::uint32_t>(buf, pos);
  if (pos + mlen > buf.size()) throw std::runtime_error("dataset cache: truncated manifest");
  const nlohmann::json manifest = nlohmann::json::parse(buf.substr(pos, mlen));
  pos += mlen;

  Dataset ds;
  ds.pipeline = manifest.at("pipeline").get<std::string>();
  ds.window_len = manifest.at("window_len").get<std::size_t>();
  ds.stride = manifest.at("stride").get<std::size_t>();
  ds.labels = manifest.at("labels").get<std::vector<std::string>>();
  ds.subjects = manifest.at("subjects").get<std::vector<std::string>>();
  for (const auto& s : manifest.at("series")) {
    ds.series.push_back({s.at("subject").get<std::string>(), s.at("activity").get<std::string>(),
                         s.at("raw_count").get<std::size_t>(),
                         s.at("window_count").get<std::size_t>()});
  }
  ds.windows.resize(ds.subjects.size());
  const auto count = detail::get_raw<std::uint64_t>(buf, pos);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto si = detail::get_raw<std::uint32_t>(buf, pos);
    const auto li = detail::get_raw<std::uint32_t>(buf, pos);
    const auto tau = detail::get_raw<std::uint64_t>(buf, pos);
    if (si >= ds.subjects.size() || li >= ds.labels.size())
      throw std::runtime_error("dataset cache: index out of range");
    Window w;
    w.subject = ds.subjects[si];
    w.label = ds.labels[li];
    w.index = tau;
    w.data = Matrix(ds.window_len, 3);
    const std::size_t bytes = w.data.data.size() * sizeof(double);
    if (pos + bytes > buf.size()) throw std::runtime_error("dataset cache: truncated windows");
    std::memcpy(w.data.data.data(), buf.data() + pos, bytes);
    pos += bytes;
    ds.windows[si].push_back(std::move(w));
  }
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  const std::string buf = serialize_dataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset cache: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset cache: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return deserialize_dataset(os.str());
}

inline std::uint64_t dataset_hash(const Dataset& ds) {
  const std::string buf = serialize_dataset(ds);
  return fnv1a(buf.data(), buf.size());
}

}  // namespace dabn
