#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "crlmaze/errors.hpp"
#include "crlmaze/strategies.hpp"

namespace crlmaze {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

// Binary layout (little-endian), version 1:
//   magic "CRLMZCKP", u32 version
//   u8 strategy, u8 scenario, u64 seed, i64 next_episode
//   network: i32 input_size, u32 n_hidden, i32 hidden[n_hidden]
//   params: f64 array
//   optimizer: f64 decay, f64 epsilon, f64 learning_rate, f64 array
//   terms: u32 count, then per term
//          i64 fisher_episode, i32 sample_size, f64 array, i64 anchor_episode, f64 array
//   detector: i32 short, i32 long, f64 eta, f64 alpha, i64 recorded, f64 array
// An f64 array is a u64 length followed by raw IEEE-754 doubles.

inline constexpr char kCheckpointMagic[8] = {'C', 'R', 'L', 'M', 'Z', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_array(const std::vector<double>& xs) {
    put<std::uint64_t>(xs.size());
    const auto* p = reinterpret_cast<const char*>(xs.data());
    bytes_.insert(bytes_.end(), p, p + xs.size() * sizeof(double));
  }
  void put_raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<char> take() { return std::move(bytes_); }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<char>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::vector<double> get_array() {
    const auto n = get<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw ConfigError("checkpoint truncated");
    std::vector<double> xs(n);
    std::memcpy(xs.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return xs;
  }
  void get_raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ConfigError("checkpoint truncated");
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> encode_checkpoint(const TrainingState& s) {
  detail::ByteWriter w;
  w.put_raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint8_t>(s.kind));
  w.put(static_cast<std::uint8_t>(s.scenario));
  w.put(s.seed);
  w.put(s.next_episode);
  const auto& net = s.params.layout().config;
  w.put<std::int32_t>(net.input_size);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.hidden_sizes.size()));
  for (int h : net.hidden_sizes) w.put<std::int32_t>(h);
  w.put_array(s.params.values());
  w.put(s.optimizer.decay);
  w.put(s.optimizer.epsilon);
  w.put(s.optimizer.learning_rate);
  w.put_array(s.optimizer.square_avg);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.terms.size()));
  for (const auto& t : s.terms) {
    w.put<std::int64_t>(t.fisher.episode);
    w.put<std::int32_t>(t.fisher.sample_size);
    w.put_array(t.fisher.values);
    w.put<std::int64_t>(t.anchor.episode);
    w.put_array(t.anchor.values);
  }
  w.put<std::int32_t>(s.detector.window_short());
  w.put<std::int32_t>(s.detector.window_long());
  w.put(s.detector.eta());
  w.put(s.detector.alpha());
  w.put<std::int64_t>(s.detector.episodes_recorded());
  w.put_array(s.detector.buffer());
  return w.take();
}

inline TrainingState decode_checkpoint(const std::vector<char>& bytes) {
  detail::ByteReader r(bytes);
  char magic[sizeof(kCheckpointMagic)];
  r.get_raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw ConfigError("not a checkpoint file");
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw ConfigError("unsupported checkpoint version");
  TrainingState s;
  const auto kind = r.get<std::uint8_t>();
  const auto scenario = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(StrategyKind::unsup) || scenario > static_cast<std::uint8_t>(ScenarioKind::all))
    throw ConfigError("checkpoint has an unknown strategy or scenario");
  s.kind = static_cast<StrategyKind>(kind);
  s.scenario = static_cast<ScenarioKind>(scenario);
  s.seed = r.get<std::uint64_t>();
  s.next_episode = r.get<std::int64_t>();
  NetworkConfig net;
  net.input_size = r.get<std::int32_t>();
  const auto n_hidden = r.get<std::uint32_t>();
  if (n_hidden > 64) throw ConfigError("checkpoint network description is corrupt");
  net.hidden_sizes.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) net.hidden_sizes.push_back(r.get<std::int32_t>());
  s.params = ParamVector(std::make_shared<const ParamLayout>(net));
  auto values = r.get_array();
  if (values.size() != s.params.size()) throw ConfigError("checkpoint parameter count does not match its network");
  s.params.values() = std::move(values);
  s.optimizer.decay = r.get<double>();
  s.optimizer.epsilon = r.get<double>();
  s.optimizer.learning_rate = r.get<double>();
  s.optimizer.square_avg = r.get_array();
  if (s.optimizer.square_avg.size() != s.params.size()) throw ConfigError("checkpoint optimizer state misaligned");
  const auto n_terms = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_terms; ++i) {
    ConsolidationTerm t;
    t.fisher.episode = r.get<std::int64_t>();
    t.fisher.sample_size = r.get<std::int32_t>();
    t.fisher.values = r.get_array();
    t.anchor.episode = r.get<std::int64_t>();
    t.anchor.values = r.get_array();
    if (t.fisher.values.size() != s.params.size() || t.anchor.values.size() != s.params.size())
      throw ConfigError("checkpoint consolidation term misaligned");
    s.terms.push_back(std::move(t));
  }
  const auto ws = r.get<std::int32_t>();
  const auto wl = r.get<std::int32_t>();
  const auto eta = r.get<double>();
  const auto alpha = r.get<double>();
  const auto recorded = r.get<std::int64_t>();
  s.detector = DriftDetector::restore(ws, wl, eta, alpha, r.get_array(), recorded);
  if (!r.at_end()) throw ConfigError("trailing bytes after checkpoint");
  return s;
}

/// Writes through a temporary file and renames, so an interrupted save never
/// leaves a half-written checkpoint behind.
inline void save_checkpoint(const std::filesystem::path& path, const TrainingState& s) {
  const auto bytes = encode_checkpoint(s);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline TrainingState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace crlmaze
