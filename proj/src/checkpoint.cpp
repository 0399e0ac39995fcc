#include "oculorl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <zlib.h>

#include "oculorl/error.hpp"

namespace oculorl {

namespace {

constexpr std::string_view kMagic = "OCRLCKPT";
constexpr std::size_t kHeaderSize = 8 + 4;
constexpr std::size_t kTrailerSize = 4;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes_.append(s);
  }
  void doubles(std::span<const double> v) {
    u64(v.size());
    for (double d : v) f64(d);
  }
  void raw(std::string_view s) { bytes_.append(s); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t begin, std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(i)) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte(i)) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  int i32() {
    const std::int64_t v = i64();
    if (v < INT32_MIN || v > INT32_MAX) throw CheckpointUnreadable("integer out of range");
    return static_cast<int>(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t count(std::size_t element_size) {
    const std::uint64_t n = u64();
    if (element_size > 0 && n > (end_ - pos_) / element_size) {
      throw CheckpointUnreadable("section length exceeds file size");
    }
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    const std::size_t n = count(1);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const std::size_t n = count(8);
    std::vector<double> v(n);
    for (double& d : v) d = f64();
    return v;
  }
  bool at_end() const { return pos_ == end_; }

 private:
  unsigned char byte(int i) const {
    return static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]);
  }
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw CheckpointUnreadable("unexpected end of checkpoint data");
  }

  const std::string& bytes_;
  std::size_t pos_;
  std::size_t end_;
};

std::uint32_t checksum(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_net(Writer& w, const NetParams& p) {
  w.u64(p.layer_count());
  for (const LayerShape& l : p.layers()) {
    w.i64(l.in);
    w.i64(l.out);
    w.i64(static_cast<std::int64_t>(l.activation));
  }
  w.doubles(p.values());
}

NetParams get_net(Reader& r) {
  const std::size_t n = r.count(24);
  std::vector<LayerShape> layers(n);
  for (LayerShape& l : layers) {
    l.in = r.i32();
    l.out = r.i32();
    const int act = r.i32();
    if (act < 0 || act > 2) throw CheckpointUnreadable("unknown layer activation");
    l.activation = static_cast<LayerActivation>(act);
  }
  NetParams p(std::move(layers));
  const std::vector<double> values = r.doubles();
  if (values.size() != p.size()) throw CheckpointUnreadable("parameter count does not match shapes");
  std::copy(values.begin(), values.end(), p.values().begin());
  return p;
}

void put_adam(Writer& w, const AdamState& s) {
  w.i64(s.t);
  w.f64(s.lr);
  w.f64(s.beta1);
  w.f64(s.beta2);
  w.f64(s.eps);
  w.doubles(s.m);
  w.doubles(s.v);
}

AdamState get_adam(Reader& r) {
  AdamState s;
  s.t = r.i64();
  s.lr = r.f64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.eps = r.f64();
  s.m = r.doubles();
  s.v = r.doubles();
  return s;
}

void put_rng(Writer& w, const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  w.str(os.str());
}

std::mt19937_64 get_rng(Reader& r) {
  std::istringstream is(r.str());
  std::mt19937_64 rng;
  is >> rng;
  if (!is) throw CheckpointUnreadable("bad RNG state");
  return rng;
}

template <std::size_t N>
void put_array(Writer& w, const std::array<double, N>& a) {
  w.doubles(a);
}

template <std::size_t N>
std::array<double, N> get_array(Reader& r) {
  const std::vector<double> v = r.doubles();
  if (v.size() != N) throw CheckpointUnreadable("fixed-size array has the wrong length");
  std::array<double, N> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

void put_transition(Writer& w, const Transition& t) {
  for (double v : t.s) w.f64(v);
  for (double v : t.a) w.f64(v);
  w.f64(t.r);
  for (double v : t.s_next) w.f64(v);
  w.u64(t.done ? 1 : 0);
}

Transition get_transition(Reader& r) {
  Transition t;
  for (double& v : t.s) v = r.f64();
  for (double& v : t.a) v = r.f64();
  t.r = r.f64();
  for (double& v : t.s_next) v = r.f64();
  t.done = r.u64() != 0;
  return t;
}

constexpr std::size_t kTransitionBytes = 8 * (2 * kObservationSize + kActionSize + 2);

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure(fmt::format("cannot open {}", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoFailure(fmt::format("read from {} failed", path.string()));
  return bytes;
}

}  // namespace

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path,
                     const std::string& metadata, bool include_buffer) {
  Writer w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.str(metadata);

  put_net(w, state.agent.actor.params());
  put_net(w, state.agent.critic.params());
  put_net(w, state.agent.actor_target.params());
  put_net(w, state.agent.critic_target.params());
  put_adam(w, state.agent.actor_opt);
  put_adam(w, state.agent.critic_opt);

  put_array(w, state.noise.x);
  w.f64(state.noise.theta);
  w.f64(state.noise.sigma);
  w.f64(state.noise.mu);
  w.f64(state.noise.dt);

  put_rng(w, state.noise_rng);
  put_rng(w, state.env_rng);
  put_rng(w, state.buffer.rng());
  w.i64(state.episode);

  w.u64(state.log.size());
  for (const LogRow& row : state.log) {
    w.i64(row.episode);
    w.f64(row.cumulative_reward);
    w.f64(row.rolling_mean);
    w.i64(row.milestone_flag);
    w.f64(row.noise_sigma);
    w.f64(row.critic_loss_mean);
  }
  w.u64(state.milestones.size());
  for (const MilestoneRecord& m : state.milestones) {
    w.i64(m.index);
    w.i64(m.episode);
    w.f64(m.rolling_mean);
    w.str(m.checkpoint);
  }

  w.u64(state.buffer.capacity());
  w.u64(include_buffer ? 1 : 0);
  if (include_buffer) {
    const std::vector<Transition>& items = state.buffer.slots();
    w.u64(state.buffer.cursor());
    w.u64(items.size());
    for (const Transition& t : items) put_transition(w, t);
  }

  const std::string& bytes = w.bytes();
  const std::uint32_t crc = checksum(bytes.data(), bytes.size());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure(fmt::format("cannot open {} for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  Writer trailer;
  trailer.u32(crc);
  out.write(trailer.bytes().data(), kTrailerSize);
  out.close();
  if (!out) throw IoFailure(fmt::format("write to {} failed", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < kHeaderSize + kTrailerSize) {
    throw CorruptChecksum(fmt::format("{} is truncated", path.string()));
  }
  if (std::string_view(bytes).substr(0, kMagic.size()) != kMagic) {
    throw CheckpointUnreadable(fmt::format("{} is not a checkpoint", path.string()));
  }
  const std::size_t body = bytes.size() - kTrailerSize;
  Reader trailer(bytes, body, bytes.size());
  if (trailer.u32() != checksum(bytes.data(), body)) {
    throw CorruptChecksum(fmt::format("{} failed its checksum", path.string()));
  }

  Reader r(bytes, kMagic.size(), body);
  Agent empty{Actor(), Critic(), Actor(), Critic(), {}, {}};
  Checkpoint ck{0, {}, TrainerState{std::move(empty), ReplayBuffer(1, 0), {}, {}, {}, 0, {}, {}},
                false};
  ck.version = r.u32();
  if (ck.version != kCheckpointVersion) {
    throw VersionMismatch(fmt::format("{} has format version {}, expected {}", path.string(),
                                      ck.version, kCheckpointVersion));
  }
  ck.metadata = r.str();

  TrainerState& s = ck.state;
  s.agent.actor.params() = get_net(r);
  s.agent.critic.params() = get_net(r);
  s.agent.actor_target.params() = get_net(r);
  s.agent.critic_target.params() = get_net(r);
  s.agent.actor_opt = get_adam(r);
  s.agent.critic_opt = get_adam(r);

  s.noise.x = get_array<kActionSize>(r);
  s.noise.theta = r.f64();
  s.noise.sigma = r.f64();
  s.noise.mu = r.f64();
  s.noise.dt = r.f64();

  s.noise_rng = get_rng(r);
  s.env_rng = get_rng(r);
  const std::mt19937_64 buffer_rng = get_rng(r);
  s.episode = r.i32();

  const std::size_t rows = r.count(48);
  s.log.resize(rows);
  for (LogRow& row : s.log) {
    row.episode = r.i32();
    row.cumulative_reward = r.f64();
    row.rolling_mean = r.f64();
    row.milestone_flag = r.i32();
    row.noise_sigma = r.f64();
    row.critic_loss_mean = r.f64();
  }
  const std::size_t milestones = r.count(32);
  s.milestones.resize(milestones);
  for (MilestoneRecord& m : s.milestones) {
    m.index = r.i32();
    m.episode = r.i32();
    m.rolling_mean = r.f64();
    m.checkpoint = r.str();
  }

  const std::uint64_t capacity = r.u64();
  if (capacity == 0) throw CheckpointUnreadable("zero buffer capacity");
  s.buffer = ReplayBuffer(static_cast<std::size_t>(capacity), 0);
  s.buffer.rng() = buffer_rng;
  ck.has_buffer = r.u64() != 0;
  if (ck.has_buffer) {
    const auto cursor = static_cast<std::size_t>(r.u64());
    const std::size_t n = r.count(kTransitionBytes);
    std::vector<Transition> items;
    items.reserve(n);
    for (std::size_t i = 0; i < n; ++i) items.push_back(get_transition(r));
    try {
      s.buffer.restore(std::move(items), cursor);
    } catch (const ValidationError& e) {
      throw CheckpointUnreadable(e.what());
    }
  }
  if (!r.at_end()) throw CheckpointUnreadable("trailing bytes after checkpoint sections");
  return ck;
}

}  // namespace oculorl
