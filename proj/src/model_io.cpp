#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "noma/errors.hpp"
#include "noma/genmud.hpp"

namespace noma {

namespace {

// Container layout (all integers and floats little endian):
//   magic "NOMAGEN1" (8 bytes)
//   u32 version (= 1), u32 reserved (= 0)
//   u64 K, J, C1, C2
//   f64 leaky_slope, bn_eps, bn_momentum, alpha
//   f64 blocks, row major (input index outer, output index inner):
//     W1, b1, gamma1, beta1, rmean1, rvar1,
//     W2, b2, gamma2, beta2, rmean2, rvar2,
//     W3, b3
//   u64 FNV-1a hash of every preceding byte
constexpr char kMagic[8] = {'N', 'O', 'M', 'A', 'G', 'E', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::vector<char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void mat(const RMat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        f64(m(r, c));
      }
    }
  }
  void row(const Row& r) {
    for (Eigen::Index i = 0; i < r.size(); ++i) f64(r(i));
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  void raw(void* p, std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw CorruptFileError("model file truncated (needed " +
                             std::to_string(pos_ + n) + " bytes, have " +
                             std::to_string(bytes_.size()) + ")");
    }
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }
  RMat mat(Eigen::Index rows, Eigen::Index cols) {
    RMat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = f64();
      }
    }
    return m;
  }
  Row row(Eigen::Index n) {
    Row r(n);
    for (Eigen::Index i = 0; i < n; ++i) r(i) = f64();
    return r;
  }
  std::size_t pos() const { return pos_; }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const GeneratorModel& m, const std::string& path) {
  m.validate();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(0);
  w.u64(m.hyper.K);
  w.u64(m.hyper.J);
  w.u64(m.hyper.C1);
  w.u64(m.hyper.C2);
  w.f64(m.hyper.leaky_slope);
  w.f64(m.hyper.bn_eps);
  w.f64(m.hyper.bn_momentum);
  w.f64(m.params.alpha);
  const auto& p = m.params;
  w.mat(p.W1);
  w.row(p.b1);
  w.row(p.gamma1);
  w.row(p.beta1);
  w.row(p.rmean1);
  w.row(p.rvar1);
  w.mat(p.W2);
  w.row(p.b2);
  w.row(p.gamma2);
  w.row(p.beta2);
  w.row(p.rmean2);
  w.row(p.rvar2);
  w.mat(p.W3);
  w.row(p.b3);
  const std::uint64_t checksum = fnv1a(w.bytes());
  w.u64(checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("save_model: cannot open " + path);
  out.write(w.bytes().data(),
            static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw Error("save_model: write failed for " + path);
}

GeneratorModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_model: cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());

  // Identify the container by magic before validating its integrity so a
  // foreign file reports "wrong kind", not "corrupt".
  if (bytes.size() < sizeof kMagic ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw VersionMismatchError("not a generator model file: " + path);
  }
  if (bytes.size() < sizeof kMagic + sizeof(std::uint64_t)) {
    throw CorruptFileError("model file truncated: " + path);
  }
  // The trailing hash covers everything before it.
  std::vector<char> body(bytes.begin(), bytes.end() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (fnv1a(body) != stored) {
    throw CorruptFileError("model file checksum mismatch: " + path);
  }

  Reader r(std::move(body));
  char magic[8];
  r.raw(magic, sizeof magic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw VersionMismatchError("model format version " +
                               std::to_string(version) + ", expected " +
                               std::to_string(kVersion));
  }
  r.u32();  // reserved

  GeneratorModel m;
  m.hyper.K = r.u64();
  m.hyper.J = r.u64();
  m.hyper.C1 = r.u64();
  m.hyper.C2 = r.u64();
  m.hyper.leaky_slope = r.f64();
  m.hyper.bn_eps = r.f64();
  m.hyper.bn_momentum = r.f64();
  m.params.alpha = r.f64();
  m.hyper.validate();

  const auto in_ch = static_cast<Eigen::Index>(m.hyper.in_channels());
  const auto c1 = static_cast<Eigen::Index>(m.hyper.C1);
  const auto c2 = static_cast<Eigen::Index>(m.hyper.C2);
  const auto out_ch = static_cast<Eigen::Index>(m.hyper.out_channels());
  auto& p = m.params;
  p.W1 = r.mat(in_ch, c1);
  p.b1 = r.row(c1);
  p.gamma1 = r.row(c1);
  p.beta1 = r.row(c1);
  p.rmean1 = r.row(c1);
  p.rvar1 = r.row(c1);
  p.W2 = r.mat(c1, c2);
  p.b2 = r.row(c2);
  p.gamma2 = r.row(c2);
  p.beta2 = r.row(c2);
  p.rmean2 = r.row(c2);
  p.rvar2 = r.row(c2);
  p.W3 = r.mat(c2, out_ch);
  p.b3 = r.row(out_ch);
  if (r.pos() != r.bytes().size()) {
    throw CorruptFileError("model file has " +
                           std::to_string(r.bytes().size() - r.pos()) +
                           " trailing bytes: " + path);
  }
  m.validate();
  return m;
}

}  // namespace noma
