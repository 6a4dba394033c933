#include "mlsh/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mlsh {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'S', 'H', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_f64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void put_net(std::ostream& os, const NetParams& net) {
  put_u64(os, static_cast<uint64_t>(net.param_count()));
  const Vec& p = net.flat();
  for (long i = 0; i < p.size(); ++i) put_f64(os, p[i]);
}

NetParams get_net(std::istream& is, int in, int act, int hidden) {
  NetParams net(in, act, hidden);
  uint64_t len = get_u64(is);
  require(len == static_cast<uint64_t>(net.param_count()),
          "checkpoint: parameter count does not match header shape");
  Vec p(static_cast<long>(len));
  for (long i = 0; i < p.size(); ++i) p[i] = get_f64(is);
  net.set_flat(p);
  return net;
}

}  // namespace

void save_checkpoint(const std::string& path, const SubPolicySet& subs,
                     const MasterPolicy* master) {
  require(subs.count() >= 1, "save_checkpoint: empty sub-policy set");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write checkpoint: " + path);
  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_u32(os, master ? 1u : 0u);
  const NetParams& first = subs.nets[0];
  put_u32(os, static_cast<uint32_t>(subs.count()));
  put_u32(os, static_cast<uint32_t>(first.input_dim()));
  put_u32(os, static_cast<uint32_t>(first.action_count()));
  put_u32(os, static_cast<uint32_t>(first.hidden_dim()));
  for (const NetParams& net : subs.nets) {
    require(net.input_dim() == first.input_dim() &&
                net.action_count() == first.action_count() &&
                net.hidden_dim() == first.hidden_dim(),
            "save_checkpoint: sub-policies must share one shape");
    put_net(os, net);
  }
  if (master) {
    put_u32(os, static_cast<uint32_t>(master->input_dim()));
    put_u32(os, static_cast<uint32_t>(master->action_count()));
    put_u32(os, static_cast<uint32_t>(master->hidden_dim()));
    put_net(os, *master);
  }
  if (!os) throw ConfigError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("not a checkpoint file: " + path);
  uint32_t version = get_u32(is);
  if (version != kVersion)
    throw ConfigError("unsupported checkpoint version in " + path);
  uint32_t flags = get_u32(is);
  uint32_t k = get_u32(is);
  uint32_t in = get_u32(is);
  uint32_t act = get_u32(is);
  uint32_t hid = get_u32(is);
  Checkpoint ck;
  for (uint32_t i = 0; i < k; ++i)
    ck.subs.nets.push_back(get_net(is, static_cast<int>(in),
                                   static_cast<int>(act),
                                   static_cast<int>(hid)));
  if (flags & 1u) {
    uint32_t min = get_u32(is);
    uint32_t mact = get_u32(is);
    uint32_t mhid = get_u32(is);
    ck.master = get_net(is, static_cast<int>(min), static_cast<int>(mact),
                        static_cast<int>(mhid));
  }
  if (!is) throw ConfigError("truncated checkpoint: " + path);
  return ck;
}

}  // namespace mlsh
