#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "brl/critic.hpp"
#include "brl/policy.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace brl {

namespace io {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated stream");
  return v;
}

inline void write_vec(std::ostream& os, const Vec& v) {
  write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline Vec read_vec(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  Vec v(static_cast<int>(n));
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("checkpoint: truncated vector");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace io

inline constexpr std::uint32_t kNetMagic = 0x4E4C5242;  // "BRLN"
inline constexpr std::uint32_t kNetVersion = 1;

// Versioned network block: magic, version, MlpSpec, flags, then the flat
// parameters in canonical order as little-endian 64-bit floats. Flag bit 0
// marks a trailing state-independent log-std vector (Gaussian policies).
inline void write_net(std::ostream& os, const MlpSpec& spec, const Vec& flat,
                      bool has_log_std) {
  io::write_pod(os, kNetMagic);
  io::write_pod(os, kNetVersion);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(spec.layer_widths.size()));
  for (int w : spec.layer_widths) io::write_pod<std::int32_t>(os, w);
  io::write_pod<std::uint8_t>(os, spec.activation == Activation::Tanh ? 1 : 0);
  io::write_pod(os, spec.leaky_slope);
  io::write_pod<std::uint8_t>(os, has_log_std ? 1 : 0);
  io::write_vec(os, flat);
}

struct NetBlock {
  MlpSpec spec;
  Vec flat;
  bool has_log_std = false;
};

inline NetBlock read_net(std::istream& is) {
  if (io::read_pod<std::uint32_t>(is) != kNetMagic)
    throw std::runtime_error("checkpoint: bad network magic");
  if (io::read_pod<std::uint32_t>(is) != kNetVersion)
    throw std::runtime_error("checkpoint: unsupported network version");
  NetBlock b;
  const auto n = io::read_pod<std::uint32_t>(is);
  b.spec.layer_widths.resize(n);
  for (auto& w : b.spec.layer_widths) w = io::read_pod<std::int32_t>(is);
  b.spec.activation =
      io::read_pod<std::uint8_t>(is) ? Activation::Tanh : Activation::LeakyRelu;
  b.spec.leaky_slope = io::read_pod<double>(is);
  b.has_log_std = io::read_pod<std::uint8_t>(is) != 0;
  b.flat = io::read_vec(is);
  return b;
}

inline void write_policy(std::ostream& os, const GaussianPolicy& p) {
  write_net(os, p.mean_net.spec(), p.flatten(), true);
}

inline GaussianPolicy read_policy(std::istream& is) {
  NetBlock b = read_net(is);
  if (!b.has_log_std) throw std::runtime_error("checkpoint: expected policy block");
  GaussianPolicy p(b.spec, 0.0);
  p.unflatten(b.flat);
  return p;
}

inline void write_mlp(std::ostream& os, const Mlp& net) {
  write_net(os, net.spec(), net.flatten(), false);
}

inline Mlp read_mlp(std::istream& is) {
  NetBlock b = read_net(is);
  if (b.has_log_std) throw std::runtime_error("checkpoint: unexpected policy block");
  Mlp net(b.spec);
  net.unflatten(b.flat);
  return net;
}

inline void write_adam(std::ostream& os, const Adam& a) {
  io::write_pod(os, a.lr);
  io::write_pod<std::int64_t>(os, a.steps);
  io::write_vec(os, a.m);
  io::write_vec(os, a.v);
}

inline Adam read_adam(std::istream& is) {
  Adam a;
  a.lr = io::read_pod<double>(is);
  a.steps = io::read_pod<std::int64_t>(is);
  a.m = io::read_vec(is);
  a.v = io::read_vec(is);
  return a;
}

inline void write_rng(std::ostream& os, const Rng& rng) {
  io::write_string(os, rng.save_state());
}

inline Rng read_rng(std::istream& is) {
  Rng rng;
  rng.load_state(io::read_string(is));
  return rng;
}

}  // namespace brl
