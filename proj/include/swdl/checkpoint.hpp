#pragma once

// Little-endian binary checkpoint: magic "SWDLCKP1", version, trainer state
// (step counter + data RNG state), then named parameter and momentum blobs
// with shapes. Round-trip is bit-exact.

#include <array>
#include <cstring>
#include <fstream>

#include "swdl/tensor.hpp"

namespace swdl::nn {

struct TrainerState {
  std::uint64_t step = 0;
  std::array<std::uint64_t, 4> rng_state{};
};

namespace detail {

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

inline void put_string(std::ofstream& f, const std::string& s) {
  put<std::uint16_t>(f, std::uint16_t(s.size()));
  f.write(s.data(), std::streamsize(s.size()));
}

inline std::string get_string(std::ifstream& f) {
  const auto len = get<std::uint16_t>(f);
  std::string s(len, '\0');
  f.read(s.data(), len);
  if (!f) throw std::runtime_error("checkpoint: truncated name");
  return s;
}

template <typename T>
constexpr std::uint8_t dtype_code() {
  return sizeof(T) == 4 ? 0 : 1;
}

template <typename T>
void put_blob(std::ofstream& f, const std::string& name, const Shape5& shape,
              const std::vector<T>& data) {
  put_string(f, name);
  put<std::uint8_t>(f, dtype_code<T>());
  for (std::int64_t dim : {shape.n, shape.c, shape.d, shape.h, shape.w})
    put<std::uint64_t>(f, std::uint64_t(dim));
  f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * sizeof(T)));
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const std::vector<Parameter<T>*>& params,
                     const TrainerState& state = {}) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  f.write("SWDLCKP1", 8);
  detail::put<std::uint32_t>(f, 1);  // version
  detail::put<std::uint64_t>(f, state.step);
  for (auto s : state.rng_state) detail::put<std::uint64_t>(f, s);
  detail::put<std::uint32_t>(f, std::uint32_t(params.size() * 2));
  for (const auto* p : params) {
    detail::put_blob(f, p->name, p->tensor.shape(), p->tensor.data());
    detail::put_blob(f, p->name + ".momentum", p->tensor.shape(), p->momentum);
  }
  if (!f) throw std::runtime_error("checkpoint: short write to " + path);
}

// Loads by name into existing parameters; shapes must match.
template <typename T>
TrainerState load_checkpoint(const std::string& path, const std::vector<Parameter<T>*>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "SWDLCKP1", 8) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const auto version = detail::get<std::uint32_t>(f);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");

  TrainerState state;
  state.step = detail::get<std::uint64_t>(f);
  for (auto& s : state.rng_state) s = detail::get<std::uint64_t>(f);

  std::map<std::string, Parameter<T>*> by_name;
  for (auto* p : params) by_name[p->name] = p;
  std::size_t loaded = 0;

  const auto n_blobs = detail::get<std::uint32_t>(f);
  for (std::uint32_t i = 0; i < n_blobs; ++i) {
    const std::string name = detail::get_string(f);
    const auto dtype = detail::get<std::uint8_t>(f);
    if (dtype != detail::dtype_code<T>())
      throw std::runtime_error("checkpoint: dtype mismatch for " + name);
    Shape5 shape;
    shape.n = std::int64_t(detail::get<std::uint64_t>(f));
    shape.c = std::int64_t(detail::get<std::uint64_t>(f));
    shape.d = std::int64_t(detail::get<std::uint64_t>(f));
    shape.h = std::int64_t(detail::get<std::uint64_t>(f));
    shape.w = std::int64_t(detail::get<std::uint64_t>(f));

    const bool is_momentum = name.size() > 9 && name.ends_with(".momentum");
    const std::string base = is_momentum ? name.substr(0, name.size() - 9) : name;
    const auto it = by_name.find(base);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown parameter " + name);
    if (!(it->second->tensor.shape() == shape))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);

    std::vector<T>& dst = is_momentum ? it->second->momentum : it->second->tensor.data();
    f.read(reinterpret_cast<char*>(dst.data()), std::streamsize(dst.size() * sizeof(T)));
    if (!f) throw std::runtime_error("checkpoint: truncated payload for " + name);
    ++loaded;
  }
  if (loaded != params.size() * 2)
    throw std::runtime_error("checkpoint: missing parameters");
  return state;
}

}  // namespace swdl::nn
