#pragma once

// Binary instance dump, format version 1 (little-endian):
//
//   offset  size  field
//   0       8     magic "SMTINST\0"
//   8       4     u32 format version (= 1)
//   12      4     u32 flags: bit0 tensor stored, bit1 spike, bit2 noise
//   16      8     u64 n
//   24      8     f64 delta2
//   32      8     f64 delta3
//   40      8     u64 seed
//   48      8n    f64 signal[n]
//   ...           f64 y[n(n-1)/2]        (i<j, row-major)
//   ...           f64 t3[n(n-1)(n-2)/6]  (i<j<k, lexicographic; only if bit0)
//
// An implicit-tensor instance is written without t3; reading regenerates the
// rows from the seed on demand.

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "smt/model.hpp"

namespace smt {

inline constexpr std::uint32_t kInstanceFormatVersion = 1;
inline constexpr std::array<char, 8> kInstanceMagic = {'S', 'M', 'T', 'I',
                                                       'N', 'S', 'T', '\0'};

static_assert(std::endian::native == std::endian::little,
              "instance dump assumes a little-endian host");

namespace detail {
template <class T> void put(std::ostream &os, const T &v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}
template <class T> T get(std::istream &is) {
  T v{};
  is.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!is)
    throw Error("instance dump truncated");
  return v;
}
inline void put_array(std::ostream &os, const Vector &v) {
  os.write(reinterpret_cast<const char *>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}
inline void get_array(std::istream &is, Vector &v, std::size_t n) {
  v.resize(n);
  is.read(reinterpret_cast<char *>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is)
    throw Error("instance dump truncated");
}
} // namespace detail

inline void write_instance(std::ostream &os, const Instance &inst) {
  os.write(kInstanceMagic.data(), kInstanceMagic.size());
  std::uint32_t flags = 0;
  if (inst.tensor_stored())
    flags |= 1u;
  if (inst.options.spike)
    flags |= 2u;
  if (inst.options.noise)
    flags |= 4u;
  detail::put(os, kInstanceFormatVersion);
  detail::put(os, flags);
  detail::put(os, static_cast<std::uint64_t>(inst.n()));
  detail::put(os, inst.params.delta2);
  detail::put(os, inst.params.delta3);
  detail::put(os, inst.seed);
  detail::put_array(os, inst.signal);
  detail::put_array(os, inst.y);
  if (inst.tensor_stored())
    detail::put_array(os, inst.t3);
}

inline Instance read_instance(std::istream &is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kInstanceMagic)
    throw Error("not an instance dump (bad magic)");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kInstanceFormatVersion)
    throw Error("unsupported instance format version " +
                std::to_string(version));
  const auto flags = detail::get<std::uint32_t>(is);
  Instance inst;
  inst.params.n = detail::get<std::uint64_t>(is);
  inst.params.delta2 = detail::get<double>(is);
  inst.params.delta3 = detail::get<double>(is);
  inst.params.validate();
  inst.seed = detail::get<std::uint64_t>(is);
  inst.options.storage =
      (flags & 1u) ? TensorStorage::stored : TensorStorage::implicit;
  inst.options.spike = (flags & 2u) != 0;
  inst.options.noise = (flags & 4u) != 0;
  const std::size_t N = inst.params.n;
  detail::get_array(is, inst.signal, N);
  detail::get_array(is, inst.y, num_pairs(N));
  if (flags & 1u)
    detail::get_array(is, inst.t3, num_triples(N));
  inst.build_offsets();
  return inst;
}

inline void save_instance(const std::string &path, const Instance &inst) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot open " + path + " for writing");
  write_instance(os, inst);
}

inline Instance load_instance(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot open " + path);
  return read_instance(is);
}

} // namespace smt
