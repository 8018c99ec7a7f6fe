#include "dodrom/io/binary.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

namespace dodrom::io {

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), std::streamsize(buf.size()));
    h.update(buf.data(), std::size_t(is.gcount()));
  }
  return h.digest();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dodrom::io
