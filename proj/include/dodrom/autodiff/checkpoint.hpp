#pragma once

#include "dodrom/autodiff/mlp.hpp"

#include <iosfwd>
#include <string>

namespace dodrom {

/// Network checkpoint, little-endian:
///
///   offset 0   char[8]  magic "DRNET\0\0\1"
///          8   u32      format version (1)
///         12   u32      layer count L
///   per layer:
///              u32      out, u32 in
///              u8       activation (0 identity, 1 leaky-relu)
///              f64      leaky slope
///              f64[out*in]  weights, row-major
///              f64[out]     biases
///              u8[ceil(out*in/8)]  weight mask bitset, entry k at bit (k % 8) of byte k / 8
///              u8[ceil(out/8)]     bias mask bitset, same packing
inline constexpr std::uint32_t kNetworkFormatVersion = 1;

void write_network(std::ostream& os, const Mlp& net);
Mlp read_network(std::istream& is);

void save_network(const std::string& path, const Mlp& net);
Mlp load_network(const std::string& path);

}  // namespace dodrom
