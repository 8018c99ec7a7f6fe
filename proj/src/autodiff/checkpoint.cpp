#include "dodrom/autodiff/checkpoint.hpp"

#include "dodrom/io/binary.hpp"

#include <fstream>
#include <vector>

namespace dodrom {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'R', 'N', 'E', 'T', '\0', '\0', '\1'};

void write_bits(std::ostream& os, const BoolMatrix& mask) {
  std::vector<std::uint8_t> bytes((std::size_t(mask.size()) + 7) / 8, 0);
  for (Index k = 0; k < mask.size(); ++k) {
    if (mask.data()[k]) bytes[std::size_t(k) / 8] |= std::uint8_t(1u << (k % 8));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void read_bits(std::istream& is, BoolMatrix& mask) {
  std::vector<std::uint8_t> bytes((std::size_t(mask.size()) + 7) / 8, 0);
  is.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!is) throw io::FormatError("network checkpoint: truncated mask");
  for (Index k = 0; k < mask.size(); ++k) {
    mask.data()[k] = (bytes[std::size_t(k) / 8] >> (k % 8)) & 1u;
  }
}

}  // namespace

void write_network(std::ostream& os, const Mlp& net) {
  io::write_magic(os, kMagic);
  io::write_pod<std::uint32_t>(os, kNetworkFormatVersion);
  io::write_pod<std::uint32_t>(os, std::uint32_t(net.layers().size()));
  for (const auto& layer : net.layers()) {
    io::write_pod<std::uint32_t>(os, std::uint32_t(layer.out_dim()));
    io::write_pod<std::uint32_t>(os, std::uint32_t(layer.in_dim()));
    io::write_pod<std::uint8_t>(os, std::uint8_t(layer.activation));
    io::write_pod<double>(os, layer.slope);
    io::write_doubles(os, layer.weight.values.data(), std::size_t(layer.weight.values.size()));
    io::write_doubles(os, layer.bias.values.data(), std::size_t(layer.bias.values.size()));
    write_bits(os, layer.weight_mask);
    write_bits(os, layer.bias_mask);
  }
}

Mlp read_network(std::istream& is) {
  io::expect_magic(is, kMagic, "network checkpoint");
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != kNetworkFormatVersion) {
    throw io::FormatError("network checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = io::read_pod<std::uint32_t>(is);
  std::vector<DenseLayer> layers;
  layers.reserve(count);
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto out = io::read_pod<std::uint32_t>(is);
    const auto in = io::read_pod<std::uint32_t>(is);
    const auto act = io::read_pod<std::uint8_t>(is);
    if (act > 1) throw io::FormatError("network checkpoint: unknown activation tag");
    DenseLayer layer(in, out, Activation(act));
    layer.slope = io::read_pod<double>(is);
    io::read_doubles(is, layer.weight.values.data(), std::size_t(layer.weight.values.size()));
    io::read_doubles(is, layer.bias.values.data(), std::size_t(layer.bias.values.size()));
    read_bits(is, layer.weight_mask);
    read_bits(is, layer.bias_mask);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

void save_network(const std::string& path, const Mlp& net) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_network(os, net);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Mlp load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_network(is);
}

}  // namespace dodrom
