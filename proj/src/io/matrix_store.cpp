#include "dodrom/io/matrix_store.hpp"

#include "dodrom/io/binary.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dodrom::io {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'R', 'M', 'A', 'T', '\0', '\0', '\1'};

}  // namespace

void save_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_magic(os, kMagic);
  write_pod<std::uint32_t>(os, kMatrixFormatVersion);
  write_pod<std::uint64_t>(os, std::uint64_t(m.rows()));
  write_pod<std::uint64_t>(os, std::uint64_t(m.cols()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_doubles(os, rm.data(), std::size_t(rm.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  expect_magic(is, kMagic, "matrix file");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kMatrixFormatVersion) {
    throw FormatError("matrix file: unsupported version " + std::to_string(version));
  }
  const auto rows = read_pod<std::uint64_t>(is);
  const auto cols = read_pod<std::uint64_t>(is);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  read_doubles(is, rm.data(), std::size_t(rm.size()));
  return rm;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows, const std::string& comment) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  if (!comment.empty()) os << "# " << comment << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

CsvTable load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

}  // namespace dodrom::io
