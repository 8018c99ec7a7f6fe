#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace dodrom::io {

/// Dense matrix file, little-endian:
///
///   offset 0   char[8]  magic "DRMAT\0\0\1"
///          8   u32      format version (1)
///         12   u64      rows
///         20   u64      cols
///         28   f64[rows*cols]  entries, row-major
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

void save_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::string& path);

/// Writes a header line and rows of doubles printed with round-trip precision.
void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows,
              const std::string& comment = {});

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
/// Reads a CSV written by save_csv; lines starting with '#' are skipped.
CsvTable load_csv(const std::string& path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace dodrom::io
