#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sparsepce::io {

/// Shortest round-trip decimal representation ("nan"/"inf" for non-finite).
std::string format_number(double value);

/// Writes a header row and data rows; cells are written verbatim.
/// Throws IoError on failure.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// First column `time`, then one column per row of `series` (named
/// prefix + label) sampled at the given times. series is (#series x r).
void write_time_series(const std::filesystem::path& path, std::span<const double> times,
                       const Eigen::MatrixXd& series, const std::string& prefix,
                       int first_label = 1);

/// Reads a CSV of numbers written by write_csv/write_time_series back into
/// a header and a dense matrix. Throws IoError on malformed input.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Dense binary matrix layout:
///   bytes 0..7   magic "SPCEMAT1"
///   bytes 8..15  rows, uint64 little-endian
///   bytes 16..23 cols, uint64 little-endian
///   then rows*cols IEEE-754 float64 little-endian values in row-major order.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& M);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

}  // namespace sparsepce::io
