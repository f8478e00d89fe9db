#include "sparsepce/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparsepce/errors.hpp"

namespace sparsepce::io {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'P', 'C', 'E', 'M', 'A', 'T', '1'};

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
}

void put_u64(std::ostream& os, std::uint64_t v) {
  const std::uint64_t le = to_little_endian(v);
  os.write(reinterpret_cast<const char*>(&le), sizeof le);
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t le = 0;
  is.read(reinterpret_cast<char*>(&le), sizeof le);
  return to_little_endian(le);
}

std::ofstream open_for_write(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream os(path, mode);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os = open_for_write(path, std::ios::out | std::ios::trunc);
  auto write_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
  };
  write_row(header);
  for (const auto& r : rows) write_row(r);
  if (!os) throw IoError("failed writing " + path.string());
}

void write_time_series(const std::filesystem::path& path, std::span<const double> times,
                       const Eigen::MatrixXd& series, const std::string& prefix, int first_label) {
  if (static_cast<Eigen::Index>(times.size()) != series.cols())
    throw std::invalid_argument("write_time_series: time count does not match series length");
  std::ofstream os = open_for_write(path, std::ios::out | std::ios::trunc);
  os << "time";
  for (Eigen::Index i = 0; i < series.rows(); ++i) os << ',' << prefix << (first_label + i);
  os << '\n';
  for (std::size_t j = 0; j < times.size(); ++j) {
    os << format_number(times[j]);
    for (Eigen::Index i = 0; i < series.rows(); ++i)
      os << ',' << format_number(series(i, static_cast<Eigen::Index>(j)));
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) throw IoError(path.string() + ": empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      if (cell == "nan") {
        v = std::nan("");
      } else if (cell == "inf" || cell == "-inf") {
        v = cell[0] == '-' ? -INFINITY : INFINITY;
      } else {
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
          throw IoError(path.string() + ": non-numeric cell '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != table.header.size()) throw IoError(path.string() + ": ragged row");
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return table;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
  std::ofstream os = open_for_write(path, std::ios::out | std::ios::binary | std::ios::trunc);
  os.write(kMagic.data(), kMagic.size());
  put_u64(os, static_cast<std::uint64_t>(M.rows()));
  put_u64(os, static_cast<std::uint64_t>(M.cols()));
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      put_u64(os, std::bit_cast<std::uint64_t>(M(r, c)));
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw IoError(path.string() + ": not a dense matrix file");
  const std::uint64_t rows = get_u64(is);
  const std::uint64_t cols = get_u64(is);
  if (!is) throw IoError(path.string() + ": truncated header");
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) M(r, c) = std::bit_cast<double>(get_u64(is));
  if (!is) throw IoError(path.string() + ": truncated data");
  return M;
}

}  // namespace sparsepce::io
