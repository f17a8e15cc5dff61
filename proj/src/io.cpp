#include "progot/io.hpp"

#include "binary_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace progot {

namespace {

constexpr char kMagic[5] = "PCLD";
constexpr std::uint32_t kVersion = 1;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<std::vector<double>> parse_row(std::string_view line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto field = trim(line.substr(start, comma == std::string_view::npos ? line.npos
                                                                               : comma - start));
    double v = 0.0;
    const char* begin = field.data();
    const char* end = field.data() + field.size();
    if (!field.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (field.empty() || ec != std::errc() || ptr != end) return std::nullopt;
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Accept weights summing to 1 within kWeightSumTolerance; renormalize only
// when the sum is off by more than rounding so exact inputs stay bit-exact.
Vector checked_weights(Vector w) {
  if (!w.allFinite()) throw ValidationError("weights must be finite");
  if ((w.array() <= 0.0).any()) throw ValidationError("weights must be strictly positive");
  const double total = w.sum();
  const double dev = std::abs(total - 1.0);
  if (dev > kWeightSumTolerance) {
    throw ValidationError("weights sum to " + std::to_string(total) + ", expected 1");
  }
  if (dev > 1e-12) w /= total;
  return w;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

}  // namespace

CloudFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".bin" || ext == ".pcld") ? CloudFormat::bin : CloudFormat::csv;
}

CloudFormat parse_cloud_format(std::string_view name) {
  if (name == "csv") return CloudFormat::csv;
  if (name == "bin") return CloudFormat::bin;
  throw ValidationError("unknown format '" + std::string(name) + "' (expected csv|bin)");
}

PointCloud read_point_cloud_csv(std::istream& in, const CsvOptions& options) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto row = parse_row(body);
    if (!row) {
      if (!seen_content) {
        seen_content = true;  // header
        continue;
      }
      throw ValidationError("csv line " + std::to_string(line_no) + ": not a numeric row");
    }
    seen_content = true;
    if (!rows.empty() && row->size() != rows.front().size()) {
      throw ValidationError("csv line " + std::to_string(line_no) + ": expected " +
                            std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(*row));
  }
  if (rows.empty()) throw ValidationError("csv: no points");
  const std::size_t cols = rows.front().size();
  const std::size_t d = options.weights_column ? cols - 1 : cols;
  if (d == 0) throw ValidationError("csv: need at least one coordinate column");

  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix pts(n, static_cast<Eigen::Index>(d));
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < d; ++k) pts(i, static_cast<Eigen::Index>(k)) = r[k];
    if (options.weights_column) w[i] = r[d];
  }
  if (!pts.allFinite()) throw ValidationError("csv: non-finite coordinate");
  if (!options.weights_column) return PointCloud(std::move(pts));
  return PointCloud(std::move(pts), checked_weights(std::move(w)));
}

void write_point_cloud_csv(const PointCloud& cloud, std::ostream& out, bool with_weights) {
  const Matrix& p = cloud.points();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      if (k) out << ',';
      out << format_double(p(i, k));
    }
    if (with_weights) out << ',' << format_double(cloud.weights()[i]);
    out << '\n';
  }
}

PointCloud read_point_cloud_bin(std::istream& in) {
  using namespace binary;
  expect_magic(in, kMagic);
  const auto version = get_u32(in, "version");
  if (version != kVersion) {
    throw ValidationError("unsupported PCLD version " + std::to_string(version));
  }
  const auto n = get_u64(in, "n");
  const auto d = get_u64(in, "d");
  const auto flag = get_u8(in, "weights flag");
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 32;
  if (n == 0 || d == 0 || n > kLimit || d > kLimit) {
    throw ValidationError("PCLD header has implausible sizes");
  }
  if (flag > 1) throw ValidationError("PCLD weights flag must be 0 or 1");
  Matrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index k = 0; k < pts.cols(); ++k) pts(i, k) = get_f64(in, "points");
  }
  if (!pts.allFinite()) throw ValidationError("PCLD: non-finite coordinate");
  if (!flag) return PointCloud(std::move(pts));
  Vector w(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = get_f64(in, "weights");
  return PointCloud(std::move(pts), checked_weights(std::move(w)));
}

void write_point_cloud_bin(const PointCloud& cloud, std::ostream& out, bool with_weights) {
  using namespace binary;
  put_magic(out, kMagic);
  put_u32(out, kVersion);
  put_u64(out, cloud.size());
  put_u64(out, cloud.dim());
  put_u8(out, with_weights ? 1 : 0);
  const Matrix& p = cloud.points();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index k = 0; k < p.cols(); ++k) put_f64(out, p(i, k));
  }
  if (with_weights) {
    for (Eigen::Index i = 0; i < cloud.weights().size(); ++i) put_f64(out, cloud.weights()[i]);
  }
  if (!out) throw std::runtime_error("failed writing PCLD data");
}

PointCloud read_point_cloud(const std::filesystem::path& path, CloudFormat format,
                            const CsvOptions& options) {
  std::ifstream in(path, format == CloudFormat::bin ? std::ios::binary : std::ios::in);
  if (!in) throw ValidationError("cannot open " + path.string());
  return format == CloudFormat::bin ? read_point_cloud_bin(in) : read_point_cloud_csv(in, options);
}

void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                       CloudFormat format, bool with_weights) {
  std::ofstream out(path, format == CloudFormat::bin ? std::ios::binary : std::ios::out);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  if (format == CloudFormat::bin) {
    write_point_cloud_bin(cloud, out, with_weights);
  } else {
    write_point_cloud_csv(cloud, out, with_weights);
  }
}

void write_matrix_csv(const Matrix& m, std::ostream& out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (k) out << ',';
      out << format_double(m(i, k));
    }
    out << '\n';
  }
}

}  // namespace progot
