#pragma once

#include "progot/geometry.hpp"
#include "progot/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string_view>

namespace progot {

enum class CloudFormat { csv, bin };

/// ".bin" or ".pcld" selects the binary format, anything else CSV.
CloudFormat format_from_path(const std::filesystem::path& path);
CloudFormat parse_cloud_format(std::string_view name);

struct CsvOptions {
  /// The last column holds point weights.
  bool weights_column = false;
};

/// Weights that miss a total of 1 by at most this much are renormalized;
/// larger deviations are rejected.
inline constexpr double kWeightSumTolerance = 1e-4;

/// One point per line, comma separated. Blank lines and lines starting with
/// '#' are skipped; a first row that does not parse as numbers is a header.
PointCloud read_point_cloud_csv(std::istream& in, const CsvOptions& options = {});
void write_point_cloud_csv(const PointCloud& cloud, std::ostream& out, bool with_weights);

/// "PCLD" binary: magic, u32 version, u64 n, u64 d, u8 weights flag, then
/// little-endian f64 points row-major and, if flagged, n weights.
PointCloud read_point_cloud_bin(std::istream& in);
void write_point_cloud_bin(const PointCloud& cloud, std::ostream& out, bool with_weights = true);

PointCloud read_point_cloud(const std::filesystem::path& path, CloudFormat format,
                            const CsvOptions& options = {});
void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                       CloudFormat format, bool with_weights);

/// Writes a plain matrix as CSV with round-trip precision.
void write_matrix_csv(const Matrix& m, std::ostream& out);

}  // namespace progot
