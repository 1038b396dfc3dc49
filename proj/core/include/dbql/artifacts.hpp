#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbql/harness.hpp"
#include "dbql/metrics.hpp"

namespace dbql {

// CSV schema ids, written as the first line ("# <id>") of each file.
inline constexpr std::string_view kLossSchema = "dbql-loss-v1";
inline constexpr std::string_view kValidRateSchema = "dbql-valid-rate-v1";
inline constexpr std::string_view kHistogramSchema = "dbql-histogram-v1";
inline constexpr std::string_view kTable1Schema = "dbql-table1-v1";
inline constexpr std::string_view kQValuesSchema = "dbql-qvalues-v1";
inline constexpr std::string_view kValidVsAgentsSchema = "dbql-valid-rate-vs-n-v1";

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

std::string loss_csv(const MetricsSeries& m);
std::string valid_rate_csv(const MetricsSeries& m);
std::string histogram_csv(const ChoiceHistogram& h, const GridSpec& spec);
std::string table1_csv(std::span<const Table1Row> rows);
std::string qvalues_csv(const QTable& q, const GridSpec& spec);

struct CurvePoint {
  double x;
  double mean;
  double stderr_;
};
/// Reads loss.csv / valid_rate.csv back (comment lines and the header
/// row are skipped). Throws std::runtime_error naming the file.
std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path);
/// Reads histogram.csv back into per-pair counts.
std::vector<std::uint32_t> read_histogram_csv(const std::filesystem::path& path, const GridSpec& spec);

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string footer;  ///< e.g. the config digest
};

/// Self-contained SVG line chart; at most `max_points` points per series
/// are drawn (evenly strided, always keeping the last point).
std::string line_chart_svg(const ChartLabels& labels, std::span<const ChartSeries> series,
                           std::size_t max_points = 400);

/// Self-contained SVG bar chart with one bar per label.
std::string bar_chart_svg(const ChartLabels& labels, std::span<const std::string> names,
                          std::span<const double> values);

std::string sha256_hex(std::string_view bytes);

/// Writes `content` to dir/name (creating dir) and returns its manifest
/// entry. Throws std::runtime_error with the path on failure.
ArtifactFile write_artifact(const std::filesystem::path& dir, const std::string& name, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Writes loss.csv, valid_rate.csv, histogram.csv, loss.svg and
/// histogram.svg for one batch into `output_dir`.
std::vector<ArtifactFile> emit_plots(const MetricsSeries& m, const GridSpec& spec,
                                     const std::filesystem::path& output_dir, const std::string& title,
                                     const std::string& digest);

}  // namespace dbql
