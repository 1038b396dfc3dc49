#include "dbql/artifacts.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dbql/errors.hpp"

namespace dbql {

namespace {

// Fixed-precision number for SVG coordinates.
std::string fixed(double v, int precision = 2) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, precision);
  if (ec != std::errc()) return "0";
  return std::string(buf.data(), p);
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr std::array<std::string_view, 6> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 190, kTop = 40, kBottom = 70;

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

std::string svg_open(const ChartLabels& labels) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth, 0) + "\" height=\"" +
                  fixed(kHeight, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       xml_escape(labels.title) + "</text>\n";
  s += "<text x=\"" + fixed(kLeft + (kWidth - kLeft - kRight) / 2) + "\" y=\"" + fixed(kHeight - 30) +
       "\" text-anchor=\"middle\">" + xml_escape(labels.x_label) + "</text>\n";
  s += "<text x=\"18\" y=\"" + fixed((kHeight - kBottom + kTop) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       fixed((kHeight - kBottom + kTop) / 2) + ")\">" + xml_escape(labels.y_label) + "</text>\n";
  if (!labels.footer.empty())
    s += "<text x=\"" + fixed(kWidth - 8) + "\" y=\"" + fixed(kHeight - 8) +
         "\" text-anchor=\"end\" font-size=\"10\" fill=\"#666\">" + xml_escape(labels.footer) + "</text>\n";
  return s;
}

std::string axes(const Frame& f) {
  std::string s;
  s += "<rect x=\"" + fixed(kLeft) + "\" y=\"" + fixed(kTop) + "\" width=\"" + fixed(kWidth - kLeft - kRight) +
       "\" height=\"" + fixed(kHeight - kTop - kBottom) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<text x=\"" + fixed(f.px(x)) + "\" y=\"" + fixed(kHeight - kBottom + 16) + "\" text-anchor=\"middle\">" +
         fixed(x, std::abs(f.x1 - f.x0) >= 10 ? 0 : 2) + "</text>\n";
    s += "<text x=\"" + fixed(kLeft - 6) + "\" y=\"" + fixed(f.py(y) + 4) + "\" text-anchor=\"end\">" + fixed(y, 2) +
         "</text>\n";
    s += "<line x1=\"" + fixed(kLeft) + "\" y1=\"" + fixed(f.py(y)) + "\" x2=\"" + fixed(kWidth - kRight) + "\" y2=\"" +
         fixed(f.py(y)) + "\" stroke=\"#ddd\"/>\n";
  }
  return s;
}

std::string csv_head(std::string_view schema, std::string_view columns) {
  return "# " + std::string(schema) + "\n" + std::string(columns) + "\n";
}

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t begin = 0;
    for (;;) {
      const auto comma = line.find(',', begin);
      cells.push_back(line.substr(begin, comma == std::string::npos ? std::string::npos : comma - begin));
      if (comma == std::string::npos) break;
      begin = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error(path.string() + ": malformed number '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

std::string loss_csv(const MetricsSeries& m) {
  std::string s = csv_head(kLossSchema, "t,mean_loss,stderr");
  for (std::size_t t = 0; t < m.loss.size(); ++t)
    s += std::to_string(t + 1) + "," + format_double(m.loss[t]) + "," + format_double(m.loss_stderr[t]) + "\n";
  return s;
}

std::string valid_rate_csv(const MetricsSeries& m) {
  std::string s = csv_head(kValidRateSchema, "t,mean_rate,stderr");
  for (std::size_t t = 0; t < m.valid_rate.size(); ++t)
    s += std::to_string(t + 1) + "," + format_double(m.valid_rate[t]) + "," + format_double(m.valid_rate_stderr[t]) +
         "\n";
  return s;
}

std::string histogram_csv(const ChoiceHistogram& h, const GridSpec& spec) {
  std::string s = csv_head(kHistogramSchema, "row,col,action,count");
  for (PairIndex p = 0; p < h.per_pair.size(); ++p) {
    const State st = spec.state_at(pair_state(p));
    s += std::to_string(st.row) + "," + std::to_string(st.col) + "," + std::string(to_string(pair_action(p))) + "," +
         std::to_string(h.per_pair[p]) + "\n";
  }
  return s;
}

std::string table1_csv(std::span<const Table1Row> rows) {
  std::string s = csv_head(kTable1Schema, "policy,n_agents,ratio");
  for (const auto& r : rows)
    s += std::string(to_string(r.policy)) + "," + std::to_string(r.n_agents) + "," + format_double(r.ratio) + "\n";
  return s;
}

std::string qvalues_csv(const QTable& q, const GridSpec& spec) {
  if (q.size() != spec.num_pairs()) throw ContractViolation("qvalues_csv: table does not match the grid");
  std::string s = csv_head(kQValuesSchema, "row,col,action,q_value");
  for (PairIndex p = 0; p < q.size(); ++p) {
    const State st = spec.state_at(pair_state(p));
    s += std::to_string(st.row) + "," + std::to_string(st.col) + "," + std::string(to_string(pair_action(p))) + "," +
         format_double(q[p]) + "\n";
  }
  return s;
}

std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path) {
  std::vector<CurvePoint> out;
  for (const auto& row : read_csv_rows(path)) {
    if (row.size() != 3) throw std::runtime_error(path.string() + ": expected 3 columns");
    out.push_back({to_double(row[0], path), to_double(row[1], path), to_double(row[2], path)});
  }
  return out;
}

std::vector<std::uint32_t> read_histogram_csv(const std::filesystem::path& path, const GridSpec& spec) {
  std::vector<std::uint32_t> counts(spec.num_pairs(), 0);
  for (const auto& row : read_csv_rows(path)) {
    if (row.size() != 4) throw std::runtime_error(path.string() + ": expected 4 columns");
    const State s{static_cast<int>(to_double(row[0], path)), static_cast<int>(to_double(row[1], path))};
    if (!spec.contains(s)) throw std::runtime_error(path.string() + ": cell outside the grid");
    counts[pair_index(spec, s, action_from_string(row[2]))] = static_cast<std::uint32_t>(to_double(row[3], path));
  }
  return counts;
}

std::string line_chart_svg(const ChartLabels& labels, std::span<const ChartSeries> series, std::size_t max_points) {
  Frame f{0, 1, 0, 1};
  bool any = false;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!any) f = {s.x[i], s.x[i], s.y[i], s.y[i]};
      any = true;
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
    }
  f.y0 = std::min(f.y0, 0.0);
  if (f.x1 <= f.x0) f.x1 = f.x0 + 1;
  if (f.y1 <= f.y0) f.y1 = f.y0 + 1;

  std::string svg = svg_open(labels) + axes(f);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::string colour(kPalette[k % kPalette.size()]);
    const std::size_t n = std::min(s.x.size(), s.y.size());
    const std::size_t stride = std::max<std::size_t>(1, (n + max_points - 1) / std::max<std::size_t>(1, max_points));
    svg += "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; i += stride) svg += fixed(f.px(s.x[i])) + "," + fixed(f.py(s.y[i])) + " ";
    if (n > 0 && (n - 1) % stride != 0) svg += fixed(f.px(s.x[n - 1])) + "," + fixed(f.py(s.y[n - 1]));
    svg += "\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
    svg += "<line x1=\"" + fixed(kWidth - kRight + 10) + "\" y1=\"" + fixed(ly - 4) + "\" x2=\"" +
           fixed(kWidth - kRight + 30) + "\" y2=\"" + fixed(ly - 4) + "\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fixed(kWidth - kRight + 35) + "\" y=\"" + fixed(ly) + "\">" + xml_escape(s.label) + "</text>\n";
  }
  return svg + "</svg>\n";
}

std::string bar_chart_svg(const ChartLabels& labels, std::span<const std::string> names, std::span<const double> values) {
  const std::size_t n = std::min(names.size(), values.size());
  double top = 0.0;
  for (std::size_t i = 0; i < n; ++i) top = std::max(top, values[i]);
  Frame f{0, static_cast<double>(std::max<std::size_t>(n, 1)), 0, top > 0 ? top : 1.0};
  std::string svg = svg_open(labels);
  svg += "<rect x=\"" + fixed(kLeft) + "\" y=\"" + fixed(kTop) + "\" width=\"" + fixed(kWidth - kLeft - kRight) +
         "\" height=\"" + fixed(kHeight - kTop - kBottom) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y1 * i / 4.0;
    svg += "<text x=\"" + fixed(kLeft - 6) + "\" y=\"" + fixed(f.py(y) + 4) + "\" text-anchor=\"end\">" + fixed(y, 1) +
           "</text>\n";
  }
  const double slot = f.px(1) - f.px(0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = f.px(static_cast<double>(i)) + slot * 0.1;
    const double y = f.py(values[i]);
    svg += "<rect x=\"" + fixed(x) + "\" y=\"" + fixed(y) + "\" width=\"" + fixed(slot * 0.8) + "\" height=\"" +
           fixed(f.py(0) - y) + "\" fill=\"" + std::string(kPalette[0]) + "\"><title>" + xml_escape(names[i]) + ": " +
           fixed(values[i], 0) + "</title></rect>\n";
  }
  // Label every fourth bar (one per cell for per-pair histograms).
  for (std::size_t i = 0; i < n; i += n > 25 ? 4 : 1)
    svg += "<text x=\"" + fixed(f.px(i + 0.5)) + "\" y=\"" + fixed(kHeight - kBottom + 14) +
           "\" text-anchor=\"end\" font-size=\"9\" transform=\"rotate(-60 " + fixed(f.px(i + 0.5)) + " " +
           fixed(kHeight - kBottom + 14) + ")\">" + xml_escape(names[i]) + "</text>\n";
  return svg + "</svg>\n";
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

ArtifactFile write_artifact(const std::filesystem::path& dir, const std::string& name, std::string_view content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return {name, sha256_hex(content), content.size()};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ArtifactFile> emit_plots(const MetricsSeries& m, const GridSpec& spec, const std::filesystem::path& output_dir,
                                     const std::string& title, const std::string& digest) {
  if (m.loss.empty()) throw ContractViolation("emit_plots: empty series");
  std::vector<ArtifactFile> files;
  files.push_back(write_artifact(output_dir, "loss.csv", loss_csv(m)));
  files.push_back(write_artifact(output_dir, "valid_rate.csv", valid_rate_csv(m)));
  files.push_back(write_artifact(output_dir, "histogram.csv", histogram_csv(m.final_histogram, spec)));

  ChartSeries loss{title, std::vector<double>(m.loss.size()), m.loss};
  for (std::size_t t = 0; t < loss.x.size(); ++t) loss.x[t] = static_cast<double>(t + 1);
  files.push_back(write_artifact(output_dir, "loss.svg",
                                 line_chart_svg({"Average loss: " + title, "time step t", "L_t", "config " + digest},
                                                std::span<const ChartSeries>(&loss, 1))));

  std::vector<std::string> names;
  std::vector<double> counts;
  for (PairIndex p = 0; p < m.final_histogram.per_pair.size(); ++p) {
    const State s = spec.state_at(pair_state(p));
    names.push_back("(" + std::to_string(s.row) + "," + std::to_string(s.col) + ") " + std::string(to_string(pair_action(p))));
    counts.push_back(m.final_histogram.per_pair[p]);
  }
  files.push_back(write_artifact(output_dir, "histogram.svg",
                                 bar_chart_svg({"Agents per state-action pair at the final step: " + title,
                                                "state-action pair", "agents", "config " + digest},
                                               names, counts)));
  return files;
}

}  // namespace dbql
