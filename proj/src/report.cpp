#include "f2/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "f2/errors.hpp"

namespace f2 {
namespace {

std::string printf_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

// & < > are the only characters that can break out of SVG text nodes here.
std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_fixed(double v) { return printf_double("%.6f", v); }

std::string format_compact(double v) { return printf_double("%.10g", v); }

std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string render_table(const std::map<std::string, std::string>& config,
                         const ReportTable& table, const std::string& timestamp) {
  if (table.columns.empty()) throw UsageError("report table has no columns");
  std::ostringstream out;
  out << "# generated " << timestamp << "\n";
  for (const auto& [key, value] : config) out << "# " << key << " = " << value << "\n";
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << '\t';
    out << table.columns[c];
  }
  out << "\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.columns.size()) {
      throw UsageError("report row " + std::to_string(r) + " has " +
                       std::to_string(row.size()) + " cells, expected " +
                       std::to_string(table.columns.size()));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << '\t';
      out << row[c];
    }
    out << "\n";
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
  if (!out) throw UsageError("short write to " + path);
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw UsageError("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stddev_of(const std::vector<double>& xs) {
  if (xs.empty()) throw UsageError("stddev of an empty sample");
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string render_history(const std::vector<SearchEpoch>& history) {
  std::ostringstream out;
  for (const auto& e : history) {
    out << "epoch=" << e.epoch << " train_loss=" << format_compact(e.train_loss)
        << " val_loss=" << format_compact(e.val_loss)
        << " train_acc=" << format_compact(e.train_acc)
        << " val_acc=" << format_compact(e.val_acc) << "\n";
  }
  return out.str();
}

std::string render_gap_report(const GapReport& rep) {
  std::ostringstream out;
  for (const auto& p : rep.points) {
    out << "lambda=" << format_compact(p.lambda)
        << " supernet_val_acc=" << format_compact(p.supernet_val_acc)
        << " childnet_val_acc=" << format_compact(p.childnet_val_acc)
        << " gap_pp=" << format_compact(p.gap_pp)
        << " max_logit_diff=" << format_compact(p.max_logit_diff)
        << " forced_output=" << (p.forced_output ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::pair<std::string, double>>& bars) {
  if (bars.empty()) throw UsageError("bar chart needs at least one bar");
  double peak = 0.0;
  for (const auto& [label, value] : bars) {
    (void)label;
    if (!std::isfinite(value) || value < 0.0) {
      throw UsageError("bar chart values must be finite and non-negative");
    }
    peak = std::max(peak, value);
  }
  if (peak == 0.0) peak = 1.0;  // all-zero data still renders a flat chart

  const int width = 640, height = 360;
  const int left = 50, right = 20, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const double slot = plot_w / static_cast<double>(bars.size());
  const double bar_w = slot * 0.7;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title)
      << "</text>\n";
  // axis line along the baseline
  out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
      << left + plot_w << "\" y2=\"" << top + plot_h
      << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = plot_h * bars[i].second / peak;
    const double x = left + slot * static_cast<double>(i) + (slot - bar_w) / 2.0;
    const double y = top + plot_h - h;
    out << "<rect class=\"bar\" x=\"" << printf_double("%.2f", x) << "\" y=\""
        << printf_double("%.2f", y) << "\" width=\"" << printf_double("%.2f", bar_w)
        << "\" height=\"" << printf_double("%.2f", h)
        << "\" fill=\"#4878a8\"/>\n";
    const double cx = x + bar_w / 2.0;
    out << "<text x=\"" << printf_double("%.2f", cx) << "\" y=\""
        << printf_double("%.2f", y - 4.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << format_fixed(bars[i].second) << "</text>\n";
    out << "<text x=\"" << printf_double("%.2f", cx) << "\" y=\""
        << top + plot_h + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << xml_escape(bars[i].first) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_heatmap(const std::string& title,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const DenseTensor& cells) {
  if (cells.rows() == 0 || cells.cols() == 0) throw UsageError("heatmap needs cells");
  if (static_cast<int>(row_labels.size()) != cells.rows() ||
      static_cast<int>(col_labels.size()) != cells.cols()) {
    throw UsageError("heatmap label counts must match the cell grid");
  }
  const int cell = 36;
  const int left = 70, top = 60;
  const int width = left + cells.cols() * cell + 20;
  const int height = top + cells.rows() * cell + 20;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title)
      << "</text>\n";
  for (int c = 0; c < cells.cols(); ++c) {
    out << "<text x=\"" << left + c * cell + cell / 2 << "\" y=\"" << top - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << xml_escape(col_labels[(std::size_t)c]) << "</text>\n";
  }
  for (int r = 0; r < cells.rows(); ++r) {
    out << "<text x=\"" << left - 8 << "\" y=\"" << top + r * cell + cell / 2 + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << xml_escape(row_labels[(std::size_t)r]) << "</text>\n";
    for (int c = 0; c < cells.cols(); ++c) {
      double v = cells.at(r, c);
      if (!std::isfinite(v)) throw UsageError("heatmap cells must be finite");
      v = std::clamp(v, 0.0, 1.0);
      const int lum = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      out << "<rect class=\"cell\" x=\"" << left + c * cell << "\" y=\""
          << top + r * cell << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"rgb(" << lum << "," << lum << "," << lum
          << ")\" stroke=\"#888\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace f2
