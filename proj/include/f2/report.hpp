#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "f2/supernet.hpp"
#include "f2/tensor.hpp"

namespace f2 {

// One tab-separated table with a config echo. render_table produces
//
//   # generated <timestamp>
//   # key = value          (config keys in sorted order)
//   col<TAB>col...
//   cell<TAB>cell...
//
// so reruns with identical config and seeds differ only in the first line.
struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

// Six fixed decimals; the cell format for every numeric report column.
std::string format_fixed(double v);

// Shortest-ish form (%.10g) for key=value records, where magnitudes range
// from 1e-16 logit gaps to epoch counts.
std::string format_compact(double v);

// UTC wall clock as 2026-01-31T09:30:00Z. Reports carry it in the header
// line only, so byte comparisons can skip line one.
std::string timestamp_utc();

std::string render_table(const std::map<std::string, std::string>& config,
                         const ReportTable& table, const std::string& timestamp);

void write_text_file(const std::string& path, const std::string& text);

double mean_of(const std::vector<double>& xs);

// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev_of(const std::vector<double>& xs);

// One line per epoch:
//   epoch=3 train_loss=0.6931 val_loss=0.7012 train_acc=0.5 val_acc=0.4375
std::string render_history(const std::vector<SearchEpoch>& history);

// One line per temperature point:
//   lambda=0.001 supernet_val_acc=... childnet_val_acc=... gap_pp=...
//   max_logit_diff=... forced_output=0
std::string render_gap_report(const GapReport& rep);

// Minimal static SVG figures, enough for eyeballing profiles and usage
// matrices. Bars must be non-negative (these plots show accuracies, MAD
// values, and gaps, all >= 0).
std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::pair<std::string, double>>& bars);

// Grayscale grid, one cell per matrix entry, values clamped to [0, 1]
// (0 renders white, 1 black). Label counts must match the cell grid.
std::string svg_heatmap(const std::string& title,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const DenseTensor& cells);

}  // namespace f2
