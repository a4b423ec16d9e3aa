#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "itl/experiment.hpp"

namespace itl {

/// Equal-width bins; value v lands in the last bin whose lower edge is <= v.
struct Histogram {
    std::vector<double> edges; ///< n_bins + 1 increasing edges
    std::vector<int> counts;
};

/// Bins over [lo, hi]. A degenerate range is widened by 0.5 on each side.
Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int n_bins);
/// Bins over the range of `values`.
Histogram make_histogram(const std::vector<double>& values, int n_bins);

inline constexpr int kDefaultBins = 20;

struct HistogramPanel {
    std::string title;
    Histogram histogram;
};

/// One panel per entry, stacked vertically. Every bar carries data-count,
/// data-lo and data-hi attributes.
std::string render_histograms_svg(const std::vector<HistogramPanel>& panels);

struct QStarRow {
    double epsilon = 0.0;
    int episodes = 0;
    std::string method;
    int dataset = 0;
    double value = 0.0;
};

std::string qstar_csv(const MetricsReport& report);
std::vector<QStarRow> parse_qstar_csv(const std::string& text);

/// Per-method rows: deterministic, stochastic, ball membership and
/// Q*-metric as mean and std columns, "N/A" when undefined.
std::string cell_table_csv(const CellReport& cell);

std::string summary_json(const MetricsReport& report, const ExperimentConfig& config);

/// Writes tables/eps{e}_K{k}.csv, qstar_per_dataset.csv, summary.json and
/// figures/qstar_eps{e}_K{k}_{method}.svg under `out_dir`.
void emit_outputs(const MetricsReport& report, const ExperimentConfig& config,
                  const std::filesystem::path& out_dir);

/// Short decimal form used in file names: 0, 3, 0.5.
std::string format_epsilon(double eps);

} // namespace itl
