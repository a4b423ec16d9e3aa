#include "itl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "itl/random.hpp"
#include "itl/serialization.hpp"

namespace itl {

namespace {

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string or_na(const std::optional<double>& v) { return v ? fixed(*v) : "N/A"; }

Json or_null(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string escape_xml(const std::string& text) {
    std::string out;
    for (char c : text) {
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

} // namespace

std::string format_epsilon(double eps) {
    std::ostringstream os;
    os << eps;
    return os.str();
}

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int n_bins) {
    require(n_bins >= 1, "histogram needs at least one bin");
    require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, "histogram range must be finite and ordered");
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(n_bins) + 1);
    for (int i = 0; i <= n_bins; ++i) h.edges[i] = lo + (hi - lo) * i / n_bins;
    h.edges.back() = hi;
    h.counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (double v : values) {
        if (!std::isfinite(v) || v < lo || v > hi) continue;
        auto it = std::upper_bound(h.edges.begin(), h.edges.end() - 1, v);
        const auto bin = static_cast<std::size_t>(std::distance(h.edges.begin(), it)) - 1;
        ++h.counts[bin];
    }
    return h;
}

Histogram make_histogram(const std::vector<double>& values, int n_bins) {
    double lo = 0.0;
    double hi = 0.0;
    bool any = false;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        lo = any ? std::min(lo, v) : v;
        hi = any ? std::max(hi, v) : v;
        any = true;
    }
    return make_histogram(values, lo, hi, n_bins);
}

std::string render_histograms_svg(const std::vector<HistogramPanel>& panels) {
    constexpr int width = 640;
    constexpr int panel_height = 220;
    constexpr int margin = 40;
    const int height = std::max<int>(1, static_cast<int>(panels.size())) * panel_height;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& [title, h] = panels[p];
        const int top = static_cast<int>(p) * panel_height;
        const int plot_w = width - 2 * margin;
        const int plot_h = panel_height - 2 * margin;
        const int max_count = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
        os << "<g class=\"panel\" data-title=\"" << escape_xml(title) << "\">\n";
        os << "<text x=\"" << margin << "\" y=\"" << top + margin / 2 + 5 << "\" font-size=\"14\">"
           << escape_xml(title) << "</text>\n";
        const double bar_w = h.counts.empty() ? 0.0 : static_cast<double>(plot_w) / h.counts.size();
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            const double bar_h = max_count > 0 ? static_cast<double>(plot_h) * h.counts[b] / max_count : 0.0;
            os << "<rect class=\"bar\" x=\"" << fixed(margin + b * bar_w, 2) << "\" y=\""
               << fixed(top + margin + plot_h - bar_h, 2) << "\" width=\"" << fixed(bar_w, 2)
               << "\" height=\"" << fixed(bar_h, 2) << "\" fill=\"steelblue\" stroke=\"white\" data-count=\""
               << h.counts[b] << "\" data-lo=\"" << exact(h.edges[b]) << "\" data-hi=\""
               << exact(h.edges[b + 1]) << "\"/>\n";
        }
        const int axis_y = top + margin + plot_h;
        os << "<line x1=\"" << margin << "\" y1=\"" << axis_y << "\" x2=\"" << margin + plot_w << "\" y2=\""
           << axis_y << "\" stroke=\"black\"/>\n";
        if (!h.edges.empty()) {
            os << "<text x=\"" << margin << "\" y=\"" << axis_y + 16 << "\" font-size=\"11\">"
               << fixed(h.edges.front(), 3) << "</text>\n";
            os << "<text x=\"" << margin + plot_w << "\" y=\"" << axis_y + 16
               << "\" font-size=\"11\" text-anchor=\"end\">" << fixed(h.edges.back(), 3) << "</text>\n";
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string qstar_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "epsilon,K,method,dataset,q_star_metric\n";
    for (const auto& cell : report.cells)
        for (const auto& m : cell.methods)
            for (std::size_t i = 0; i < m.datasets.size(); ++i) {
                const auto& d = m.datasets[i];
                os << format_epsilon(cell.epsilon) << ',' << cell.episodes << ',' << m.name << ',' << i << ','
                   << (d.flagged ? std::string("N/A") : exact(d.q_star_metric)) << '\n';
            }
    return os.str();
}

std::vector<QStarRow> parse_qstar_csv(const std::string& text) {
    std::vector<QStarRow> rows;
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "Q*-metric CSV is empty");
    require(line.rfind("epsilon,K,method,dataset,q_star_metric", 0) == 0, "unexpected Q*-metric CSV header");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        require(fields.size() == 5, "line " + std::to_string(line_no) + ": expected 5 fields");
        if (fields[4] == "N/A") continue;
        try {
            rows.push_back(QStarRow{std::stod(fields[0]), std::stoi(fields[1]), fields[2], std::stoi(fields[3]),
                                    std::stod(fields[4])});
        } catch (const std::exception&) {
            throw ContractViolation("line " + std::to_string(line_no) + ": malformed number");
        }
    }
    return rows;
}

std::string cell_table_csv(const CellReport& cell) {
    std::ostringstream os;
    os << "method,deterministic_mean,deterministic_std,stochastic_mean,stochastic_std,"
          "ball_membership_mean,ball_membership_std,q_star_metric_mean,q_star_metric_std,datasets,flagged\n";
    for (const auto& m : cell.methods) {
        os << m.name << ',' << or_na(m.deterministic.mean) << ',' << or_na(m.deterministic.std) << ','
           << or_na(m.stochastic.mean) << ',' << or_na(m.stochastic.std) << ',' << or_na(m.ball_membership.mean)
           << ',' << or_na(m.ball_membership.std) << ',' << or_na(m.q_star_metric.mean) << ','
           << or_na(m.q_star_metric.std) << ',' << m.datasets.size() << ',' << m.flagged() << '\n';
    }
    return os.str();
}

namespace {

Json summary_to_json(const MetricSummary& s) {
    return Json{{"mean", or_null(s.mean)}, {"std", or_null(s.std)}, {"count", s.count}};
}

} // namespace

std::string summary_json(const MetricsReport& report, const ExperimentConfig& config) {
    Json cells = Json::array();
    std::size_t item = 0;
    for (const auto& cell : report.cells) {
        Json seeds = Json::array();
        Json methods = Json::object();
        const std::size_t n = static_cast<std::size_t>(config.n_datasets);
        for (std::size_t i = 0; i < n; ++i) seeds.push_back(dataset_seed(config.master_seed, item + i));
        item += n;
        Json flagged = Json::array();
        for (const auto& m : cell.methods) {
            methods[m.name] = Json{{"deterministic_accuracy", summary_to_json(m.deterministic)},
                                   {"stochastic_accuracy", summary_to_json(m.stochastic)},
                                   {"ball_membership_of_mistakes", summary_to_json(m.ball_membership)},
                                   {"q_star_metric", summary_to_json(m.q_star_metric)},
                                   {"flagged", m.flagged()}};
            for (std::size_t i = 0; i < m.datasets.size(); ++i)
                if (m.datasets[i].flagged)
                    flagged.push_back(Json{{"method", m.name}, {"dataset", i}, {"error", m.datasets[i].error}});
        }
        cells.push_back(Json{{"epsilon", cell.epsilon},
                             {"K", cell.episodes},
                             {"stochastic_states", cell.stochastic_states},
                             {"dataset_seeds", std::move(seeds)},
                             {"methods", std::move(methods)},
                             {"flagged", std::move(flagged)}});
    }
    const Json doc{{"config", config_to_json(config)},
                   {"config_hash", config_hash(config)},
                   {"env_hash", report.env_hash},
                   {"master_seed", config.master_seed},
                   {"seed_derivation", "master ^ ((index + 1) * 0x9E3779B97F4A7C15), index over all cells"},
                   {"flagged_datasets", report.flagged_datasets},
                   {"total_datasets", report.total_datasets},
                   {"flagged_overflow", report.flagged_overflow(config.max_flagged_fraction)},
                   {"cells", std::move(cells)}};
    return doc.dump(2) + "\n";
}

void emit_outputs(const MetricsReport& report, const ExperimentConfig& config,
                  const std::filesystem::path& out_dir) {
    config.validate();
    for (const auto& cell : report.cells) {
        const std::string tag = "eps" + format_epsilon(cell.epsilon) + "_K" + std::to_string(cell.episodes);
        write_text_file(out_dir / "tables" / (tag + ".csv"), cell_table_csv(cell));

        double lo = 0.0;
        double hi = 0.0;
        bool any = false;
        for (const auto& m : cell.methods)
            for (double v : m.q_star_values()) {
                lo = any ? std::min(lo, v) : v;
                hi = any ? std::max(hi, v) : v;
                any = true;
            }
        for (const auto& m : cell.methods) {
            const std::string title = m.name + " (eps=" + format_epsilon(cell.epsilon) +
                                      ", K=" + std::to_string(cell.episodes) + ")";
            const Histogram h = make_histogram(m.q_star_values(), lo, hi, kDefaultBins);
            write_text_file(out_dir / "figures" / ("qstar_" + tag + "_" + m.name + ".svg"),
                            render_histograms_svg({HistogramPanel{title, h}}));
        }
    }
    write_text_file(out_dir / "qstar_per_dataset.csv", qstar_csv(report));
    write_text_file(out_dir / "summary.json", summary_json(report, config));
}

} // namespace itl
