#include "texrisk/evaluation/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace texrisk::evaluation {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const CaptureRates& c) {
    return {{"SDC", optional_json(c.sdc)},
            {"IC", optional_json(c.ic)},
            {"LTC", optional_json(c.ltc)},
            {"AllCancers", optional_json(c.all_cancers)}};
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(precision);
    os << v;
    return os.str();
}

std::string escape(const std::string& text) {
    std::string out;
    for (char ch : text) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};

struct Plot {
    double width = 480, height = 360, left = 50, right = 20, top = 30, bottom = 40;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }

    std::string header(const std::string& title) const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
           << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\">" << escape(title) << "</text>\n"
           << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - left - right << "\" height=\""
           << height - top - bottom << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double xv = x0 + (x1 - x0) * k / 4.0;
            const double yv = y0 + (y1 - y0) * k / 4.0;
            os << "<text x=\"" << px(xv) << "\" y=\"" << height - bottom + 14 << "\" text-anchor=\"middle\">"
               << fmt(xv, 2) << "</text>\n";
            os << "<text x=\"" << left - 4 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv, 2)
               << "</text>\n";
        }
        return os.str();
    }

    std::string polyline(const std::vector<std::pair<double, double>>& pts, const char* color) const {
        std::ostringstream os;
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) os << fmt(px(x), 1) << ',' << fmt(py(y), 1) << ' ';
        os << "\"/>\n";
        return os.str();
    }
};

}  // namespace

json to_json(const AucResult& r) {
    return {{"auc", r.auc},
            {"ci_low", r.ci_low},
            {"ci_high", r.ci_high},
            {"variance", r.variance},
            {"positivity", std::string(to_string(r.positivity))},
            {"n_positive", r.n_positive},
            {"n_negative", r.n_negative}};
}

json to_json(const OrMatrix& m) {
    json cells = json::array();
    for (const auto& c : m.cells) {
        cells.push_back({{"texture_quantile", c.texture_quantile},
                         {"pmd_quantile", c.pmd_quantile},
                         {"n_women", c.n_women},
                         {"n_events", c.n_events},
                         {"percent", c.percent},
                         {"odds_ratio", optional_json(c.odds_ratio)},
                         {"fisher_p", c.fisher_p}});
    }
    return {{"event", std::string(to_string(m.event))},
            {"q", m.q},
            {"reference_cell", {{"texture_quantile", 1}, {"pmd_quantile", 1}}},
            {"reference_empty", m.reference_empty},
            {"texture_edges", m.texture_edges},
            {"pmd_edges", m.pmd_edges},
            {"cells", cells}};
}

json to_json(const ConvergenceReport& c) {
    json traces = json::array();
    for (const auto& t : c.per_fold_traces) traces.push_back({{"epochs", t.epochs}, {"auc", t.auc}});
    return {{"per_fold_traces", traces},
            {"argmax_epochs", c.argmax_epochs},
            {"cp_epoch", c.cp_epoch},
            {"cp_grid_epoch", c.cp_grid_epoch},
            {"spread_at_cp", c.spread_at_cp}};
}

json to_json(const EvaluationReport& report) {
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["aucs"] = json::array();
    for (const auto& a : report.aucs) {
        auto entry = to_json(a.result);
        entry["label"] = a.label;
        j["aucs"].push_back(entry);
    }
    j["comparisons"] = json::array();
    for (const auto& c : report.comparisons) {
        j["comparisons"].push_back({{"label_a", c.label_a},
                                    {"label_b", c.label_b},
                                    {"positivity", std::string(to_string(c.positivity))},
                                    {"paired", c.paired},
                                    {"auc_a", c.result.a.auc},
                                    {"auc_b", c.result.b.auc},
                                    {"z", c.result.z},
                                    {"p_value", c.result.p_value}});
    }
    j["flagging"] = json::array();
    for (const auto& f : report.flagging) {
        j["flagging"].push_back({{"label", f.label},
                                 {"fraction", f.result.fraction},
                                 {"n_flagged", f.result.n_flagged},
                                 {"capture_rate", to_json(f.result.capture)},
                                 {"sensitivity_at_90_specificity", optional_json(f.sensitivity_at_90_specificity)}});
    }
    j["or_matrices"] = json::array();
    for (const auto& m : report.or_matrices) {
        auto entry = to_json(m.matrix);
        entry["label"] = m.label;
        j["or_matrices"].push_back(entry);
    }
    j["convergence"] = json::array();
    for (const auto& c : report.convergence) {
        auto entry = to_json(c.report);
        entry["label"] = c.label;
        j["convergence"].push_back(entry);
    }
    j["notes"] = report.notes;
    return j;
}

std::string auc_grid_csv(const EvaluationReport& report) {
    std::ostringstream os;
    os << "label,positivity,auc,ci_low,ci_high,n_positive,n_negative\n";
    for (const auto& a : report.aucs) {
        os << '"' << a.label << "\"," << to_string(a.result.positivity) << ',' << fmt(a.result.auc) << ','
           << fmt(a.result.ci_low) << ',' << fmt(a.result.ci_high) << ',' << a.result.n_positive << ','
           << a.result.n_negative << '\n';
    }
    return os.str();
}

std::string or_matrix_csv(const OrMatrix& m) {
    std::ostringstream os;
    os << "event,texture_quantile,pmd_quantile,n_women,n_events,percent,odds_ratio,fisher_p\n";
    for (const auto& c : m.cells) {
        os << to_string(m.event) << ',' << c.texture_quantile << ',' << c.pmd_quantile << ',' << c.n_women << ','
           << c.n_events << ',' << fmt(c.percent, 2) << ',' << (c.odds_ratio ? fmt(*c.odds_ratio, 3) : "NA") << ','
           << c.fisher_p << '\n';
    }
    return os.str();
}

std::string svg_traces(const ConvergenceReport& c, const std::string& title) {
    Plot plot;
    if (!c.per_fold_traces.empty()) {
        const auto& grid = c.per_fold_traces.front().epochs;
        plot.x0 = grid.front();
        plot.x1 = std::max(grid.back(), grid.front() + 1);
    }
    plot.y0 = 0.3;
    plot.y1 = 1.0;
    std::string out = plot.header(title);
    for (std::size_t f = 0; f < c.per_fold_traces.size(); ++f) {
        const auto& t = c.per_fold_traces[f];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < t.epochs.size(); ++i) pts.emplace_back(t.epochs[i], std::clamp(t.auc[i], 0.3, 1.0));
        out += plot.polyline(pts, kPalette[f % 7]);
    }
    out += "<line x1=\"" + fmt(plot.px(c.cp_grid_epoch), 1) + "\" x2=\"" + fmt(plot.px(c.cp_grid_epoch), 1) +
           "\" y1=\"" + fmt(plot.top, 1) + "\" y2=\"" + fmt(plot.height - plot.bottom, 1) +
           "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    return out + "</svg>\n";
}

std::string svg_roc(const std::vector<std::pair<std::string, std::vector<RocPoint>>>& curves,
                    const std::string& title) {
    Plot plot;
    std::string out = plot.header(title);
    out += plot.polyline({{0, 0}, {1, 1}}, "#bbb");
    for (std::size_t k = 0; k < curves.size(); ++k) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : curves[k].second) pts.emplace_back(p.fpr, p.tpr);
        out += plot.polyline(pts, kPalette[k % 7]);
        out += "<text x=\"" + fmt(plot.px(0.55), 1) + "\" y=\"" + fmt(plot.py(0.3 - 0.06 * k), 1) + "\" fill=\"" +
               kPalette[k % 7] + "\">" + escape(curves[k].first) + "</text>\n";
    }
    return out + "</svg>\n";
}

std::string svg_or_heatmap(const OrMatrix& m, const std::string& title) {
    const double cell = 70;
    const double left = 60;
    const double top = 40;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + cell * m.q + 20 << "\" height=\""
       << top + cell * m.q + 40 << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << left << "\" y=\"20\">" << escape(title) << "</text>\n";
    for (const auto& c : m.cells) {
        // texture on the vertical axis, highest quantile at the top
        const double x = left + (c.pmd_quantile - 1) * cell;
        const double y = top + (m.q - c.texture_quantile) * cell;
        const double orv = c.odds_ratio.value_or(1.0);
        const double t = std::clamp(std::log2(std::max(orv, 1e-3)) / 3.0, -1.0, 1.0);
        const int red = t > 0 ? 255 : static_cast<int>(255 * (1 + t));
        const int blue = t < 0 ? 255 : static_cast<int>(255 * (1 - t));
        const int green = static_cast<int>(255 * (1 - std::abs(t)));
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
           << "\" stroke=\"white\" fill=\"rgb(" << red << ',' << green << ',' << blue << ")\"/>\n"
           << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 - 4 << "\" text-anchor=\"middle\">"
           << (c.odds_ratio ? fmt(*c.odds_ratio, 2) : "NA") << "</text>\n"
           << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 12 << "\" text-anchor=\"middle\">p="
           << fmt(c.fisher_p, 3) << "</text>\n";
    }
    os << "<text x=\"" << left + cell * m.q / 2 << "\" y=\"" << top + cell * m.q + 25
       << "\" text-anchor=\"middle\">PMD quantile</text>\n"
       << "<text x=\"15\" y=\"" << top + cell * m.q / 2 << "\" transform=\"rotate(-90 15 " << top + cell * m.q / 2
       << ")\" text-anchor=\"middle\">texture quantile</text>\n";
    return os.str() + "</svg>\n";
}

}  // namespace texrisk::evaluation
