#include "ablab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ablab {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json score_json(const AlignmentScore& s) {
    return {{"posterior", s.posterior},
            {"posterior_stderr", s.posterior_stderr},
            {"raw", s.raw},
            {"raw_stderr", s.raw_stderr},
            {"n", s.n}};
}

json report_json(const EvalReport& r) {
    json scores = json::array();
    for (const auto& s : r.scores)
        scores.push_back({{"concept", s.text}, {"role", s.role}, {"model", tag_name(s.tag)}, {"score", score_json(s.score)}});
    json leakage = json::array();
    for (const auto& l : r.leakage)
        leakage.push_back({{"prompt", l.text}, {"model", tag_name(l.tag)}, {"target_alignment", score_json(l.score)}});
    json far = json::array();
    for (const auto& f : r.far)
        far.push_back({{"concept", f.text},
                       {"baseline", score_json(f.baseline)},
                       {"ablated", score_json(f.ablated)},
                       {"delta", f.delta},
                       {"delta_stderr", f.delta_stderr}});
    json tm = json::array();
    for (const auto& t : r.trademark)
        tm.push_back({{"model", tag_name(t.tag)}, {"glyph", score_json(t.glyph)}, {"object", score_json(t.object)}});
    return {{"config_hash", r.config_hash}, {"seed", r.seed},    {"scores", scores},
            {"leakage", leakage},           {"far_concepts", far}, {"trademark", tm}};
}

json log_json(const TrainingLog& log) {
    json probes = json::array();
    for (const auto& [step, v] : log.probes()) probes.push_back({{"step", step}, {"target_alignment", v}});
    json losses = json::array();
    for (const auto& r : log.records) losses.push_back(r.loss);
    return {{"probe_interval", log.probe_interval}, {"probes", probes}, {"losses", losses}};
}

json comparison_json(const MethodComparison& c) {
    json rows = json::array();
    for (std::size_t i = 0; i < c.steps.size(); ++i)
        rows.push_back({{"step", c.steps[i]},
                        {"noise", c.noise_based[i]},
                        {"model", c.model_based[i]},
                        {"model_minus_noise", c.difference[i]}});
    return {{"probes", rows}, {"model_le_fraction", c.model_le_fraction}, {"verdict", verdict_name(c.verdict)}};
}

std::string scores_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "concept,model-tag,score-posterior,score-raw,stderr,n\n";
    for (const auto& s : r.scores)
        out << s.text << "," << tag_name(s.tag) << "," << format_number(s.score.posterior) << ","
            << format_number(s.score.raw) << "," << format_number(s.score.posterior_stderr) << "," << s.score.n << "\n";
    return out.str();
}

std::string training_csv(const TrainingLog& log) {
    std::ostringstream out;
    out << "step,loss,probe\n";
    if (log.initial_probe) out << "0,," << format_number(*log.initial_probe) << "\n";
    for (const auto& r : log.records) {
        out << r.step << "," << format_number(r.loss) << ",";
        if (r.probe) out << format_number(*r.probe);
        out << "\n";
    }
    return out.str();
}

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
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

std::string svg_open(const std::string& title) {
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
    return o.str();
}

double plot_w() { return kWidth - kLeft - kRight; }
double plot_h() { return kHeight - kTop - kBottom; }
double y_of(double v) { return kTop + plot_h() * (1.0 - std::clamp(v, 0.0, 1.0)); }

// Unit-interval y axis with gridlines.
std::string y_axis(const std::string& label) {
    std::ostringstream o;
    for (int i = 0; i <= 4; ++i) {
        const double v = i / 4.0;
        o << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(y_of(v)) << "\" x2=\"" << fixed(kLeft + plot_w())
          << "\" y2=\"" << fixed(y_of(v)) << "\" stroke=\"#dddddd\"/>\n"
          << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(y_of(v) + 4) << "\" text-anchor=\"end\">"
          << fixed(v) << "</text>\n";
    }
    o << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
      << fixed(kTop + plot_h()) << "\" stroke=\"black\"/>\n"
      << "<text x=\"16\" y=\"" << fixed(kTop + plot_h() / 2) << "\" transform=\"rotate(-90 16 "
      << fixed(kTop + plot_h() / 2) << ")\" text-anchor=\"middle\">" << escape(label) << "</text>\n";
    return o.str();
}

std::string legend_entry(std::size_t i, const std::string& name, const char* color) {
    std::ostringstream o;
    const double x = kWidth - kRight + 15, y = kTop + 10 + 20 * static_cast<double>(i);
    o << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y - 9) << "\" width=\"12\" height=\"12\" fill=\"" << color
      << "\"/>\n<text x=\"" << fixed(x + 18) << "\" y=\"" << fixed(y + 1) << "\">" << escape(name) << "</text>\n";
    return o.str();
}

}  // namespace

std::string probe_chart_svg(const std::vector<std::pair<std::string, TrainingLog>>& logs) {
    std::size_t max_step = 1;
    for (const auto& [name, log] : logs)
        for (const auto& [s, v] : log.probes()) max_step = std::max(max_step, s);
    const auto x_of = [&](std::size_t s) { return kLeft + plot_w() * static_cast<double>(s) / static_cast<double>(max_step); };

    std::ostringstream o;
    o << svg_open("Target alignment during ablation") << y_axis("target alignment");
    o << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + plot_h()) << "\" x2=\"" << fixed(kLeft + plot_w())
      << "\" y2=\"" << fixed(kTop + plot_h()) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const std::size_t s = max_step * static_cast<std::size_t>(i) / 4;
        o << "<text x=\"" << fixed(x_of(s)) << "\" y=\"" << fixed(kTop + plot_h() + 18) << "\" text-anchor=\"middle\">"
          << s << "</text>\n";
    }
    o << "<text x=\"" << fixed(kLeft + plot_w() / 2) << "\" y=\"" << fixed(kHeight - 10)
      << "\" text-anchor=\"middle\">step</text>\n";
    std::size_t i = 0;
    for (const auto& [name, log] : logs) {
        const char* color = kColors[i % 4];
        const auto probes = log.probes();
        if (!probes.empty()) {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
            for (std::size_t k = 0; k < probes.size(); ++k)
                o << (k ? " " : "") << fixed(x_of(probes[k].first)) << "," << fixed(y_of(probes[k].second));
            o << "\"/>\n";
            for (const auto& [s, v] : probes)
                o << "<circle cx=\"" << fixed(x_of(s)) << "\" cy=\"" << fixed(y_of(v)) << "\" r=\"3\" fill=\"" << color
                  << "\"/>\n";
        }
        o << legend_entry(i, name, color);
        ++i;
    }
    o << "</svg>\n";
    return o.str();
}

std::string score_bars_svg(const EvalReport& r, const std::string& title) {
    std::vector<std::string> concepts;
    for (const auto& s : r.scores)
        if (std::find(concepts.begin(), concepts.end(), s.text) == concepts.end()) concepts.push_back(s.text);
    const double group = plot_w() / static_cast<double>(std::max<std::size_t>(1, concepts.size()));
    const double bar = group * 0.35;

    std::ostringstream o;
    o << svg_open(title) << y_axis("alignment (posterior)");
    o << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + plot_h()) << "\" x2=\"" << fixed(kLeft + plot_w())
      << "\" y2=\"" << fixed(kTop + plot_h()) << "\" stroke=\"black\"/>\n";
    for (std::size_t c = 0; c < concepts.size(); ++c) {
        const double x0 = kLeft + group * static_cast<double>(c) + group * 0.15;
        for (const auto& s : r.scores) {
            if (s.text != concepts[c]) continue;
            const bool abl = s.tag == ModelTag::Ablated;
            const double x = x0 + (abl ? bar : 0.0);
            const double y = y_of(s.score.posterior);
            o << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(bar) << "\" height=\""
              << fixed(kTop + plot_h() - y) << "\" fill=\"" << kColors[abl ? 1 : 0] << "\"/>\n";
            const double e = s.score.posterior_stderr;
            o << "<line x1=\"" << fixed(x + bar / 2) << "\" y1=\"" << fixed(y_of(s.score.posterior - e)) << "\" x2=\""
              << fixed(x + bar / 2) << "\" y2=\"" << fixed(y_of(s.score.posterior + e)) << "\" stroke=\"black\"/>\n";
        }
        o << "<text x=\"" << fixed(x0 + bar) << "\" y=\"" << fixed(kTop + plot_h() + 18) << "\" text-anchor=\"middle\">"
          << escape(concepts[c]) << "</text>\n";
    }
    o << legend_entry(0, "baseline", kColors[0]) << legend_entry(1, "ablated", kColors[1]) << "</svg>\n";
    return o.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> emit_reports(const ReportBundle& bundle, const fs::path& outdir) {
    std::vector<std::string> files;
    const auto put = [&](const std::string& rel, const std::string& text) {
        write_text(outdir / rel, text);
        files.push_back(rel);
    };
    json runs = json::object();
    for (const auto& [method, rep] : bundle.reports) {
        rep.check_paired();
        json j = report_json(rep);
        for (const auto& [m, log] : bundle.logs)
            if (m == method) j["training"] = log_json(log);
        runs[method] = j;
    }
    json root = {{"config_hash", bundle.config_hash}, {"seed", bundle.seed}, {"runs", runs}};
    if (bundle.comparison) root["method_comparison"] = comparison_json(*bundle.comparison);
    put("report.json", root.dump(2) + "\n");
    for (const auto& [method, rep] : bundle.reports) {
        put("tables/scores-" + method + ".csv", scores_csv(rep));
        put("charts/scores-" + method + ".svg", score_bars_svg(rep, "Per-concept alignment, " + method + "-based ablation"));
    }
    for (const auto& [method, log] : bundle.logs) put("logs/training-" + method + ".csv", training_csv(log));
    if (!bundle.logs.empty()) put("charts/probe_curve.svg", probe_chart_svg(bundle.logs));
    return files;
}

}  // namespace ablab
