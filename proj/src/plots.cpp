// SPDX-License-Identifier: Apache-2.0

#include "dropgan/plots.hpp"

#include "dropgan/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dropgan {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 48.0;
constexpr double kFrame = 3.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
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
            default: out.push_back(c);
        }
    }
    return out;
}

std::string header(const std::string& title) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"14\">"
       << escape(title) << "</text>\n";
    return os.str();
}

Matrix read_points(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("plots: cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != "x,y") throw IoError("plots: bad header in '" + path.string() + "'");
    std::vector<double> xs;
    std::vector<double> ys;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError("plots: bad row in '" + path.string() + "'");
        try {
            xs.push_back(std::stod(line.substr(0, comma)));
            ys.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw IoError("plots: bad row in '" + path.string() + "'");
        }
    }
    Matrix m(static_cast<Eigen::Index>(xs.size()), 2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        m(static_cast<Eigen::Index>(i), 0) = xs[i];
        m(static_cast<Eigen::Index>(i), 1) = ys[i];
    }
    return m;
}

std::string step_tag(std::uint64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%08llu", static_cast<unsigned long long>(step));
    return buf;
}

}  // namespace

std::string scatter_svg(const Matrix& real, const Matrix& generated, const std::string& title) {
    const double span = kWidth - 2 * kMargin;
    const auto px = [&](double x) { return kMargin + (x + kFrame) / (2 * kFrame) * span; };
    const auto py = [&](double y) { return kHeight - kMargin - (y + kFrame) / (2 * kFrame) * span; };
    std::string out = header(title);
    out += "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" + num(span) +
           "\" height=\"" + num(span) + "\" fill=\"none\" stroke=\"#888\"/>\n";
    const auto dots = [&](const Matrix& m, const char* colour) {
        out += std::string("<g fill=\"") + colour + "\" fill-opacity=\"0.5\">\n";
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double x = m(i, 0);
            const double y = m(i, 1);
            if (!std::isfinite(x) || !std::isfinite(y) || std::abs(x) > kFrame || std::abs(y) > kFrame) continue;
            out += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"1.5\"/>\n";
        }
        out += "</g>\n";
    };
    dots(real, "red");
    dots(generated, "blue");
    out += "</svg>\n";
    return out;
}

std::string line_chart_svg(const std::vector<std::pair<double, double>>& points, const std::string& title,
                           const std::string& x_label, const std::string& y_label) {
    if (points.empty()) throw IoError("plots: no points for '" + title + "'");
    double x0 = points.front().first, x1 = x0, y0 = points.front().second, y1 = y0;
    for (const auto& [x, y] : points) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        if (std::isfinite(y)) {
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    y0 = std::min(y0, 0.0);
    if (x1 == x0) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    const double w = kWidth - 2 * kMargin;
    const double h = kHeight - 2 * kMargin;
    const auto px = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * w; };
    const auto py = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * h; };

    std::string out = header(title);
    out += "<g stroke=\"black\">\n<line x1=\"" + num(kMargin) + "\" y1=\"" + num(kHeight - kMargin) +
           "\" x2=\"" + num(kWidth - kMargin) + "\" y2=\"" + num(kHeight - kMargin) + "\"/>\n<line x1=\"" +
           num(kMargin) + "\" y1=\"" + num(kMargin) + "\" x2=\"" + num(kMargin) + "\" y2=\"" +
           num(kHeight - kMargin) + "\"/>\n</g>\n";
    const std::string font = "font-family=\"sans-serif\" font-size=\"11\"";
    out += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 10) + "\" text-anchor=\"middle\" " + font +
           ">" + escape(x_label) + "</text>\n";
    out += "<text x=\"14\" y=\"" + num(kHeight / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           num(kHeight / 2) + ")\" " + font + ">" + escape(y_label) + "</text>\n";
    for (double f : {0.0, 0.5, 1.0}) {
        const double yv = y0 + f * (y1 - y0);
        const double xv = x0 + f * (x1 - x0);
        out += "<text x=\"" + num(kMargin - 4) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\" " + font +
               ">" + num(yv) + "</text>\n";
        out += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(kHeight - kMargin + 14) + "\" text-anchor=\"middle\" " +
               font + ">" + num(xv) + "</text>\n";
    }
    out += "<polyline fill=\"none\" stroke=\"blue\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& [x, y] : points) {
        if (!std::isfinite(y)) continue;
        if (!first) out += ' ';
        out += num(px(x)) + "," + num(py(y));
        first = false;
    }
    out += "\"/>\n</svg>\n";
    return out;
}

std::vector<fs::path> emit_plots(const fs::path& run_dir) {
    const fs::path metrics_path = run_dir / "metrics.csv";
    if (!fs::exists(metrics_path)) throw IoError("plots: missing '" + metrics_path.string() + "'");
    const std::vector<MetricRecord> metrics = read_metrics_csv(metrics_path);
    if (metrics.empty()) throw IoError("plots: '" + metrics_path.string() + "' has no rows");

    double steps_per_epoch = 0.0;
    if (std::ifstream cfg(run_dir / "config.json"); cfg) {
        try {
            const auto j = nlohmann::json::parse(cfg);
            steps_per_epoch = j.at("ensemble").at("steps_per_epoch").get<double>();
        } catch (const std::exception&) {
            steps_per_epoch = 0.0;
        }
    }

    // Render everything in memory first so a missing input leaves no SVGs behind.
    std::vector<std::pair<fs::path, std::string>> files;
    const Matrix real = read_points(run_dir / "real.csv");
    for (const auto& m : metrics) {
        const Matrix gen = read_points(run_dir / "samples" / ("step_" + step_tag(m.step) + ".csv"));
        files.emplace_back("scatter_step_" + step_tag(m.step) + ".svg",
                           scatter_svg(real, gen, m.run_id + " step " + std::to_string(m.step)));
    }
    const auto epoch_of = [&](const MetricRecord& m) {
        return steps_per_epoch > 0 ? static_cast<double>(m.step) / steps_per_epoch : static_cast<double>(m.epoch);
    };
    const auto curve = [&](const char* name, double MetricRecord::*field) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& m : metrics) pts.emplace_back(epoch_of(m), m.*field);
        files.emplace_back(std::string(name) + ".svg", line_chart_svg(pts, metrics.front().run_id + " " + name,
                                                                      "epoch", name));
    };
    curve("wasserstein", &MetricRecord::wasserstein);
    curve("symmetric_kl", &MetricRecord::symmetric_kl);
    curve("frechet_2d", &MetricRecord::frechet_2d);
    curve("g_grad_norm", &MetricRecord::g_grad_norm);

    const fs::path out_dir = run_dir / "plots";
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("plots: cannot create '" + out_dir.string() + "'");
    std::vector<fs::path> written;
    for (const auto& [name, body] : files) {
        std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
        out << body;
        if (!out) throw IoError("plots: failed writing '" + (out_dir / name).string() + "'");
        written.push_back(out_dir / name);
    }
    return written;
}

}  // namespace dropgan
