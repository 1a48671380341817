#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "cascade/report.hpp"

namespace cascade {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 24.0;
constexpr double kTop = 44.0;
constexpr double kBottom = 84.0;

constexpr const char* kColors[3] = {"#4c72b0", "#dd8452", "#55a868"};
constexpr const char* kSourceLabels[3] = {"Private", "Human", "AI"};

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

std::string task_label(TaskId t) {
    std::string s(to_string(t));
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

}  // namespace

std::string plot_weights(const std::map<TaskId, EffectiveWeights>& weights, const std::string& title) {
    double hi = 1.25;
    double lo = 0.0;
    for (const auto& [task, w] : weights)
        for (int s = 0; s < 3; ++s) {
            hi = std::max(hi, w.weight[s] + w.se[s]);
            lo = std::min(lo, w.weight[s] - w.se[s]);
        }
    const double step = hi - lo > 3.0 ? 0.5 : 0.25;
    hi = std::ceil(hi * 1.05 / step) * step;
    lo = std::floor(lo / step) * step;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto y_of = [&](double v) { return kTop + (hi - v) / (hi - lo) * plot_h; };

    std::ostringstream os;
    os << fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" viewBox=\"0 0 {0:.0f} {1:.0f}\" "
        "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n",
        kWidth, kHeight);
    os << fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#ffffff\"/>\n", kWidth, kHeight);
    const std::string heading = title.empty() ? "Weights to different information sources" : title;
    os << fmt::format("<text x=\"{:.2f}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", kWidth / 2,
                      escape(heading));

    // Axis, grid and tick labels.
    for (double v = lo; v <= hi + 1e-9; v += step) {
        const double y = y_of(v);
        os << fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#e5e5e5\"/>\n", kLeft, y,
                          kLeft + plot_w, y);
        os << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n", kLeft - 6, y + 4, v);
    }
    os << fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#333333\"/>\n", kLeft,
                      kTop, kTop + plot_h);
    os << fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#333333\"/>\n", kLeft,
                      y_of(0.0), kLeft + plot_w, y_of(0.0));
    os << fmt::format(
        "<text x=\"16\" y=\"{:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2f})\">Weight</text>\n",
        kTop + plot_h / 2, kTop + plot_h / 2);

    const double group_w = plot_w / 3.0;
    const double bar_w = group_w * 0.22;
    std::vector<std::string> missing;
    for (int g = 0; g < 3; ++g) {
        const TaskId task = kAllTasks[g];
        const double gx = kLeft + g * group_w;
        const double center = gx + group_w / 2;
        os << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", center,
                          kTop + plot_h + 18, task_label(task));
        auto it = weights.find(task);
        if (it == weights.end()) {
            missing.push_back(std::string(to_string(task)));
            os << fmt::format(
                "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" fill=\"#888888\">no data</text>\n", center,
                kTop + plot_h / 2);
            continue;
        }
        const auto& w = it->second;
        for (int s = 0; s < 3; ++s) {
            const double x = center + (s - 1.5) * bar_w;
            const double y0 = y_of(0.0);
            const double y1 = y_of(w.weight[s]);
            os << fmt::format(
                "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\">"
                "<title>{} {}: {:.3f} (se {:.3f})</title></rect>\n",
                x, std::min(y0, y1), bar_w, std::abs(y0 - y1), kColors[s], task_label(task), kSourceLabels[s],
                w.weight[s], w.se[s]);
            if (w.se[s] > 0.0) {
                const double cx = x + bar_w / 2;
                const double top = y_of(w.weight[s] + w.se[s]);
                const double bottom = y_of(w.weight[s] - w.se[s]);
                os << fmt::format(
                    "<path d=\"M{0:.2f} {1:.2f}V{2:.2f}M{3:.2f} {1:.2f}H{4:.2f}M{3:.2f} {2:.2f}H{4:.2f}\" "
                    "stroke=\"#222222\" fill=\"none\"/>\n",
                    cx, top, bottom, cx - bar_w / 4, cx + bar_w / 4);
            }
        }
    }

    // Rational benchmark.
    os << fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#c44e52\" stroke-dasharray=\"6 4\"/>\n",
        kLeft, y_of(1.0), kLeft + plot_w, y_of(1.0));

    const double ly = kHeight - 30;
    double lx = kLeft;
    for (int s = 0; s < 3; ++s) {
        os << fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", lx, ly - 10,
                          kColors[s]);
        os << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", lx + 16, ly, kSourceLabels[s]);
        lx += 84;
    }
    os << fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#c44e52\" stroke-dasharray=\"6 4\"/>\n",
        lx, ly - 4, lx + 24);
    os << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">Bayesian weight = 1</text>\n", lx + 30, ly);
    if (!missing.empty()) {
        std::string note = "Not estimated: ";
        for (std::size_t i = 0; i < missing.size(); ++i) note += (i ? ", " : "") + missing[i];
        os << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" fill=\"#888888\">{}</text>\n", kLeft, ly + 18,
                          escape(note));
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace cascade
