#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mobfc/csv.hpp"

namespace mobfc::svg {

enum class ChartKind { bar, line, scatter, heatmap };

inline const char* to_string(ChartKind k) {
    switch (k) {
        case ChartKind::bar: return "bar";
        case ChartKind::line: return "line";
        case ChartKind::scatter: return "scatter";
        case ChartKind::heatmap: return "heatmap";
    }
    return "?";
}

// Bar:     categories + one y value per category in every series.
// Line:    x and y per series (equal lengths within a series).
// Scatter: x, y and a group index per point; group picks the palette colour.
// Heatmap: categories label both axes of a square matrix; empty cells render grey.
struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::size_t> group;
    std::string dash;  // stroke-dasharray for line series
};

struct ChartSpec {
    ChartKind kind = ChartKind::bar;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> categories;
    std::vector<Series> series;
    std::vector<std::vector<std::optional<double>>> matrix;
    int width = 720;
    int height = 440;
};

// 20 colours, distinct enough for a 15-cluster scatter.
inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors{
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
        "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39",
        "#7b4173", "#3182bd", "#e6550d", "#31a354", "#756bb1", "#636363"};
    return colors;
}

inline void validate(const ChartSpec& c) {
    switch (c.kind) {
        case ChartKind::bar:
            if (c.categories.empty() || c.series.empty()) throw std::invalid_argument("bar chart has no data");
            for (const auto& s : c.series)
                if (s.y.size() != c.categories.size())
                    throw std::invalid_argument("bar series '" + s.name + "' length differs from categories");
            break;
        case ChartKind::line:
        case ChartKind::scatter: {
            bool any = false;
            for (const auto& s : c.series) {
                if (s.x.size() != s.y.size())
                    throw std::invalid_argument("series '" + s.name + "' has mismatched x/y lengths");
                if (c.kind == ChartKind::scatter && !s.group.empty() && s.group.size() != s.x.size())
                    throw std::invalid_argument("series '" + s.name + "' has mismatched group length");
                any = any || !s.x.empty();
            }
            if (!any) throw std::invalid_argument(std::string(to_string(c.kind)) + " chart has no data");
            break;
        }
        case ChartKind::heatmap:
            if (c.matrix.empty()) throw std::invalid_argument("heatmap has no data");
            if (c.categories.size() != c.matrix.size())
                throw std::invalid_argument("heatmap labels do not match matrix size");
            for (const auto& row : c.matrix)
                if (row.size() != c.matrix.size()) throw std::invalid_argument("heatmap matrix is not square");
            break;
    }
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

inline std::string num(double v) {
    if (std::abs(v) < 0.005) v = 0.0;
    return csv::format_fixed(v, 2);
}

inline std::string label_num(double v) {
    std::string s = csv::format_fixed(v, 6);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s == "-0" ? "0" : s;
}

struct Scale {
    double lo = 0.0, hi = 1.0;
    double px_lo = 0.0, px_hi = 1.0;
    double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

// Tick positions on a 1/2/5 grid covering [lo, hi].
inline std::vector<double> nice_ticks(double& lo, double& hi, int target = 5) {
    if (!(hi > lo)) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        lo -= pad;
        hi += pad;
    }
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    lo = std::floor(lo / step) * step;
    hi = std::ceil(hi / step) * step;
    std::vector<double> ticks;
    for (int i = 0; lo + i * step <= hi + step * 1e-9; ++i) ticks.push_back(lo + i * step);
    return ticks;
}

class Writer {
public:
    explicit Writer(const ChartSpec& c) : c_(c) {
        left_ = 70;
        right_ = c.width - (c.series.size() > 1 || c.kind == ChartKind::heatmap ? 150 : 20);
        top_ = 40;
        bottom_ = c.height - 60;
    }

    std::string render() {
        out_ << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << c_.width << R"(" height=")"
             << c_.height << R"(" viewBox="0 0 )" << c_.width << ' ' << c_.height << R"(" data-kind=")"
             << to_string(c_.kind) << "\">\n";
        out_ << R"(<rect class="background" x="0" y="0" width=")" << c_.width << R"(" height=")" << c_.height
             << R"(" fill="#ffffff"/>)" << '\n';
        out_ << R"(<text class="title" x=")" << c_.width / 2 << R"(" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">)"
             << xml_escape(c_.title) << "</text>\n";
        switch (c_.kind) {
            case ChartKind::bar: bar(); break;
            case ChartKind::line: xy(false); break;
            case ChartKind::scatter: xy(true); break;
            case ChartKind::heatmap: heatmap(); break;
        }
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    void axis_labels() {
        out_ << R"(<text class="x-label" x=")" << num((left_ + right_) / 2.0) << R"(" y=")" << c_.height - 14
             << R"(" text-anchor="middle" font-family="sans-serif" font-size="12">)" << xml_escape(c_.x_label)
             << "</text>\n";
        out_ << R"(<text class="y-label" x="16" y=")" << num((top_ + bottom_) / 2.0)
             << R"(" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 )"
             << num((top_ + bottom_) / 2.0) << ")\">" << xml_escape(c_.y_label) << "</text>\n";
    }

    void y_axis(const Scale& ys, const std::vector<double>& ticks) {
        out_ << R"(<g class="y-axis" font-family="sans-serif" font-size="10">)" << '\n';
        for (double t : ticks) {
            const std::string y = num(ys(t));
            out_ << R"(<line x1=")" << left_ << R"(" x2=")" << right_ << R"(" y1=")" << y << R"(" y2=")" << y
                 << R"(" stroke="#e0e0e0"/>)" << R"(<text x=")" << left_ - 6 << R"(" y=")" << y
                 << R"(" text-anchor="end" dominant-baseline="middle">)" << label_num(t) << "</text>\n";
        }
        out_ << "</g>\n";
    }

    void legend() {
        if (c_.series.size() < 2) return;
        out_ << R"(<g class="legend" font-family="sans-serif" font-size="11">)" << '\n';
        for (std::size_t i = 0; i < c_.series.size(); ++i) {
            const int y = top_ + 10 + static_cast<int>(i) * 18;
            out_ << R"(<rect x=")" << right_ + 12 << R"(" y=")" << y - 8 << R"(" width="10" height="10" fill=")"
                 << color(i) << R"("/>)" << R"(<text x=")" << right_ + 28 << R"(" y=")" << y
                 << R"(" dominant-baseline="middle">)" << xml_escape(c_.series[i].name) << "</text>\n";
        }
        out_ << "</g>\n";
    }

    static const std::string& color(std::size_t i) { return palette()[i % palette().size()]; }

    void bar() {
        double lo = 0.0, hi = 0.0;
        for (const auto& s : c_.series)
            for (double v : s.y) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        auto ticks = nice_ticks(lo, hi);
        const Scale ys{lo, hi, static_cast<double>(bottom_), static_cast<double>(top_)};
        y_axis(ys, ticks);
        const double band = static_cast<double>(right_ - left_) / static_cast<double>(c_.categories.size());
        const double inner = band * 0.8 / static_cast<double>(c_.series.size());
        out_ << R"(<g class="plot-area">)" << '\n';
        for (std::size_t i = 0; i < c_.categories.size(); ++i) {
            for (std::size_t s = 0; s < c_.series.size(); ++s) {
                const double v = c_.series[s].y[i];
                const bool defined = std::isfinite(v);
                const double x = left_ + band * static_cast<double>(i) + band * 0.1 + inner * static_cast<double>(s);
                // undefined values draw as an empty bar with an empty data-value
                const double y0 = ys(defined ? std::max(0.0, std::min(v, hi)) : 0.0);
                const double y1 = ys(defined ? std::min(0.0, std::max(v, lo)) : 0.0);
                out_ << R"(<rect x=")" << num(x) << R"(" y=")" << num(y0) << R"(" width=")" << num(inner)
                     << R"(" height=")" << num(y1 - y0) << R"(" fill=")" << color(s) << R"(" data-series=")"
                     << xml_escape(c_.series[s].name) << R"(" data-category=")" << xml_escape(c_.categories[i])
                     << R"(" data-value=")" << (defined ? csv::format_double(v) : std::string{}) << R"("/>)" << '\n';
            }
        }
        out_ << "</g>\n";
        out_ << R"(<g class="x-axis" font-family="sans-serif" font-size="10">)" << '\n';
        out_ << R"(<line x1=")" << left_ << R"(" x2=")" << right_ << R"(" y1=")" << num(ys(0.0)) << R"(" y2=")"
             << num(ys(0.0)) << R"(" stroke="#333333"/>)" << '\n';
        const std::size_t every = c_.categories.size() > 24 ? (c_.categories.size() + 23) / 24 : 1;
        for (std::size_t i = 0; i < c_.categories.size(); i += every)
            out_ << R"(<text x=")" << num(left_ + band * (static_cast<double>(i) + 0.5)) << R"(" y=")" << bottom_ + 14
                 << R"(" text-anchor="middle">)" << xml_escape(c_.categories[i]) << "</text>\n";
        out_ << "</g>\n";
        axis_labels();
        legend();
    }

    void xy(bool scatter) {
        double xlo = HUGE_VAL, xhi = -HUGE_VAL, ylo = HUGE_VAL, yhi = -HUGE_VAL;
        for (const auto& s : c_.series) {
            for (double v : s.x) {
                xlo = std::min(xlo, v);
                xhi = std::max(xhi, v);
            }
            for (double v : s.y) {
                ylo = std::min(ylo, v);
                yhi = std::max(yhi, v);
            }
        }
        auto xt = nice_ticks(xlo, xhi);
        auto yt = nice_ticks(ylo, yhi);
        const Scale xs{xlo, xhi, static_cast<double>(left_), static_cast<double>(right_)};
        const Scale ys{ylo, yhi, static_cast<double>(bottom_), static_cast<double>(top_)};
        y_axis(ys, yt);
        out_ << R"(<g class="x-axis" font-family="sans-serif" font-size="10">)" << '\n';
        for (double t : xt)
            out_ << R"(<text x=")" << num(xs(t)) << R"(" y=")" << bottom_ + 14 << R"(" text-anchor="middle">)"
                 << label_num(t) << "</text>\n";
        out_ << "</g>\n";
        out_ << R"(<g class="plot-area">)" << '\n';
        for (std::size_t si = 0; si < c_.series.size(); ++si) {
            const auto& s = c_.series[si];
            if (scatter) {
                for (std::size_t i = 0; i < s.x.size(); ++i) {
                    const std::size_t g = s.group.empty() ? si : s.group[i];
                    out_ << R"(<circle cx=")" << num(xs(s.x[i])) << R"(" cy=")" << num(ys(s.y[i]))
                         << R"(" r="1.8" fill=")" << color(g) << R"(" data-group=")" << g << R"("/>)" << '\n';
                }
                continue;
            }
            std::string xs_attr, ys_attr, pts;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (i) {
                    xs_attr += ' ';
                    ys_attr += ' ';
                    pts += ' ';
                }
                xs_attr += csv::format_double(s.x[i]);
                ys_attr += csv::format_double(s.y[i]);
                pts += num(xs(s.x[i])) + ',' + num(ys(s.y[i]));
            }
            out_ << R"(<polyline fill="none" stroke=")" << color(si) << R"(" stroke-width="1.6")";
            if (!s.dash.empty()) out_ << R"( stroke-dasharray=")" << s.dash << '"';
            out_ << R"( points=")" << pts << R"(" data-series=")" << xml_escape(s.name) << R"(" data-x=")" << xs_attr
                 << R"(" data-y=")" << ys_attr << R"("/>)" << '\n';
        }
        out_ << "</g>\n";
        axis_labels();
        if (!scatter) legend();
    }

    void heatmap() {
        const std::size_t n = c_.matrix.size();
        const double size = std::min(right_ - left_, bottom_ - top_) / static_cast<double>(n);
        const double x0 = left_ + 40;
        out_ << R"(<g class="plot-area">)" << '\n';
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const auto& v = c_.matrix[i][j];
                std::string fill = "#bdbdbd";
                if (v) {
                    // Diverging blue-white-red for values in [-1, 1].
                    const double t = std::clamp(*v, -1.0, 1.0);
                    const int a = static_cast<int>(std::lround(255 * (1 - std::abs(t))));
                    char buf[8];
                    if (t >= 0)
                        std::snprintf(buf, sizeof buf, "#ff%02x%02x", a, a);
                    else
                        std::snprintf(buf, sizeof buf, "#%02x%02xff", a, a);
                    fill = buf;
                }
                const double x = x0 + size * static_cast<double>(j);
                const double y = top_ + size * static_cast<double>(i);
                out_ << R"(<rect x=")" << num(x) << R"(" y=")" << num(y) << R"(" width=")" << num(size)
                     << R"(" height=")" << num(size) << R"(" fill=")" << fill << R"(" data-row=")"
                     << xml_escape(c_.categories[i]) << R"(" data-col=")" << xml_escape(c_.categories[j])
                     << R"(" data-value=")" << (v ? csv::format_double(*v) : std::string{}) << R"("/>)" << '\n';
            }
        }
        out_ << "</g>\n";
        out_ << R"(<g class="cell-labels" font-family="sans-serif" font-size="11" text-anchor="middle">)" << '\n';
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out_ << R"(<text x=")" << num(x0 + size * (static_cast<double>(j) + 0.5)) << R"(" y=")"
                     << num(top_ + size * (static_cast<double>(i) + 0.5)) << R"(" dominant-baseline="middle">)"
                     << (c_.matrix[i][j] ? csv::format_fixed(*c_.matrix[i][j], 2) : std::string("n/a")) << "</text>\n";
        out_ << "</g>\n";
        out_ << R"(<g class="axis-labels" font-family="sans-serif" font-size="10">)" << '\n';
        for (std::size_t i = 0; i < n; ++i) {
            out_ << R"(<text x=")" << num(x0 - 4) << R"(" y=")" << num(top_ + size * (static_cast<double>(i) + 0.5))
                 << R"(" text-anchor="end" dominant-baseline="middle">)" << xml_escape(c_.categories[i]) << "</text>\n";
            out_ << R"(<text x=")" << num(x0 + size * (static_cast<double>(i) + 0.5)) << R"(" y=")"
                 << num(top_ + size * static_cast<double>(n) + 14) << R"(" text-anchor="middle">)"
                 << xml_escape(c_.categories[i]) << "</text>\n";
        }
        out_ << "</g>\n";
    }

    const ChartSpec& c_;
    std::ostringstream out_;
    int left_, right_, top_, bottom_;
};

}  // namespace detail

// Standalone SVG document. Output depends only on the chart contents.
inline std::string render_svg(const ChartSpec& chart) {
    validate(chart);
    return detail::Writer(chart).render();
}

}  // namespace mobfc::svg
