#pragma once

// Minimal hand-emitted SVG line and scatter charts; no plotting dependency.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ppgfm/errors.hpp"

namespace ppgfm {
namespace svg {

namespace detail {

struct Frame {
    double width = 640, height = 440;
    double left = 70, right = 20, top = 40, bottom = 50;
    double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;

    double px(double x) const {
        return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right);
    }
    double py(double y) const {
        return height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom);
    }
};

inline Frame fit_frame(const std::vector<double>& xs, const std::vector<double>& ys) {
    Frame f;
    f.x_lo = *std::min_element(xs.begin(), xs.end());
    f.x_hi = *std::max_element(xs.begin(), xs.end());
    f.y_lo = *std::min_element(ys.begin(), ys.end());
    f.y_hi = *std::max_element(ys.begin(), ys.end());
    const double x_pad = (f.x_hi - f.x_lo) > 0 ? 0.05 * (f.x_hi - f.x_lo) : 0.5;
    const double y_pad = (f.y_hi - f.y_lo) > 0 ? 0.08 * (f.y_hi - f.y_lo) : 0.5;
    f.x_lo -= x_pad;
    f.x_hi += x_pad;
    f.y_lo -= y_pad;
    f.y_hi += y_pad;
    return f;
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

inline void open_chart(std::ostringstream& out, const Frame& f, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::string& comment) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
        << f.height << "\" viewBox=\"0 0 " << f.width << " " << f.height << "\">\n";
    if (!comment.empty()) out << "<!-- " << comment << " -->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << f.width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";
    // axes
    out << "<line x1=\"" << f.left << "\" y1=\"" << f.height - f.bottom << "\" x2=\""
        << f.width - f.right << "\" y2=\"" << f.height - f.bottom
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\""
        << f.height - f.bottom << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    // min/max tick labels
    out << "<text x=\"" << f.px(f.x_lo) << "\" y=\"" << f.height - f.bottom + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(f.x_lo) << "</text>\n";
    out << "<text x=\"" << f.px(f.x_hi) << "\" y=\"" << f.height - f.bottom + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(f.x_hi) << "</text>\n";
    out << "<text x=\"" << f.left - 8 << "\" y=\"" << f.py(f.y_lo)
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(f.y_lo) << "</text>\n";
    out << "<text x=\"" << f.left - 8 << "\" y=\"" << f.py(f.y_hi)
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(f.y_hi) << "</text>\n";
    out << "<text x=\"" << (f.left + f.width - f.right) / 2 << "\" y=\"" << f.height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
    out << "<text x=\"16\" y=\"" << (f.top + f.height - f.bottom) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << (f.top + f.height - f.bottom) / 2 << ")\">" << ylabel << "</text>\n";
}

}  // namespace detail

inline std::string line_chart(const std::vector<double>& xs, const std::vector<double>& ys,
                              const std::string& title, const std::string& xlabel,
                              const std::string& ylabel, const std::string& comment = "") {
    if (xs.size() != ys.size() || xs.empty()) throw InvalidInput("line_chart: bad data");
    const detail::Frame f = detail::fit_frame(xs, ys);
    std::ostringstream out;
    detail::open_chart(out, f, title, xlabel, ylabel, comment);
    out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out << detail::fmt(f.px(xs[i])) << "," << detail::fmt(f.py(ys[i]));
        if (i + 1 < xs.size()) out << " ";
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out << "<circle cx=\"" << detail::fmt(f.px(xs[i])) << "\" cy=\"" << detail::fmt(f.py(ys[i]))
            << "\" r=\"3\" fill=\"#1f6fb2\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

inline std::string scatter_chart(const std::vector<double>& xs, const std::vector<double>& ys,
                                 const std::string& title, const std::string& xlabel,
                                 const std::string& ylabel, const std::string& comment = "") {
    if (xs.size() != ys.size() || xs.empty()) throw InvalidInput("scatter_chart: bad data");
    const detail::Frame f = detail::fit_frame(xs, ys);
    std::ostringstream out;
    detail::open_chart(out, f, title, xlabel, ylabel, comment);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out << "<circle cx=\"" << detail::fmt(f.px(xs[i])) << "\" cy=\"" << detail::fmt(f.py(ys[i]))
            << "\" r=\"4\" fill=\"#b2341f\" fill-opacity=\"0.8\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

// Several named series on one frame (used for reconstruction overlays).
inline std::string multi_line_chart(const std::vector<double>& xs,
                                    const std::vector<std::pair<std::string, std::vector<double>>>& series,
                                    const std::string& title, const std::string& xlabel,
                                    const std::string& ylabel, const std::string& comment = "") {
    if (series.empty() || xs.empty()) throw InvalidInput("multi_line_chart: bad data");
    std::vector<double> all_ys;
    for (const auto& [name, ys] : series) {
        if (ys.size() != xs.size()) throw InvalidInput("multi_line_chart: ragged series");
        all_ys.insert(all_ys.end(), ys.begin(), ys.end());
    }
    const detail::Frame f = detail::fit_frame(xs, all_ys);
    static const char* kColors[] = {"#1f6fb2", "#b2341f", "#3a9e4e", "#8a56b5"};
    std::ostringstream out;
    detail::open_chart(out, f, title, xlabel, ylabel, comment);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % 4];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            out << detail::fmt(f.px(xs[i])) << "," << detail::fmt(f.py(series[s].second[i]));
            if (i + 1 < xs.size()) out << " ";
        }
        out << "\"/>\n";
        out << "<text x=\"" << f.width - f.right - 150 << "\" y=\"" << f.top + 16 * (s + 1)
            << "\" font-size=\"12\" fill=\"" << color << "\">" << series[s].first << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace svg
}  // namespace ppgfm
