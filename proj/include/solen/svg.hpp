#pragma once

// Minimal self-contained SVG line plots: axes with tick labels, any number of
// series, optional shaded bands (mean +- sigma). Output is deterministic --
// no timestamps, ids or external assets -- so repeated runs are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "solen/error.hpp"

namespace solen::svg {

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
};

struct Series {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<PlotPoint> points;
    std::vector<double> band_low;   // optional, same length as points
    std::vector<double> band_high;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 720;
    int height = 460;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

/// Largest 1/2/5 * 10^k step giving at most `max_ticks` intervals.
inline double nice_step(double span, int max_ticks) {
    const double raw = span / max_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (const double m : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * m >= raw) return mag * m;
    }
    return mag * 10.0;
}

} // namespace detail

inline std::string render(const LinePlot& plot) {
    if (plot.series.empty()) throw ValidationError("svg: plot has no series");

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : plot.series) {
        if (s.points.empty()) throw ValidationError("svg: series '" + s.label + "' is empty");
        if (!s.band_low.empty() &&
            (s.band_low.size() != s.points.size() || s.band_high.size() != s.points.size()))
            throw ValidationError("svg: band size mismatch in series '" + s.label + "'");
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            x_min = std::min(x_min, s.points[i].x);
            x_max = std::max(x_max, s.points[i].x);
            double lo = s.points[i].y, hi = s.points[i].y;
            if (!s.band_low.empty()) {
                lo = std::min(lo, s.band_low[i]);
                hi = std::max(hi, s.band_high[i]);
            }
            y_min = std::min(y_min, lo);
            y_max = std::max(y_max, hi);
        }
    }
    if (x_max == x_min) { x_max += 1.0; x_min -= 1.0; }
    if (y_max == y_min) { y_max += 1.0; y_min -= 1.0; }
    const double x_pad = 0.04 * (x_max - x_min);
    const double y_pad = 0.08 * (y_max - y_min);
    x_min -= x_pad; x_max += x_pad;
    y_min -= y_pad; y_max += y_pad;

    const double ml = 64, mr = 16, mt = plot.title.empty() ? 16 : 34, mb = 46;
    const double pw = plot.width - ml - mr;
    const double ph = plot.height - mt - mb;
    const auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
    const auto py = [&](double y) { return mt + ph - (y - y_min) / (y_max - y_min) * ph; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(plot.width) +
           "\" height=\"" + std::to_string(plot.height) + "\" viewBox=\"0 0 " +
           std::to_string(plot.width) + " " + std::to_string(plot.height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!plot.title.empty())
        out += "<text x=\"" + detail::num(ml + pw / 2) +
               "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
               plot.title + "</text>\n";

    // axes frame and ticks
    out += "<rect x=\"" + detail::num(ml) + "\" y=\"" + detail::num(mt) + "\" width=\"" +
           detail::num(pw) + "\" height=\"" + detail::num(ph) +
           "\" fill=\"none\" stroke=\"#333333\"/>\n";
    const double xs = detail::nice_step(x_max - x_min, 8);
    for (double x = std::ceil(x_min / xs) * xs; x <= x_max + 1e-12 * xs; x += xs) {
        out += "<line x1=\"" + detail::num(px(x)) + "\" y1=\"" + detail::num(mt + ph) +
               "\" x2=\"" + detail::num(px(x)) + "\" y2=\"" + detail::num(mt + ph + 5) +
               "\" stroke=\"#333333\"/>\n";
        out += "<text x=\"" + detail::num(px(x)) + "\" y=\"" + detail::num(mt + ph + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::num(x == 0.0 ? 0.0 : x) + "</text>\n";
    }
    const double ys = detail::nice_step(y_max - y_min, 7);
    for (double y = std::ceil(y_min / ys) * ys; y <= y_max + 1e-12 * ys; y += ys) {
        out += "<line x1=\"" + detail::num(ml - 5) + "\" y1=\"" + detail::num(py(y)) +
               "\" x2=\"" + detail::num(ml) + "\" y2=\"" + detail::num(py(y)) +
               "\" stroke=\"#333333\"/>\n";
        out += "<text x=\"" + detail::num(ml - 8) + "\" y=\"" + detail::num(py(y) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::num(y == 0.0 ? 0.0 : y) + "</text>\n";
    }
    if (!plot.x_label.empty())
        out += "<text x=\"" + detail::num(ml + pw / 2) + "\" y=\"" +
               detail::num(plot.height - 8.0) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
               plot.x_label + "</text>\n";
    if (!plot.y_label.empty())
        out += "<text x=\"14\" y=\"" + detail::num(mt + ph / 2) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 " +
               detail::num(mt + ph / 2) + ")\">" + plot.y_label + "</text>\n";

    // shaded bands under the curves
    for (const auto& s : plot.series) {
        if (s.band_low.empty()) continue;
        std::string pts;
        for (std::size_t i = 0; i < s.points.size(); ++i)
            pts += detail::num(px(s.points[i].x)) + "," + detail::num(py(s.band_high[i])) + " ";
        for (std::size_t i = s.points.size(); i-- > 0;)
            pts += detail::num(px(s.points[i].x)) + "," + detail::num(py(s.band_low[i])) + " ";
        out += "<polygon points=\"" + pts + "\" fill=\"" + s.color +
               "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    for (const auto& s : plot.series) {
        std::string pts;
        for (const auto& p : s.points)
            pts += detail::num(px(p.x)) + "," + detail::num(py(p.y)) + " ";
        out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color +
               "\" stroke-width=\"1.6\"/>\n";
    }

    // legend, top-right corner of the frame
    double ly = mt + 16;
    for (const auto& s : plot.series) {
        out += "<line x1=\"" + detail::num(ml + pw - 120) + "\" y1=\"" + detail::num(ly - 4) +
               "\" x2=\"" + detail::num(ml + pw - 96) + "\" y2=\"" + detail::num(ly - 4) +
               "\" stroke=\"" + s.color + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + detail::num(ml + pw - 90) + "\" y=\"" + detail::num(ly) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + s.label + "</text>\n";
        ly += 16;
    }
    out += "</svg>\n";
    return out;
}

} // namespace solen::svg
