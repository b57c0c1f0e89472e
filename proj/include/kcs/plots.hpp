#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kcs/diagnostics.hpp"
#include "kcs/error.hpp"
#include "kcs/experiments.hpp"
#include "kcs/phase_grid.hpp"

namespace kcs {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<PlotSeries> series;
    std::string annotation;  ///< free text drawn in the upper left corner
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace detail

/// Self-contained SVG line chart. Non-positive values are dropped on log axes.
inline std::string render_line_chart(const LineChart& c) {
    constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 55;
    auto tx = [&](double v) { return c.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return c.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!c.log_x || x > 0.0) && (!c.log_y || y > 0.0);
    };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : c.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (usable(s.x[i], s.y[i])) {
                x0 = std::min(x0, tx(s.x[i]));
                x1 = std::max(x1, tx(s.x[i]));
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(W) + "\" height=\"" +
                      detail::num(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           detail::svg_escape(c.title) + "</text>\n";
    svg += "<rect x=\"" + detail::num(L) + "\" y=\"" + detail::num(T) + "\" width=\"" + detail::num(W - L - R) +
           "\" height=\"" + detail::num(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0;
        const double fy = y0 + (y1 - y0) * i / 4.0;
        const double sx = L + (W - L - R) * i / 4.0;
        const double sy = H - B - (H - T - B) * i / 4.0;
        svg += "<text x=\"" + detail::num(sx) + "\" y=\"" + detail::num(H - B + 16) + "\" text-anchor=\"middle\">" +
               detail::num(c.log_x ? std::pow(10.0, fx) : fx) + "</text>\n";
        svg += "<text x=\"" + detail::num(L - 6) + "\" y=\"" + detail::num(sy + 4) + "\" text-anchor=\"end\">" +
               detail::num(c.log_y ? std::pow(10.0, fy) : fy) + "</text>\n";
    }
    svg += "<text x=\"" + detail::num(W / 2) + "\" y=\"" + detail::num(H - 14) + "\" text-anchor=\"middle\">" +
           detail::svg_escape(c.x_label + (c.log_x ? " (log)" : "")) + "</text>\n";
    svg += "<text transform=\"translate(16," + detail::num(H / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           detail::svg_escape(c.y_label + (c.log_y ? " (log)" : "")) + "</text>\n";
    for (std::size_t si = 0; si < c.series.size(); ++si) {
        const auto& s = c.series[si];
        const char* color = detail::kPalette[si % 6];
        std::string pts;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (usable(s.x[i], s.y[i])) pts += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i])) + " ";
        svg += "<polyline class=\"series\" data-name=\"" + detail::svg_escape(s.name) + "\" fill=\"none\" stroke=\"" +
               color + "\" stroke-width=\"1.6\"" + (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + pts +
               "\"/>\n";
        const double ly = T + 16 + 16.0 * static_cast<double>(si);
        svg += "<line x1=\"" + detail::num(W - R - 150) + "\" y1=\"" + detail::num(ly - 4) + "\" x2=\"" +
               detail::num(W - R - 130) + "\" y2=\"" + detail::num(ly - 4) + "\" stroke=\"" + color + "\"" +
               (s.dashed ? " stroke-dasharray=\"4,3\"" : "") + "/>\n";
        svg += "<text x=\"" + detail::num(W - R - 125) + "\" y=\"" + detail::num(ly) + "\">" + detail::svg_escape(s.name) +
               "</text>\n";
    }
    if (!c.annotation.empty())
        svg += "<text class=\"annotation\" x=\"" + detail::num(L + 8) + "\" y=\"" + detail::num(T + 16) + "\">" +
               detail::svg_escape(c.annotation) + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

/// Phase-space density as a grey-to-blue raster, x horizontal, v vertical.
inline std::string render_heatmap(const PhaseGrid& f, const std::string& title) {
    const auto& g = f.geom;
    constexpr double W = 520, H = 440, L = 60, T = 36, B = 44, R = 20;
    const double cw = (W - L - R) / static_cast<double>(g.nx);
    const double ch = (H - T - B) / static_cast<double>(g.nv);
    const double fmax = std::max(f.max_value(), std::numeric_limits<double>::min());
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(W) + "\" height=\"" +
                      detail::num(H) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           detail::svg_escape(title) + "</text>\n<g shape-rendering=\"crispEdges\">\n";
    for (std::size_t j = 0; j < g.nx; ++j)
        for (std::size_t k = 0; k < g.nv; ++k) {
            const double s = std::clamp(f(j, k) / fmax, 0.0, 1.0);
            if (s <= 0.0) continue;
            const int r = static_cast<int>(255 * (1.0 - s));
            const int gg = static_cast<int>(255 * (1.0 - 0.7 * s));
            char color[16];
            std::snprintf(color, sizeof color, "#%02x%02xff", r, gg);
            svg += "<rect x=\"" + detail::num(L + cw * static_cast<double>(j)) + "\" y=\"" +
                   detail::num(H - B - ch * static_cast<double>(k + 1)) + "\" width=\"" + detail::num(cw) +
                   "\" height=\"" + detail::num(ch) + "\" fill=\"" + color + "\"/>\n";
        }
    svg += "</g>\n<rect x=\"" + detail::num(L) + "\" y=\"" + detail::num(T) + "\" width=\"" + detail::num(W - L - R) +
           "\" height=\"" + detail::num(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::num(L) + "\" y=\"" + detail::num(H - B + 16) + "\">" + detail::num(-g.lx) + "</text>\n";
    svg += "<text x=\"" + detail::num(W - R) + "\" y=\"" + detail::num(H - B + 16) + "\" text-anchor=\"end\">" +
           detail::num(g.lx) + "</text>\n";
    svg += "<text x=\"" + detail::num(W / 2) + "\" y=\"" + detail::num(H - 12) + "\" text-anchor=\"middle\">x</text>\n";
    svg += "<text x=\"" + detail::num(L - 6) + "\" y=\"" + detail::num(H - B) + "\" text-anchor=\"end\">" +
           detail::num(-g.lv) + "</text>\n";
    svg += "<text x=\"" + detail::num(L - 6) + "\" y=\"" + detail::num(T + 10) + "\" text-anchor=\"end\">" +
           detail::num(g.lv) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + detail::num(H / 2) + "\">v</text>\n</svg>\n";
    return svg;
}

/// Everything a finished run can hand to emit_plots; absent parts produce no file.
struct RunOutputs {
    std::string label = "grid";
    std::optional<DiagnosticsSeries> series;
    double sigma = 0.0;
    std::size_t d = 1;
    double mass = 1.0;
    std::optional<double> support_r0;  ///< initial support radius, enables the bound plot at sigma = 0
    std::vector<PhaseGrid> heatmaps;   ///< phase-space snapshots
    std::vector<SigmaSweepResult> sweeps;
    std::vector<StabilityResult> stability;
};

namespace detail {

inline std::vector<double> column(const DiagnosticsSeries& s, double DiagnosticsRecord::*field) {
    std::vector<double> out;
    for (const auto& r : s.records()) out.push_back(r.*field);
    return out;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << text;
}

}  // namespace detail

/// Writes the SVG figures of a run as <prefix>_<name>.svg and returns their paths.
inline std::vector<std::string> emit_plots(const RunOutputs& o, const std::string& prefix) {
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& svg) {
        const std::string path = prefix + "_" + name + ".svg";
        detail::write_text(path, svg);
        written.push_back(path);
    };
    if (o.series && !o.series->empty()) {
        const auto& s = *o.series;
        const auto t = detail::column(s, &DiagnosticsRecord::t);
        const auto e = detail::column(s, &DiagnosticsRecord::energy);
        const auto cd = detail::column(s, &DiagnosticsRecord::cumulative_dissipation);
        const auto res = energy_ledger(s, o.sigma, o.d, o.mass);
        std::vector<double> budget(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) budget[i] = e[i] + cd[i] - cd.front();
        LineChart ledger{o.label + ": energy ledger", "t", "value", false, false,
                         {{"E(t)", t, e, false},
                          {"E(t) + int D", t, budget, false},
                          {"residual", t, res, true}},
                         ""};
        put("energy", render_line_chart(ledger));

        const auto r = detail::column(s, &DiagnosticsRecord::support_radius);
        LineChart support{o.label + ": velocity support radius", "t", "R(t)", false, false, {{"R(t)", t, r, false}}, ""};
        if (o.sigma == 0.0 && o.support_r0) {
            std::vector<double> bound;
            for (double ti : t) bound.push_back(*o.support_r0 + o.mass * *o.support_r0 * (ti - t.front()));
            support.series.push_back({"R0 + M R0 t", t, bound, true});
        }
        put("support", render_line_chart(support));

        LineChart norms{o.label + ": norm growth", "t", "norm", false, true, {}, ""};
        norms.series.push_back({"L1 (1+v^2)^1/2", t, detail::column(s, &DiagnosticsRecord::l1_v_weighted), false});
        const auto l2 = detail::column(s, &DiagnosticsRecord::l2_omega);
        if (std::any_of(l2.begin(), l2.end(), [](double v) { return std::isfinite(v); })) {
            norms.series.push_back({"L2(omega)", t, l2, false});
            norms.series.push_back({"X", t, detail::column(s, &DiagnosticsRecord::x_norm), false});
            norms.series.push_back({"W11", t, detail::column(s, &DiagnosticsRecord::w11), false});
        }
        put("norms", render_line_chart(norms));
    }
    for (std::size_t i = 0; i < o.heatmaps.size(); ++i)
        put("phase_" + std::to_string(i), render_heatmap(o.heatmaps[i], o.label + ": f at t = " + detail::num(o.heatmaps[i].t)));
    for (std::size_t i = 0; i < o.sweeps.size(); ++i) {
        const auto& sw = o.sweeps[i];
        std::vector<double> sig, en, e1, eo;
        for (const auto& row : sw.rows) {
            sig.push_back(row.sigma);
            en.push_back(row.err_norm);
            e1.push_back(row.err_l1);
            eo.push_back(row.err_observable);
        }
        LineChart c{"vanishing noise: error against sigma", "sigma", "error", true, true,
                    {{"chosen norm", sig, en, false}, {"L1", sig, e1, false}, {"observable", sig, eo, false}},
                    "fitted slope " + detail::num(sw.norm_verdict.fit.slope) + " (norm), " +
                        detail::num(sw.observable_verdict.fit.slope) + " (observable)"};
        if (sig.size() >= 2) {
            std::vector<double> fit;
            for (double sv : sig) fit.push_back(std::exp(sw.norm_verdict.fit.intercept + sw.norm_verdict.fit.slope * std::log(sv)));
            c.series.push_back({"fit", sig, fit, true});
        }
        put("sweep_" + std::to_string(i), render_line_chart(c));
    }
    for (std::size_t i = 0; i < o.stability.size(); ++i) {
        std::vector<double> t, a, h;
        for (const auto& row : o.stability[i].rows) {
            t.push_back(row.t);
            a.push_back(row.amp_delta);
            h.push_back(row.amp_half);
        }
        LineChart c{"stability: amplification", "t", "A(t)", false, true,
                    {{"delta", t, a, false}, {"delta / 2", t, h, true}}, ""};
        put("stability_" + std::to_string(i), render_line_chart(c));
    }
    return written;
}

}  // namespace kcs
