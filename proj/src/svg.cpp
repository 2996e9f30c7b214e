#include "distq/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace distq::svg {

namespace {

const char* kPalette[] = {"#4C72B0", "#DD8452", "#55A868", "#C44E52", "#8172B3",
                          "#937860", "#DA8BC3", "#8C8C8C", "#CCB974", "#64B5CD"};

std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
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

std::string num(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

struct Scale {
    double lo = 0.0, hi = 1.0;
    double px0 = 0.0, px1 = 1.0;
    bool log = false;

    double operator()(double v) const {
        double t = log ? std::log10(v) : v;
        double l = log ? std::log10(lo) : lo;
        double h = log ? std::log10(hi) : hi;
        if (h == l) h = l + 1.0;
        return px0 + (t - l) / (h - l) * (px1 - px0);
    }
};

std::vector<double> ticks(double lo, double hi, bool log) {
    std::vector<double> out;
    if (log) {
        const int e0 = static_cast<int>(std::floor(std::log10(lo)));
        const int e1 = static_cast<int>(std::ceil(std::log10(hi)));
        for (int e = e0; e <= e1; ++e) out.push_back(std::pow(10.0, e));
        return out;
    }
    const double span = hi - lo;
    if (span <= 0.0) return {lo};
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (mag * m >= raw) {
            step = mag * m;
            break;
        }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step)
        out.push_back(v);
    return out;
}

} // namespace

std::string line_chart(const std::vector<Series>& series, const ChartOptions& opts) {
    const double ml = 64, mr = 16, mt = 34, mb = 46;
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = std::numeric_limits<double>::infinity(), y_hi = -y_lo;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            double y = s.ys[i];
            double e = i < s.err.size() ? s.err[i] : 0.0;
            if (!std::isfinite(y)) continue;
            x_lo = std::min(x_lo, s.xs[i]);
            x_hi = std::max(x_hi, s.xs[i]);
            if (opts.log_y) {
                if (y - e > 0.0) y_lo = std::min(y_lo, y - e);
                if (y > 0.0) y_lo = std::min(y_lo, y);
                y_hi = std::max(y_hi, y + e);
            } else {
                y_lo = std::min(y_lo, y - e);
                y_hi = std::max(y_hi, y + e);
            }
        }
    if (!std::isfinite(x_lo)) {
        x_lo = 0.0;
        x_hi = 1.0;
    }
    if (!std::isfinite(y_lo) || (opts.log_y && !(y_lo > 0.0))) y_lo = opts.log_y ? 1e-6 : 0.0;
    if (!std::isfinite(y_hi) || y_hi <= y_lo) y_hi = y_lo + 1.0;

    Scale sx{x_lo, x_hi, ml, opts.width - mr, false};
    Scale sy{y_lo, y_hi, static_cast<double>(opts.height - mb), mt, opts.log_y};

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width
        << "\" height=\"" << opts.height << "\" viewBox=\"0 0 " << opts.width << ' '
        << opts.height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opts.title.empty())
        out << "<text x=\"" << opts.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"14\">" << escape(opts.title)
            << "</text>\n";

    // axes and ticks
    out << "<g stroke=\"#444\" stroke-width=\"1\">"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << opts.height - mb << "\"/>"
        << "<line x1=\"" << ml << "\" y1=\"" << opts.height - mb << "\" x2=\""
        << opts.width - mr << "\" y2=\"" << opts.height - mb << "\"/></g>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"10\" fill=\"#333\">\n";
    for (double t : ticks(x_lo, x_hi, false)) {
        const double px = sx(t);
        out << "<line x1=\"" << num(px) << "\" y1=\"" << opts.height - mb << "\" x2=\""
            << num(px) << "\" y2=\"" << opts.height - mb + 4 << "\" stroke=\"#444\"/>"
            << "<text x=\"" << num(px) << "\" y=\"" << opts.height - mb + 16
            << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
    }
    for (double t : ticks(y_lo, y_hi, opts.log_y)) {
        if (t < y_lo || t > y_hi) continue;
        const double py = sy(t);
        out << "<line x1=\"" << ml - 4 << "\" y1=\"" << num(py) << "\" x2=\"" << ml
            << "\" y2=\"" << num(py) << "\" stroke=\"#444\"/>"
            << "<text x=\"" << ml - 7 << "\" y=\"" << num(py + 3)
            << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
    }
    out << "</g>\n";
    if (!opts.x_label.empty())
        out << "<text x=\"" << (ml + opts.width - mr) / 2 << "\" y=\""
            << opts.height - 8 << "\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"12\">" << escape(opts.x_label)
            << "</text>\n";
    if (!opts.y_label.empty())
        out << "<text x=\"14\" y=\"" << opts.height / 2
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
            << "transform=\"rotate(-90 14 " << opts.height / 2 << ")\">"
            << escape(opts.y_label) << "</text>\n";

    auto clamp_y = [&](double v) {
        if (opts.log_y && !(v > 0.0)) return y_lo;
        return std::clamp(v, y_lo, y_hi);
    };

    int color_idx = 0;
    for (const auto& s : series) {
        const std::string color =
            s.color.empty() ? kPalette[color_idx++ % 10] : s.color;
        if (!s.err.empty()) {
            std::ostringstream band;
            band << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" "
                 << "stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < s.xs.size(); ++i)
                band << num(sx(s.xs[i])) << ',' << num(sy(clamp_y(s.ys[i] + s.err[i])))
                     << ' ';
            for (std::size_t i = s.xs.size(); i-- > 0;)
                band << num(sx(s.xs[i])) << ',' << num(sy(clamp_y(s.ys[i] - s.err[i])))
                     << ' ';
            band << "\"/>\n";
            out << band.str();
        }
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (!std::isfinite(s.ys[i])) continue;
            out << num(sx(s.xs[i])) << ',' << num(sy(clamp_y(s.ys[i]))) << ' ';
        }
        out << "\"/>\n";
    }

    // legend
    double ly = mt + 6;
    color_idx = 0;
    for (const auto& s : series) {
        const std::string color =
            s.color.empty() ? kPalette[color_idx++ % 10] : s.color;
        out << "<line x1=\"" << opts.width - mr - 150 << "\" y1=\"" << num(ly)
            << "\" x2=\"" << opts.width - mr - 126 << "\" y2=\"" << num(ly)
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>"
            << "<text x=\"" << opts.width - mr - 120 << "\" y=\"" << num(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label)
            << "</text>\n";
        ly += 16;
    }
    out << "</svg>\n";
    return out.str();
}

std::string bar_panels(const std::vector<BarPanel>& panels, const PanelOptions& opts) {
    const int cols = std::max(1, opts.columns);
    const int rows = (static_cast<int>(panels.size()) + cols - 1) / cols;
    const int title_h = opts.title.empty() ? 0 : 26;
    const int width = cols * opts.panel_width;
    const int height = rows * opts.panel_height + title_h;

    double mass_lo = 0.0, mass_hi = 0.0;
    for (const auto& p : panels)
        for (double v : p.masses) {
            mass_lo = std::min(mass_lo, v);
            mass_hi = std::max(mass_hi, v);
        }
    if (mass_hi <= mass_lo) mass_hi = mass_lo + 1.0;

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opts.title.empty())
        out << "<text x=\"" << width / 2 << "\" y=\"17\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"13\">" << escape(opts.title)
            << "</text>\n";

    for (std::size_t p = 0; p < panels.size(); ++p) {
        const int cx = static_cast<int>(p) % cols;
        const int cy = static_cast<int>(p) / cols;
        const double x0 = cx * opts.panel_width + 12;
        const double y0 = cy * opts.panel_height + title_h + 18;
        const double w = opts.panel_width - 24;
        const double h = opts.panel_height - 40;
        const auto& panel = panels[p];
        const std::size_t m = panel.masses.size();
        const double zero_y = y0 + h * (mass_hi / (mass_hi - mass_lo));

        out << "<text x=\"" << num(x0 + w / 2) << "\" y=\"" << num(y0 - 6)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << escape(panel.label) << "</text>\n";
        out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(zero_y) << "\" x2=\""
            << num(x0 + w) << "\" y2=\"" << num(zero_y)
            << "\" stroke=\"#999\" stroke-width=\"0.8\"/>\n";
        const double bar_w = w / static_cast<double>(m) * 0.8;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = panel.masses[i];
            const double bx =
                x0 + (static_cast<double>(i) + 0.1) * w / static_cast<double>(m);
            const double vh = std::abs(v) / (mass_hi - mass_lo) * h;
            const double by = v >= 0.0 ? zero_y - vh : zero_y;
            out << "<rect x=\"" << num(bx) << "\" y=\"" << num(by) << "\" width=\""
                << num(bar_w) << "\" height=\"" << num(vh) << "\" fill=\""
                << (v >= 0.0 ? "#4C72B0" : "#55A868") << "\"/>\n";
        }
        out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\""
            << num(w) << "\" height=\"" << num(h)
            << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"0.8\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace distq::svg
