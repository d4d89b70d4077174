#include "clustex/svg.hpp"

#include "clustex/csv.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace clustex::svg {

namespace {

std::string num(double v) {
    std::string s = csv::format_fixed(v, 2);
    // trim trailing zeros to keep files small, but keep one decimal digit
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

std::string escape_text(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

// Round tick step to 1/2/5 times a power of ten.
double tick_step(double span) {
    if (span <= 0.0) return 1.0;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    if (frac < 1.5) return mag;
    if (frac < 3.5) return 2.0 * mag;
    if (frac < 7.5) return 5.0 * mag;
    return 10.0 * mag;
}

std::string tick_label(double v) {
    std::string s = csv::format_fixed(v, 4);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

}  // namespace

Canvas::Canvas(double width, double height) : width_(width), height_(height) {}

void Canvas::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                  double width) {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
             "\" y2=\"" + num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) +
             "\"/>\n";
}

void Canvas::polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                      const std::string& stroke, double width, double opacity) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("svg: polyline coordinate mismatch");
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) +
             "\"";
    if (opacity < 1.0) body_ += " stroke-opacity=\"" + num(opacity) + "\"";
    body_ += " points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) body_ += ' ';
        body_ += num(xs[i]) + "," + num(ys[i]);
    }
    body_ += "\"/>\n";
}

void Canvas::circle(double cx, double cy, double r, const std::string& fill, double opacity) {
    body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
             "\" fill=\"" + fill + "\"";
    if (opacity < 1.0) body_ += " fill-opacity=\"" + num(opacity) + "\"";
    body_ += "/>\n";
}

void Canvas::rect(double x, double y, double w, double h, const std::string& fill) {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
             "\" height=\"" + num(h) + "\" fill=\"" + fill + "\"/>\n";
}

void Canvas::text(double x, double y, const std::string& label, double size,
                  const std::string& anchor, const std::string& fill) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
             "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\" fill=\"" + fill +
             "\">" + escape_text(label) + "</text>\n";
}

std::string Canvas::finish() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" +
           num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) +
           "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ + "</svg>\n";
}

Frame draw_frame(Canvas& canvas, double width, double height, double x_lo, double x_hi,
                 double y_lo, double y_hi, const std::string& title, const std::string& x_label,
                 const std::string& y_label) {
    constexpr double left = 62.0, right = 16.0, top = 34.0, bottom = 46.0;
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    if (y_hi <= y_lo) y_hi = y_lo + 1.0;

    Frame frame;
    frame.x = {x_lo, x_hi, left, width - right};
    frame.y = {y_lo, y_hi, height - bottom, top};  // y grows upward

    canvas.line(left, top, left, height - bottom, "#444444");
    canvas.line(left, height - bottom, width - right, height - bottom, "#444444");
    canvas.text(width / 2.0, 20.0, title, 13.0, "middle");
    canvas.text(width / 2.0, height - 8.0, x_label, 11.0, "middle");
    canvas.text(14.0, top - 10.0, y_label, 11.0, "start");

    const double x_step = tick_step(x_hi - x_lo);
    for (double v = std::ceil(x_lo / x_step) * x_step; v <= x_hi + 1e-12; v += x_step) {
        const double px = frame.x(v);
        canvas.line(px, height - bottom, px, height - bottom + 4.0, "#444444");
        canvas.text(px, height - bottom + 17.0, tick_label(v), 10.0, "middle");
    }
    const double y_step = tick_step(y_hi - y_lo);
    for (double v = std::ceil(y_lo / y_step) * y_step; v <= y_hi + 1e-12; v += y_step) {
        const double py = frame.y(v);
        canvas.line(left - 4.0, py, left, py, "#444444");
        canvas.text(left - 7.0, py + 3.5, tick_label(v), 10.0, "end");
    }
    return frame;
}

void write_svg(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("svg: cannot write " + path);
    out << content;
}

}  // namespace clustex::svg
