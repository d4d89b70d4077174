#pragma once

#include "clustex/types.hpp"

#include <string>
#include <vector>

namespace clustex::svg {

// Maps a data interval onto pixel coordinates.
struct LinearScale {
    double domain_lo = 0.0, domain_hi = 1.0;
    double range_lo = 0.0, range_hi = 1.0;

    double operator()(double v) const {
        const double span = domain_hi - domain_lo;
        const double t = span == 0.0 ? 0.5 : (v - domain_lo) / span;
        return range_lo + t * (range_hi - range_lo);
    }
};

// Accumulates SVG fragments; all coordinates are written with fixed
// precision so output bytes are reproducible.
class Canvas {
  public:
    Canvas(double width, double height);

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0);
    void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& stroke, double width = 1.0, double opacity = 1.0);
    void circle(double cx, double cy, double r, const std::string& fill, double opacity = 1.0);
    void rect(double x, double y, double w, double h, const std::string& fill);
    void text(double x, double y, const std::string& label, double size = 11.0,
              const std::string& anchor = "start", const std::string& fill = "#333333");

    std::string finish() const;

  private:
    double width_;
    double height_;
    std::string body_;
};

// Frame with tick marks and numeric labels on both axes plus a title; returns
// the scales that map data into the plot area.
struct Frame {
    LinearScale x;
    LinearScale y;
};

Frame draw_frame(Canvas& canvas, double width, double height, double x_lo, double x_hi,
                 double y_lo, double y_hi, const std::string& title,
                 const std::string& x_label, const std::string& y_label);

void write_svg(const std::string& path, const std::string& content);

}  // namespace clustex::svg
