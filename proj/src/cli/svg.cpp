#include "cli/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace vitalattn {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void open_svg(std::ostringstream& os, const PanelGeometry& geom, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << geom.width << "\" height=\""
     << geom.height << "\" viewBox=\"0 0 " << geom.width << " " << geom.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(geom.margin_left) << "\" y=\"18\" font-family=\"sans-serif\" "
     << "font-size=\"13\">" << title << "</text>\n";
}

double plot_w(const PanelGeometry& g) { return g.width - g.margin_left - g.margin_right; }
double plot_h(const PanelGeometry& g) { return g.height - g.margin_top - g.margin_bottom; }

double value_y(const PanelGeometry& g, double value) {
  return g.margin_top + (1.0 - std::clamp(value, 0.0, 1.0)) * plot_h(g);
}

}  // namespace

SvgPoint hour_value_point(const PanelGeometry& geom, int hour1, double value) {
  const double step = plot_w(geom) / static_cast<double>(geom.hours);
  return {geom.margin_left + (static_cast<double>(hour1) - 0.5) * step, value_y(geom, value)};
}

std::string render_channel_panel(const std::string& title,
                                 const std::array<HourStats, 24>& per_hour,
                                 const std::array<double, 24>& patient_values,
                                 const std::vector<int>& flagged_hours,
                                 const PanelGeometry& geom) {
  std::ostringstream os;
  open_svg(os, geom, title);
  const double step = plot_w(geom) / static_cast<double>(geom.hours);
  const double box_w = step * 0.5;

  for (int h = 1; h <= geom.hours; ++h) {
    const HourStats& s = per_hour[h - 1];
    const double cx = hour_value_point(geom, h, 0.0).x;
    // whiskers
    os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(value_y(geom, s.min)) << "\" x2=\""
       << num(cx) << "\" y2=\"" << num(value_y(geom, s.max))
       << "\" stroke=\"#999\" stroke-width=\"1\"/>\n";
    // interquartile box
    os << "<rect x=\"" << num(cx - box_w / 2) << "\" y=\"" << num(value_y(geom, s.q3))
       << "\" width=\"" << num(box_w) << "\" height=\""
       << num(value_y(geom, s.q1) - value_y(geom, s.q3))
       << "\" fill=\"#cfe2f3\" stroke=\"#666\" stroke-width=\"1\"/>\n";
    // median tick
    os << "<line x1=\"" << num(cx - box_w / 2) << "\" y1=\"" << num(value_y(geom, s.median))
       << "\" x2=\"" << num(cx + box_w / 2) << "\" y2=\"" << num(value_y(geom, s.median))
       << "\" stroke=\"#333\" stroke-width=\"1.5\"/>\n";
  }

  os << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
  for (int h = 1; h <= geom.hours; ++h) {
    const SvgPoint p = hour_value_point(geom, h, patient_values[h - 1]);
    os << num(p.x) << "," << num(p.y) << (h == geom.hours ? "" : " ");
  }
  os << "\"/>\n";

  for (int h : flagged_hours) {
    const SvgPoint p = hour_value_point(geom, h, patient_values[h - 1]);
    os << "<circle cx=\"" << num(p.x) << "\" cy=\"" << num(p.y)
       << "\" r=\"4\" fill=\"red\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_histogram_panel(const std::string& title, const std::array<int, 20>& bins,
                                   double patient_value, const PanelGeometry& geom) {
  std::ostringstream os;
  open_svg(os, geom, title);
  int max_count = 1;
  for (int b : bins) max_count = std::max(max_count, b);
  const double bar_w = plot_w(geom) / 20.0;
  for (int i = 0; i < 20; ++i) {
    const double frac = static_cast<double>(bins[i]) / static_cast<double>(max_count);
    const double bar_h = frac * plot_h(geom);
    os << "<rect x=\"" << num(geom.margin_left + i * bar_w) << "\" y=\""
       << num(geom.margin_top + plot_h(geom) - bar_h) << "\" width=\"" << num(bar_w * 0.9)
       << "\" height=\"" << num(bar_h) << "\" fill=\"#cfe2f3\" stroke=\"#666\"/>\n";
  }
  const double px = geom.margin_left + std::clamp(patient_value, 0.0, 1.0) * plot_w(geom);
  os << "<line x1=\"" << num(px) << "\" y1=\"" << num(geom.margin_top) << "\" x2=\"" << num(px)
     << "\" y2=\"" << num(geom.margin_top + plot_h(geom))
     << "\" stroke=\"red\" stroke-width=\"2\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace vitalattn
