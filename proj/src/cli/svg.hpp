#pragma once

#include <array>
#include <string>
#include <vector>

namespace vitalattn {

struct HourStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct PanelGeometry {
  double width = 720, height = 280;
  double margin_left = 50, margin_right = 15, margin_top = 30, margin_bottom = 30;
  int hours = 24;
};

struct SvgPoint {
  double x = 0, y = 0;
};

// Plot coordinate of (hour, value) with values in [0,1]; the patient overlay
// and the flagged-hour markers share this transform.
SvgPoint hour_value_point(const PanelGeometry& geom, int hour1, double value);

// Box-and-whisker per hour with the patient's trajectory overlaid and the
// flagged hours marked in red.
std::string render_channel_panel(const std::string& title,
                                 const std::array<HourStats, 24>& per_hour,
                                 const std::array<double, 24>& patient_values,
                                 const std::vector<int>& flagged_hours,
                                 const PanelGeometry& geom = {});

// Cohort histogram (20 bins over [0,1]) with the patient's value as a red line.
std::string render_histogram_panel(const std::string& title, const std::array<int, 20>& bins,
                                   double patient_value, const PanelGeometry& geom = {});

}  // namespace vitalattn
