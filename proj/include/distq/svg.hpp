#pragma once

#include <string>
#include <vector>

namespace distq::svg {

struct Series {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> err; // optional; same length as ys when present
    std::string color;       // empty picks from the palette
};

struct ChartOptions {
    std::string title;
    std::string x_label = "k";
    std::string y_label;
    bool log_y = false;
    int width = 760;
    int height = 480;
};

/// Polyline chart with translucent error bands and a legend; valid XML.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& opts);

struct BarPanel {
    std::string label;
    std::vector<double> atoms;
    std::vector<double> masses;
};

struct PanelOptions {
    std::string title;
    int panel_width = 240;
    int panel_height = 200;
    int columns = 5;
};

/// Row(s) of bar panels; negative bars are drawn in a distinct color.
std::string bar_panels(const std::vector<BarPanel>& panels, const PanelOptions& opts);

} // namespace distq::svg
