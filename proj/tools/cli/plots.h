#pragma once

#include <string>

namespace cautious::cli {

// Stand-alone Python scripts (matplotlib) that render the CSV output. Written
// next to the data so the tool itself never produces images.
std::string BoundPlotScript();
std::string OnlinePlotScript();

}  // namespace cautious::cli
