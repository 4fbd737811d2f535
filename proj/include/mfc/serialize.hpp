#pragma once

#include <string>

#include "mfc/control.hpp"
#include "mfc/dynamics.hpp"
#include "mfc/measures.hpp"

namespace mfc {

/// Decimal float with 17 significant digits (lossless round-trip).
std::string format_double(double v);

// JSON writers.  Emission is hand-rolled so numeric formatting and key
// order are fixed; parsing goes through nlohmann::json.
std::string measure_to_json(const AtomicMeasure& m);
AtomicMeasure measure_from_json(const std::string& text);

std::string control_to_json(const RelaxedControl& mu);
RelaxedControl control_from_json(const std::string& text);

std::string feedback_to_json(const FeedbackControl& fb);

std::string ensemble_to_json(const PathEnsemble& ensemble);
PathEnsemble ensemble_from_json(const std::string& text);

std::string flow_to_json(const FlowMeasure& m);

/// One row per time node: node, t, then one column per coordinate.
std::string path_to_csv(const Path& path);

}  // namespace mfc
