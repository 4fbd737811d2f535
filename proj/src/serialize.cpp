#include "mfc/serialize.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mfc {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void append_vec(std::string& out, const Vec& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  out += ']';
}

void append_vec_list(std::string& out, const std::vector<Vec>& vs) {
  out += '[';
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ',';
    append_vec(out, vs[i]);
  }
  out += ']';
}

void append_scalars(std::string& out, const std::vector<double>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  out += ']';
}

Vec vec_of(const json& j) {
  Vec v;
  for (const auto& e : j) v.push_back(e.get<double>());
  return v;
}

std::vector<Vec> vec_list_of(const json& j) {
  std::vector<Vec> out;
  for (const auto& e : j) out.push_back(vec_of(e));
  return out;
}

}  // namespace

std::string measure_to_json(const AtomicMeasure& m) {
  std::string out = "{\"domain\":\"";
  out += m.domain == Domain::Torus ? "torus" : "control";
  out += "\",\"support\":";
  append_vec_list(out, m.support);
  out += ",\"weights\":";
  append_scalars(out, m.weights);
  out += '}';
  return out;
}

AtomicMeasure measure_from_json(const std::string& text) {
  const json j = json::parse(text);
  const Domain dom = j.at("domain").get<std::string>() == "torus" ? Domain::Torus : Domain::Control;
  return AtomicMeasure::create(dom, vec_list_of(j.at("support")), vec_of(j.at("weights")));
}

std::string control_to_json(const RelaxedControl& mu) {
  std::string out = "{\"grid\":" + std::to_string(mu.steps());
  out += ",\"horizon\":" + format_double(mu.horizon);
  out += ",\"atoms\":";
  append_vec_list(out, mu.atoms->atoms);
  out += ",\"weights\":[";
  for (int k = 0; k < mu.steps(); ++k) {
    if (k) out += ',';
    append_scalars(out, mu.weights[k]);
  }
  out += "]}";
  return out;
}

RelaxedControl control_from_json(const std::string& text) {
  const json j = json::parse(text);
  RelaxedControl mu;
  mu.atoms = ControlAtoms::make(vec_list_of(j.at("atoms")));
  mu.horizon = j.at("horizon").get<double>();
  for (const auto& row : j.at("weights")) mu.weights.push_back(vec_of(row));
  if (static_cast<int>(mu.weights.size()) != j.at("grid").get<int>())
    throw std::invalid_argument("control_from_json: grid/weights mismatch");
  mu.validate();
  return mu;
}

std::string feedback_to_json(const FeedbackControl& fb) {
  std::string out = "{\"horizon\":" + format_double(fb.horizon);
  out += ",\"t_bins\":" + std::to_string(fb.t_bins);
  out += ",\"x_bins\":" + std::to_string(fb.x_bins);
  out += ",\"x_dim\":" + std::to_string(fb.x_dim);
  out += ",\"atoms\":";
  append_vec_list(out, fb.atoms);
  out += ",\"cells\":[";
  for (std::size_t c = 0; c < fb.cells.size(); ++c) {
    if (c) out += ',';
    out += "{\"mass\":" + format_double(fb.cells[c].mass);
    out += ",\"filled\":";
    out += fb.cells[c].filled_from_neighbor ? "true" : "false";
    out += ",\"probs\":";
    append_scalars(out, fb.cells[c].probs);
    out += '}';
  }
  out += "]}";
  return out;
}

std::string ensemble_to_json(const PathEnsemble& ensemble) {
  std::string out = "{\"horizon\":" + format_double(ensemble.horizon);
  out += ",\"steps\":" + std::to_string(ensemble.steps());
  out += ",\"wrap\":";
  out += ensemble.wrap ? "true" : "false";
  out += ",\"atoms\":";
  append_vec_list(out, ensemble.controls[0].atoms->atoms);
  out += ",\"weights\":";
  append_scalars(out, ensemble.weights);
  out += ",\"paths\":[";
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    if (i) out += ',';
    out += "{\"positions\":";
    append_vec_list(out, ensemble.paths[i].positions);
    out += ",\"increments\":";
    append_vec_list(out, ensemble.paths[i].increments);
    out += '}';
  }
  out += "],\"controls\":[";
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    if (i) out += ',';
    out += '[';
    for (int k = 0; k < ensemble.steps(); ++k) {
      if (k) out += ',';
      append_scalars(out, ensemble.controls[i].weights[k]);
    }
    out += ']';
  }
  out += "]}";
  return out;
}

PathEnsemble ensemble_from_json(const std::string& text) {
  const json j = json::parse(text);
  PathEnsemble out;
  out.horizon = j.at("horizon").get<double>();
  out.wrap = j.at("wrap").get<bool>();
  const auto atoms = ControlAtoms::make(vec_list_of(j.at("atoms")));
  out.weights = vec_of(j.at("weights"));
  for (const auto& p : j.at("paths")) {
    Path path;
    path.horizon = out.horizon;
    path.wrap = out.wrap;
    path.positions = vec_list_of(p.at("positions"));
    path.increments = vec_list_of(p.at("increments"));
    out.paths.push_back(std::move(path));
  }
  for (const auto& c : j.at("controls")) {
    RelaxedControl mu;
    mu.atoms = atoms;
    mu.horizon = out.horizon;
    for (const auto& row : c) mu.weights.push_back(vec_of(row));
    mu.validate();
    out.controls.push_back(std::move(mu));
  }
  out.validate();
  return out;
}

std::string flow_to_json(const FlowMeasure& m) {
  std::string out = "{\"horizon\":" + format_double(m.horizon);
  out += ",\"steps\":" + std::to_string(m.steps());
  out += ",\"nodes\":[";
  for (std::size_t k = 0; k < m.nodes.size(); ++k) {
    if (k) out += ',';
    out += measure_to_json(m.nodes[k]);
  }
  out += "]}";
  return out;
}

std::string path_to_csv(const Path& path) {
  std::ostringstream os;
  const std::size_t d = path.positions[0].size();
  os << "node,t";
  for (std::size_t c = 0; c < d; ++c) os << ",x" << c;
  os << "\n";
  const double dt = path.dt();
  for (std::size_t k = 0; k < path.positions.size(); ++k) {
    os << k << ',' << format_double(k * dt);
    for (std::size_t c = 0; c < d; ++c) os << ',' << format_double(path.positions[k][c]);
    os << "\n";
  }
  return os.str();
}

}  // namespace mfc
