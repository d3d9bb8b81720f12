#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "umpc/cli.hpp"

namespace umpc::cli {
namespace {

std::string location(const std::string& file, const toml::source_region& where) {
  std::ostringstream os;
  os << file << ':' << where.begin.line << ':' << where.begin.column << ": ";
  return os.str();
}

// Typed access to one TOML table that remembers which keys were read, so
// that misspelled keys are reported instead of silently ignored.
class TableReader {
 public:
  TableReader(const toml::table& table, std::string context, const std::string& file)
      : table_(table), context_(std::move(context)), file_(file) {}

  [[noreturn]] void fail(const toml::node* node, const std::string& message) const {
    const toml::source_region& where = node ? node->source() : table_.source();
    throw ConfigError(location(file_, where) + message);
  }

  const toml::node* node(std::string_view key) {
    used_.insert(std::string(key));
    return table_.get(key);
  }

  std::string qualified(std::string_view key) const {
    return context_.empty() ? std::string(key) : context_ + "." + std::string(key);
  }

  double number(std::string_view key, double fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    return as_number(n, qualified(key));
  }

  double positive(std::string_view key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail(table_.get(key), qualified(key) + " must be > 0");
    return v;
  }

  double non_negative(std::string_view key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0)) fail(table_.get(key), qualified(key) + " must be >= 0");
    return v;
  }

  double probability(std::string_view key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0 && v < 1.0)) fail(table_.get(key), qualified(key) + " must be in (0, 1)");
    return v;
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    const auto v = n->value<std::int64_t>();
    if (!n->is_integer() || !v) fail(n, qualified(key) + " must be an integer");
    return *v;
  }

  bool boolean(std::string_view key, bool fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (!n->is_boolean()) fail(n, qualified(key) + " must be true or false");
    return *n->value<bool>();
  }

  std::string string(std::string_view key, const std::string& fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (!n->is_string()) fail(n, qualified(key) + " must be a string");
    return *n->value<std::string>();
  }

  const toml::table* table(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail(n, qualified(key) + " must be a table");
    return n->as_table();
  }

  const toml::array* array(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (!n->is_array()) fail(n, qualified(key) + " must be an array");
    return n->as_array();
  }

  double as_number(const toml::node* n, const std::string& name) const {
    if (!n->is_number()) fail(n, name + " must be a number");
    const double v = *n->value<double>();
    if (!std::isfinite(v)) fail(n, name + " must be finite");
    return v;
  }

  void finish() const {
    for (const auto& [key, value] : table_) {
      if (!used_.count(std::string(key.str()))) {
        fail(&value, "unknown key '" + qualified(key.str()) + "'");
      }
    }
  }

 private:
  const toml::table& table_;
  std::string context_;
  const std::string& file_;
  std::set<std::string> used_;
};

mpc::MpcConfig read_mpc(TableReader& r, double chance_p) {
  mpc::MpcConfig c;
  c.n_horizon = static_cast<int>(r.integer("n_horizon", c.n_horizon));
  if (c.n_horizon < 1) r.fail(r.node("n_horizon"), "mpc.n_horizon must be >= 1");
  c.dt = r.positive("dt_s", c.dt);
  c.w_p = r.positive("w_p_per_m2", c.w_p);
  c.w_v = r.positive("w_v_s2_per_m2", c.w_v);
  c.w_a = r.positive("w_a_s4_per_m2", c.w_a);
  c.w_alpha = r.positive("w_alpha_s4", c.w_alpha);
  c.v_ref = r.positive("v_ref_mps", c.v_ref);
  c.s_ref = r.positive("s_ref", geometry::chi2_threshold(chance_p).s);
  c.v_max = r.positive("v_max_mps", c.v_max);
  c.omega_max = r.positive("omega_max_radps", c.omega_max);
  c.a_max = r.positive("a_max_mps2", c.a_max);
  c.alpha_max = r.positive("alpha_max_radps2", c.alpha_max);
  c.solve_time_cap = r.positive("solve_time_cap_s", c.solve_time_cap);
  r.finish();
  return c;
}

dynamics::RobotState read_state(TableReader& r) {
  dynamics::RobotState s;
  s.x = r.number("x_m", 0.0);
  s.y = r.number("y_m", 0.0);
  s.phi = r.number("phi_rad", 0.0);
  s.v = r.number("v_mps", 0.0);
  s.omega = r.number("omega_radps", 0.0);
  r.finish();
  return s;
}

sim::RobotSpec read_robot(TableReader& r, const std::string& file) {
  sim::RobotSpec spec;
  spec.id = r.string("id", "");
  if (spec.id.empty()) r.fail(r.node("id"), r.qualified("id") + " must be a non-empty string");
  spec.radius = r.positive("radius_m", spec.radius);

  const toml::array* waypoints = r.array("waypoints_m");
  if (!waypoints || waypoints->empty()) {
    r.fail(waypoints, r.qualified("waypoints_m") + " must list at least one [x, y] point");
  }
  for (const toml::node& point : *waypoints) {
    const toml::array* xy = point.as_array();
    if (!xy || xy->size() != 2) r.fail(&point, "waypoint must be an [x, y] pair");
    spec.waypoints.emplace_back(r.as_number(xy->get(0), "waypoint x"),
                                r.as_number(xy->get(1), "waypoint y"));
  }

  if (const toml::table* initial = r.table("initial")) {
    TableReader ir(*initial, r.qualified("initial"), file);
    spec.initial = read_state(ir);
  } else {
    spec.initial.x = spec.waypoints.front().x();
    spec.initial.y = spec.waypoints.front().y();
  }
  r.finish();
  return spec;
}

sim::ScenarioConfig read_scenario(const toml::table& root, const std::string& file) {
  TableReader r(root, "", file);
  sim::ScenarioConfig c;
  c.name = r.string("name", c.name);
  c.chance_p = r.probability("chance_p", c.chance_p);
  c.duration = r.positive("duration_s", c.duration);
  const std::int64_t seed = r.integer("seed", 0);
  if (seed < 0) r.fail(r.node("seed"), "seed must be >= 0");
  c.rng_seed = static_cast<std::uint64_t>(seed);
  c.history_window = static_cast<int>(r.integer("history_window", c.history_window));
  if (c.history_window < 2) r.fail(r.node("history_window"), "history_window must be >= 2");
  c.noise_std = r.non_negative("noise_std_m", c.noise_std);
  c.dt_ctrl = r.positive("dt_ctrl_s", c.dt_ctrl);
  c.goal_tolerance = r.positive("goal_tolerance_m", c.goal_tolerance);
  c.clearance_margin = r.non_negative("clearance_margin_m", c.clearance_margin);
  c.obstacle_constraints = r.boolean("obstacle_constraints", c.obstacle_constraints);
  c.parallel = r.boolean("parallel", c.parallel);

  if (const toml::table* m = r.table("mpc")) {
    TableReader mr(*m, "mpc", file);
    c.mpc = read_mpc(mr, c.chance_p);
  } else {
    c.mpc.s_ref = geometry::chi2_threshold(c.chance_p).s;
  }

  const toml::array* robots = r.array("robots");
  if (!robots || robots->empty()) r.fail(robots, "at least one [[robots]] entry is required");
  for (std::size_t i = 0; i < robots->size(); ++i) {
    const toml::node& entry = *robots->get(i);
    if (!entry.is_table()) r.fail(&entry, "robots entries must be tables");
    TableReader rr(*entry.as_table(), "robots[" + std::to_string(i) + "]", file);
    c.robots.push_back(read_robot(rr, file));
  }
  r.finish();

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(location(file, root.source()) + e.what());
  }
  return c;
}

}  // namespace

sim::ScenarioConfig parse_scenario(std::string_view text, const std::string& source_name) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw ConfigError(location(source_name, e.source()) + std::string(e.description()));
  }
  return read_scenario(root, source_name);
}

sim::ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str(), path.string());
}

}  // namespace umpc::cli
