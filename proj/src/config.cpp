#include "jbasim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace jbasim {

namespace {

using nlohmann::json;

// Tracks which keys of an object were consumed; anything left over is a typo
// and fails the parse with its JSON-pointer path.
class Cursor {
 public:
  Cursor(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  ~Cursor() = default;

  bool has(const char* key) const { return node_.contains(key); }

  double number(const char* key) {
    const json& v = get(key);
    if (!v.is_number()) throw ConfigError(path_ + "/" + key + ": expected a number");
    return v.get<double>();
  }

  double number_or(const char* key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  long integer(const char* key) {
    const json& v = get(key);
    if (!v.is_number_integer()) throw ConfigError(path_ + "/" + key + ": expected an integer");
    return v.get<long>();
  }

  long integer_or(const char* key, long fallback) {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t uinteger(const char* key) {
    const json& v = get(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(path_ + "/" + key + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean_or(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_boolean()) throw ConfigError(path_ + "/" + key + ": expected a boolean");
    return v.get<bool>();
  }

  std::string string(const char* key) {
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError(path_ + "/" + key + ": expected a string");
    return v.get<std::string>();
  }

  std::string string_or(const char* key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  std::vector<int> int_array_or(const char* key, std::vector<int> fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_array()) throw ConfigError(path_ + "/" + key + ": expected an array");
    std::vector<int> out;
    for (const auto& item : v) {
      if (!item.is_number_integer()) {
        throw ConfigError(path_ + "/" + key + ": expected integer entries");
      }
      out.push_back(item.get<int>());
    }
    return out;
  }

  std::vector<double> number_array_or(const char* key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_array()) throw ConfigError(path_ + "/" + key + ": expected an array");
    std::vector<double> out;
    for (const auto& item : v) {
      if (!item.is_number()) throw ConfigError(path_ + "/" + key + ": expected numeric entries");
      out.push_back(item.get<double>());
    }
    return out;
  }

  const json& child(const char* key) { return get(key); }

  const std::string& path() const { return path_; }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(path_ + "/" + it.key() + ": unknown key");
      }
    }
  }

 private:
  const json& get(const char* key) {
    auto it = node_.find(key);
    if (it == node_.end()) throw ConfigError(path_ + "/" + key + ": missing required key");
    seen_.insert(key);
    return *it;
  }

  const json& node_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

void check_grid(const std::string& path, double lo, double hi, double step) {
  if (!(step > 0)) throw ConfigError(path + ": grid step must be > 0");
  if (!(hi >= lo)) throw ConfigError(path + ": grid maximum must be >= minimum");
}

DeviceParams parse_device(const json& node, const std::string& path) {
  Cursor c(node, path);
  DeviceParams dev;
  dev.f_c = c.number_or("f_c", dev.f_c);
  dev.q0 = c.number_or("q0", dev.q0);
  dev.i_c = c.number_or("i_c", dev.i_c);
  dev.kerr_mhz = c.number_or("kerr_mhz", dev.kerr_mhz);
  dev.g = c.number_or("g", dev.g);
  dev.e_j_max = c.number_or("e_j_max", dev.e_j_max);
  dev.e_c = c.number_or("e_c", dev.e_c);
  dev.d = c.number_or("d", dev.d);
  dev.t1_int_us = c.number_or("t1_int_us", dev.t1_int_us);
  dev.a_flux = c.number_or("a_flux", dev.a_flux);
  dev.t_n = c.number_or("t_n", dev.t_n);
  dev.atten_db = c.number_or("atten_db", dev.atten_db);
  c.finish();
  try {
    dev.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return dev;
}

Experiment parse_experiment(const json& node, const std::string& path) {
  Cursor c(node, path);
  const std::string type = c.string("type");

  if (type == "scurve") {
    ScurveExperiment e;
    e.states = c.int_array_or("states", e.states);
    e.p_min_rel_db = c.number_or("p_min_rel_db", e.p_min_rel_db);
    e.p_max_rel_db = c.number_or("p_max_rel_db", e.p_max_rel_db);
    e.p_step_db = c.number_or("p_step_db", e.p_step_db);
    c.finish();
    if (e.states.empty()) throw ConfigError(path + "/states: must not be empty");
    for (int s : e.states) {
      if (s < 0 || s > 2) throw ConfigError(path + "/states: levels must be 0, 1 or 2");
    }
    check_grid(path + "/p", e.p_min_rel_db, e.p_max_rel_db, e.p_step_db);
    return e;
  }
  if (type == "rabi") {
    RabiExperiment e;
    e.f_rabi_mhz = c.number_or("f_rabi_mhz", e.f_rabi_mhz);
    e.rabi_decay_us = c.number_or("rabi_decay_us", e.rabi_decay_us);
    e.dt_min_ns = c.number_or("dt_min_ns", e.dt_min_ns);
    e.dt_max_ns = c.number_or("dt_max_ns", e.dt_max_ns);
    e.dt_step_ns = c.number_or("dt_step_ns", e.dt_step_ns);
    e.composite = c.boolean_or("composite", e.composite);
    c.finish();
    check_grid(path + "/dt", e.dt_min_ns, e.dt_max_ns, e.dt_step_ns);
    return e;
  }
  if (type == "ramsey") {
    RamseyExperiment e;
    e.detuning_mhz = c.number_or("detuning_mhz", e.detuning_mhz);
    e.delay_min_ns = c.number_or("delay_min_ns", e.delay_min_ns);
    e.delay_max_ns = c.number_or("delay_max_ns", e.delay_max_ns);
    e.delay_step_ns = c.number_or("delay_step_ns", e.delay_step_ns);
    c.finish();
    if (e.detuning_mhz == 0.0) throw ConfigError(path + "/detuning_mhz: must be nonzero");
    check_grid(path + "/delay", e.delay_min_ns, e.delay_max_ns, e.delay_step_ns);
    return e;
  }
  if (type == "t1") {
    T1Experiment e;
    e.delay_min_ns = c.number_or("delay_min_ns", e.delay_min_ns);
    e.delay_max_ns = c.number_or("delay_max_ns", e.delay_max_ns);
    e.delay_step_ns = c.number_or("delay_step_ns", e.delay_step_ns);
    e.drive_powers_rel_db = c.number_array_or("drive_powers_rel_db", e.drive_powers_rel_db);
    c.finish();
    check_grid(path + "/delay", e.delay_min_ns, e.delay_max_ns, e.delay_step_ns);
    return e;
  }
  if (type == "two_readout") {
    TwoReadoutExperiment e;
    e.pulse1_t_r_ns = c.number_or("pulse1_t_r_ns", e.pulse1_t_r_ns);
    e.pulse1_t_s_ns = c.number_or("pulse1_t_s_ns", e.pulse1_t_s_ns);
    e.pulse1_t_h_ns = c.number_or("pulse1_t_h_ns", e.pulse1_t_h_ns);
    e.pulse2_t_r_ns = c.number_or("pulse2_t_r_ns", e.pulse2_t_r_ns);
    e.pulse2_t_s_ns = c.number_or("pulse2_t_s_ns", e.pulse2_t_s_ns);
    e.pulse2_t_h_ns = c.number_or("pulse2_t_h_ns", e.pulse2_t_h_ns);
    e.delay_ns = c.number_or("delay_ns", e.delay_ns);
    e.f_rabi_mhz = c.number_or("f_rabi_mhz", e.f_rabi_mhz);
    e.rabi_decay_us = c.number_or("rabi_decay_us", e.rabi_decay_us);
    e.dt_min_ns = c.number_or("dt_min_ns", e.dt_min_ns);
    e.dt_max_ns = c.number_or("dt_max_ns", e.dt_max_ns);
    e.dt_step_ns = c.number_or("dt_step_ns", e.dt_step_ns);
    c.finish();
    if (e.delay_ns < 0) throw ConfigError(path + "/delay_ns: must be >= 0");
    check_grid(path + "/dt", e.dt_min_ns, e.dt_max_ns, e.dt_step_ns);
    return e;
  }
  if (type == "ac_stark") {
    AcStarkExperiment e;
    e.p_min_rel_db = c.number_or("p_min_rel_db", e.p_min_rel_db);
    e.p_max_rel_db = c.number_or("p_max_rel_db", e.p_max_rel_db);
    e.p_step_db = c.number_or("p_step_db", e.p_step_db);
    e.n_photons_max = static_cast<int>(c.integer_or("n_photons_max", e.n_photons_max));
    c.finish();
    check_grid(path + "/p", e.p_min_rel_db, e.p_max_rel_db, e.p_step_db);
    if (e.n_photons_max < 10) throw ConfigError(path + "/n_photons_max: must be >= 10");
    return e;
  }
  if (type == "sweep_detuning") {
    SweepDetuningExperiment e;
    e.delta_min_ghz = c.number_or("delta_min_ghz", e.delta_min_ghz);
    e.delta_max_ghz = c.number_or("delta_max_ghz", e.delta_max_ghz);
    e.delta_step_ghz = c.number_or("delta_step_ghz", e.delta_step_ghz);
    e.shots_optimize = c.integer_or("shots_optimize", e.shots_optimize);
    e.shots_scurve = c.integer_or("shots_scurve", e.shots_scurve);
    c.finish();
    check_grid(path + "/delta", e.delta_min_ghz, e.delta_max_ghz, e.delta_step_ghz);
    if (e.shots_optimize < 100 || e.shots_scurve < 100) {
      throw ConfigError(path + ": sweep shot counts must be >= 100");
    }
    return e;
  }
  if (type == "shot_trace") {
    ShotTraceExperiment e;
    e.count = c.integer_or("count", e.count);
    e.prepared = c.int_array_or("prepared", e.prepared);
    e.t_n = c.number_or("t_n", e.t_n);
    e.lpf_cutoff_mhz = c.number_or("lpf_cutoff_mhz", e.lpf_cutoff_mhz);
    e.trace_dt_ns = c.number_or("trace_dt_ns", e.trace_dt_ns);
    c.finish();
    if (e.count < 1) throw ConfigError(path + "/count: must be >= 1");
    if (e.prepared.empty()) throw ConfigError(path + "/prepared: must not be empty");
    if (!(e.lpf_cutoff_mhz > 0)) throw ConfigError(path + "/lpf_cutoff_mhz: must be > 0");
    if (!(e.trace_dt_ns > 0)) throw ConfigError(path + "/trace_dt_ns: must be > 0");
    return e;
  }
  throw ConfigError(path + "/type: unknown experiment '" + type + "'");
}

}  // namespace

const char* experiment_name(const Experiment& e) {
  static const char* names[] = {"scurve", "rabi",     "ramsey",         "t1",
                                "two_readout", "ac_stark", "sweep_detuning", "shot_trace"};
  return names[e.index()];
}

std::vector<std::string> known_experiments() {
  return {"scurve", "rabi", "ramsey", "t1", "two_readout", "ac_stark", "sweep_detuning",
          "shot_trace"};
}

RunConfig parse_config(const json& doc) {
  Cursor root(doc, "");
  RunConfig config;

  if (!root.has("seed")) throw ConfigError("/seed: missing required key (no wall-clock default)");
  config.seed = root.uinteger("seed");
  config.shots = root.integer_or("shots", config.shots);
  if (config.shots < 1) throw ConfigError("/shots: must be >= 1");
  config.output_dir = root.string_or("output_dir", config.output_dir);

  config.device = parse_device(root.child("device"), "/device");

  if (root.has("escape")) {
    Cursor c(root.child("escape"), "/escape");
    config.escape.attempt_rate_hz = c.number_or("attempt_rate_hz", config.escape.attempt_rate_hz);
    config.escape.barrier_scale = c.number_or("barrier_scale", config.escape.barrier_scale);
    c.finish();
    if (!(config.escape.attempt_rate_hz > 0)) throw ConfigError("/escape/attempt_rate_hz: must be > 0");
    if (!(config.escape.barrier_scale > 0)) throw ConfigError("/escape/barrier_scale: must be > 0");
  }
  if (root.has("prep")) {
    Cursor c(root.child("prep"), "/prep");
    config.prep.thermal_pop = c.number_or("thermal_pop", config.prep.thermal_pop);
    config.prep.pulse_error = c.number_or("pulse_error", config.prep.pulse_error);
    c.finish();
    if (config.prep.thermal_pop < 0 || config.prep.thermal_pop > 0.5) {
      throw ConfigError("/prep/thermal_pop: must lie in [0, 0.5]");
    }
    if (config.prep.pulse_error < 0 || config.prep.pulse_error > 0.5) {
      throw ConfigError("/prep/pulse_error: must lie in [0, 0.5]");
    }
  }
  {
    Cursor c(root.child("readout"), "/readout");
    ReadoutBlock& r = config.readout;
    r.delta_ghz = c.number("delta_ghz");
    r.f_offset_mhz = c.number_or("f_offset_mhz", r.f_offset_mhz);
    r.t_r_ns = c.number_or("t_r_ns", r.t_r_ns);
    r.t_s_ns = c.number_or("t_s_ns", r.t_s_ns);
    r.t_h_ns = c.number_or("t_h_ns", r.t_h_ns);
    r.dt_ns = c.number_or("dt_ns", r.dt_ns);
    r.p_s_rel_db = c.number_or("p_s_rel_db", r.p_s_rel_db);
    r.hold_offset_db = c.number_or("hold_offset_db", r.hold_offset_db);
    r.n_photons_max = static_cast<int>(c.integer_or("n_photons_max", r.n_photons_max));
    c.finish();
    if (r.t_r_ns < 0 || r.t_s_ns < 0 || r.t_h_ns < 0) {
      throw ConfigError("/readout: segment durations must be >= 0");
    }
    if (!(r.dt_ns > 0)) throw ConfigError("/readout/dt_ns: must be > 0");
    if (r.hold_offset_db > 0) throw ConfigError("/readout/hold_offset_db: must be <= 0");
    if (r.n_photons_max < 5) throw ConfigError("/readout/n_photons_max: must be >= 5");
  }

  config.experiment = parse_experiment(root.child("experiment"), "/experiment");
  root.finish();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("JSON parse error in ") + path + ": " + e.what());
  }
  return parse_config(doc);
}

nlohmann::json to_json(const RunConfig& config) {
  json doc;
  doc["seed"] = config.seed;
  doc["shots"] = config.shots;
  doc["output_dir"] = config.output_dir;
  doc["device"] = {
      {"f_c", config.device.f_c},       {"q0", config.device.q0},
      {"i_c", config.device.i_c},       {"kerr_mhz", config.device.kerr_mhz},
      {"g", config.device.g},           {"e_j_max", config.device.e_j_max},
      {"e_c", config.device.e_c},       {"d", config.device.d},
      {"t1_int_us", config.device.t1_int_us}, {"a_flux", config.device.a_flux},
      {"t_n", config.device.t_n},       {"atten_db", config.device.atten_db}};
  doc["escape"] = {{"attempt_rate_hz", config.escape.attempt_rate_hz},
                   {"barrier_scale", config.escape.barrier_scale}};
  doc["prep"] = {{"thermal_pop", config.prep.thermal_pop},
                 {"pulse_error", config.prep.pulse_error}};
  doc["readout"] = {{"delta_ghz", config.readout.delta_ghz},
                    {"f_offset_mhz", config.readout.f_offset_mhz},
                    {"t_r_ns", config.readout.t_r_ns},
                    {"t_s_ns", config.readout.t_s_ns},
                    {"t_h_ns", config.readout.t_h_ns},
                    {"dt_ns", config.readout.dt_ns},
                    {"p_s_rel_db", config.readout.p_s_rel_db},
                    {"hold_offset_db", config.readout.hold_offset_db},
                    {"n_photons_max", config.readout.n_photons_max}};

  json exp;
  std::visit(
      [&exp](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ScurveExperiment>) {
          exp = {{"type", "scurve"},
                 {"states", e.states},
                 {"p_min_rel_db", e.p_min_rel_db},
                 {"p_max_rel_db", e.p_max_rel_db},
                 {"p_step_db", e.p_step_db}};
        } else if constexpr (std::is_same_v<T, RabiExperiment>) {
          exp = {{"type", "rabi"},          {"f_rabi_mhz", e.f_rabi_mhz},
                 {"rabi_decay_us", e.rabi_decay_us}, {"dt_min_ns", e.dt_min_ns},
                 {"dt_max_ns", e.dt_max_ns},         {"dt_step_ns", e.dt_step_ns},
                 {"composite", e.composite}};
        } else if constexpr (std::is_same_v<T, RamseyExperiment>) {
          exp = {{"type", "ramsey"},
                 {"detuning_mhz", e.detuning_mhz},
                 {"delay_min_ns", e.delay_min_ns},
                 {"delay_max_ns", e.delay_max_ns},
                 {"delay_step_ns", e.delay_step_ns}};
        } else if constexpr (std::is_same_v<T, T1Experiment>) {
          exp = {{"type", "t1"},
                 {"delay_min_ns", e.delay_min_ns},
                 {"delay_max_ns", e.delay_max_ns},
                 {"delay_step_ns", e.delay_step_ns},
                 {"drive_powers_rel_db", e.drive_powers_rel_db}};
        } else if constexpr (std::is_same_v<T, TwoReadoutExperiment>) {
          exp = {{"type", "two_readout"},
                 {"pulse1_t_r_ns", e.pulse1_t_r_ns},
                 {"pulse1_t_s_ns", e.pulse1_t_s_ns},
                 {"pulse1_t_h_ns", e.pulse1_t_h_ns},
                 {"pulse2_t_r_ns", e.pulse2_t_r_ns},
                 {"pulse2_t_s_ns", e.pulse2_t_s_ns},
                 {"pulse2_t_h_ns", e.pulse2_t_h_ns},
                 {"delay_ns", e.delay_ns},
                 {"f_rabi_mhz", e.f_rabi_mhz},
                 {"rabi_decay_us", e.rabi_decay_us},
                 {"dt_min_ns", e.dt_min_ns},
                 {"dt_max_ns", e.dt_max_ns},
                 {"dt_step_ns", e.dt_step_ns}};
        } else if constexpr (std::is_same_v<T, AcStarkExperiment>) {
          exp = {{"type", "ac_stark"},
                 {"p_min_rel_db", e.p_min_rel_db},
                 {"p_max_rel_db", e.p_max_rel_db},
                 {"p_step_db", e.p_step_db},
                 {"n_photons_max", e.n_photons_max}};
        } else if constexpr (std::is_same_v<T, SweepDetuningExperiment>) {
          exp = {{"type", "sweep_detuning"},
                 {"delta_min_ghz", e.delta_min_ghz},
                 {"delta_max_ghz", e.delta_max_ghz},
                 {"delta_step_ghz", e.delta_step_ghz},
                 {"shots_optimize", e.shots_optimize},
                 {"shots_scurve", e.shots_scurve}};
        } else if constexpr (std::is_same_v<T, ShotTraceExperiment>) {
          exp = {{"type", "shot_trace"},   {"count", e.count},
                 {"prepared", e.prepared}, {"t_n", e.t_n},
                 {"lpf_cutoff_mhz", e.lpf_cutoff_mhz}, {"trace_dt_ns", e.trace_dt_ns}};
        }
      },
      config.experiment);
  doc["experiment"] = exp;
  return doc;
}

}  // namespace jbasim
