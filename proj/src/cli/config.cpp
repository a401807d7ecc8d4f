#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spatpomp/cli.hpp"
#include "spatpomp/errors.hpp"
#include "spatpomp/models/bm.hpp"
#include "spatpomp/models/measles.hpp"

namespace spatpomp::cli {

namespace {

using json = nlohmann::json;

const std::set<std::string> kFilterMethods = {"pfilter", "girf", "abf", "enkf", "bpfilter"};
const std::set<std::string> kSearchMethods = {"igirf", "ienkf", "iubf"};

std::vector<std::string> required_options(const std::string& method) {
  if (method == "pfilter" || method == "enkf") return {"Np"};
  if (method == "girf") return {"Np", "Ninter", "Nguide", "Lookahead"};
  if (method == "abf") return {"Nrep", "Np"};
  if (method == "bpfilter") return {"Np", "block_size"};
  if (method == "igirf") return {"Ngirf", "Np", "Ninter", "Nguide", "Lookahead", "rw_sd"};
  if (method == "ienkf") return {"Nenkf", "Np", "rw_sd"};
  if (method == "iubf") return {"Nubf", "Nparam", "Nrep_per_param", "prop", "rw_sd"};
  return {};
}

// Collects every problem instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& message) {
    errors.push_back(path + ": " + message);
  }

  void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown field");
    }
  }

  bool object(const json& parent, const std::string& key, const std::string& path) {
    if (!parent.contains(key)) return false;
    if (!parent.at(key).is_object()) {
      fail(path, "must be an object");
      return false;
    }
    return true;
  }

  template <typename T>
  void count(const json& obj, const std::string& key, const std::string& path, T& out,
             std::size_t min = 1) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min)) {
      fail(path, "must be an integer >= " + std::to_string(min));
      return;
    }
    out = static_cast<T>(v.get<long long>());
  }

  void number(const json& obj, const std::string& key, const std::string& path, double& out) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_number()) {
      fail(path, "must be a number");
      return;
    }
    out = obj.at(key).get<double>();
  }

  void text(const json& obj, const std::string& key, const std::string& path, std::string& out) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_string()) {
      fail(path, "must be a string");
      return;
    }
    out = obj.at(key).get<std::string>();
  }

  std::map<std::string, double> number_map(const json& v, const std::string& path) {
    std::map<std::string, double> out;
    if (!v.is_object()) {
      fail(path, "must be an object of numbers");
      return out;
    }
    for (const auto& [key, value] : v.items()) {
      if (!value.is_number()) {
        fail(path + "." + key, "must be a number");
      } else {
        out[key] = value.get<double>();
      }
    }
    return out;
  }

  MethodOptions options(const json& obj, const std::string& path) {
    MethodOptions o;
    check_keys(obj, path,
               {"Np", "Ninter", "Nguide", "Lookahead", "Nrep", "block_size", "Ngirf", "Nenkf",
                "Nubf", "Nparam", "Nrep_per_param", "prop", "nbhd", "rw_sd", "cooling"});
    auto opt_count = [&](const char* key, std::optional<std::size_t>& field) {
      std::size_t v = 0;
      const std::size_t before = errors.size();
      count(obj, key, path + "." + key, v);
      if (obj.contains(key) && errors.size() == before) field = v;
    };
    opt_count("Np", o.Np);
    opt_count("Ninter", o.Ninter);
    opt_count("Nguide", o.Nguide);
    opt_count("Lookahead", o.Lookahead);
    opt_count("Nrep", o.Nrep);
    opt_count("block_size", o.block_size);
    opt_count("Ngirf", o.Ngirf);
    opt_count("Nenkf", o.Nenkf);
    opt_count("Nubf", o.Nubf);
    opt_count("Nparam", o.Nparam);
    opt_count("Nrep_per_param", o.Nrep_per_param);
    if (obj.contains("prop")) {
      double p = 0.0;
      number(obj, "prop", path + ".prop", p);
      if (!(p > 0.0 && p <= 1.0)) {
        fail(path + ".prop", "must lie in (0, 1]");
      } else {
        o.prop = p;
      }
    }
    text(obj, "nbhd", path + ".nbhd", o.nbhd);
    if (o.nbhd != "adjacent" && o.nbhd != "full") fail(path + ".nbhd", "must be adjacent or full");
    if (obj.contains("rw_sd")) {
      o.rw_sd = number_map(obj.at("rw_sd"), path + ".rw_sd");
      for (const auto& [k, v] : *o.rw_sd) {
        if (!(v >= 0.0)) fail(path + ".rw_sd." + k, "must be non-negative");
      }
    }
    number(obj, "cooling", path + ".cooling", o.cooling);
    if (!(o.cooling > 0.0 && o.cooling <= 1.0)) fail(path + ".cooling", "must lie in (0, 1]");
    return o;
  }

  void require_options(const std::string& method, const MethodOptions& o, const json& raw,
                       const std::string& path) {
    for (const auto& key : required_options(method)) {
      if (!raw.contains(key)) fail(path + "." + key, "required by " + method);
    }
    if ((method == "enkf" || method == "ienkf") && o.Np && *o.Np < 2) {
      fail(path + ".Np", method + " needs at least 2 particles");
    }
    if (method == "iubf" && o.prop && o.Nparam &&
        *o.prop * static_cast<double>(*o.Nparam) < 1.0) {
      fail(path + ".prop", "prop * Nparam must be at least 1");
    }
  }
};

ModelConfig read_model(Reader& r, const json& obj) {
  ModelConfig m;
  r.check_keys(obj, "model", {"name", "units", "times", "dt", "data_seed", "data_dir", "truth"});
  if (!obj.contains("name")) {
    r.fail("model.name", "required (bm or measles)");
  } else {
    r.text(obj, "name", "model.name", m.name);
    if (m.name != "bm" && m.name != "measles") r.fail("model.name", "must be bm or measles");
  }
  std::size_t v = m.units;
  r.count(obj, "units", "model.units", v);
  m.units = v;
  v = m.times;
  r.count(obj, "times", "model.times", v);
  m.times = v;
  r.number(obj, "dt", "model.dt", m.dt);
  if (!(m.dt > 0.0)) r.fail("model.dt", "must be positive");
  if (obj.contains("data_seed")) {
    if (!obj.at("data_seed").is_number_unsigned()) {
      r.fail("model.data_seed", "must be a non-negative integer");
    } else {
      m.data_seed = obj.at("data_seed").get<std::uint64_t>();
    }
  }
  r.text(obj, "data_dir", "model.data_dir", m.data_dir);
  if (obj.contains("truth")) m.truth = r.number_map(obj.at("truth"), "model.truth");
  if (m.name == "measles") {
    if (m.units > measles::city_names().size()) r.fail("model.units", "measles has at most 5 units");
    if (obj.contains("truth")) r.fail("model.truth", "only the bm model simulates its data");
    if (obj.contains("times")) r.fail("model.times", "measles times come from the data files");
  }
  return m;
}

std::vector<double> read_grid(Reader& r, const json& v, const std::string& path) {
  std::vector<double> grid;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number()) {
        r.fail(path, "must contain numbers only");
        return {};
      }
      grid.push_back(x.get<double>());
    }
  } else if (v.is_object()) {
    r.check_keys(v, path, {"from", "to", "length"});
    double from = 0.0, to = 0.0;
    std::size_t length = 0;
    if (!v.contains("from") || !v.contains("to") || !v.contains("length")) {
      r.fail(path, "needs from, to and length");
      return {};
    }
    r.number(v, "from", path + ".from", from);
    r.number(v, "to", path + ".to", to);
    r.count(v, "length", path + ".length", length);
    for (std::size_t i = 0; i < length; ++i) {
      grid.push_back(length == 1 ? from
                                 : from + (to - from) * static_cast<double>(i) /
                                              static_cast<double>(length - 1));
    }
  } else {
    r.fail(path, "must be a list or {from, to, length}");
  }
  if (grid.empty()) r.fail(path, "must not be empty");
  return grid;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& command,
                              const Overrides& overrides) {
  json root;
  try {
    root = json::parse(json_text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config must be a JSON object");

  Reader r;
  ExperimentConfig c;
  c.command = command;
  static const std::set<std::string> kCommands = {"simulate", "filter", "search", "profile", "mcap"};
  if (!kCommands.count(command)) r.fail("command", "unknown command '" + command + "'");
  r.check_keys(root, "",
               {"command", "model", "method", "options", "params", "replicates", "nsim", "seed",
                "threads", "output", "record_wall_time", "sweep", "profile", "mcap"});
  if (root.contains("command")) {
    std::string named;
    r.text(root, "command", "command", named);
    if (!named.empty() && named != command) {
      r.fail("command", "config is for '" + named + "' but '" + command + "' was requested");
    }
  }

  const bool needs_model = command != "mcap";
  if (r.object(root, "model", "model")) {
    c.model = read_model(r, root.at("model"));
  } else if (needs_model) {
    r.fail("model", "required");
  }

  r.count(root, "replicates", "replicates", c.replicates);
  r.count(root, "nsim", "nsim", c.nsim);
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned()) {
      r.fail("seed", "must be a non-negative integer");
    } else {
      c.seed = root.at("seed").get<std::uint64_t>();
    }
  }
  std::size_t threads = 1;
  r.count(root, "threads", "threads", threads);
  c.threads = static_cast<int>(threads);
  r.text(root, "output", "output", c.output);
  if (root.contains("record_wall_time")) {
    if (!root.at("record_wall_time").is_boolean()) {
      r.fail("record_wall_time", "must be true or false");
    } else {
      c.record_wall_time = root.at("record_wall_time").get<bool>();
    }
  }
  if (root.contains("params")) c.params = r.number_map(root.at("params"), "params");

  const json empty = json::object();
  const json& raw_options = root.contains("options") ? root.at("options") : empty;
  if (!raw_options.is_object()) r.fail("options", "must be an object");
  r.text(root, "method", "method", c.method);

  if (command == "filter" && !root.contains("sweep")) {
    if (c.method.empty()) {
      r.fail("method", "required");
    } else if (!kFilterMethods.count(c.method)) {
      r.fail("method", "filter needs one of pfilter, girf, abf, enkf, bpfilter");
    }
  }
  if (command == "search" || command == "profile") {
    if (c.method.empty()) {
      r.fail("method", "required");
    } else if (!kSearchMethods.count(c.method)) {
      r.fail("method", command + " needs one of igirf, ienkf, iubf");
    }
  }
  if (raw_options.is_object()) {
    c.options = r.options(raw_options, "options");
    if (!c.method.empty() && command != "simulate" && command != "mcap") {
      r.require_options(c.method, c.options, raw_options, "options");
    }
  }

  if (root.contains("sweep")) {
    if (command != "filter") r.fail("sweep", "only valid for the filter command");
    if (r.object(root, "sweep", "sweep")) {
      const auto& s = root.at("sweep");
      SweepConfig sweep;
      r.check_keys(s, "sweep", {"units", "replicates", "methods"});
      if (!s.contains("units") || !s.at("units").is_array() || s.at("units").empty()) {
        r.fail("sweep.units", "must be a non-empty list of unit counts");
      } else {
        for (const auto& u : s.at("units")) {
          if (!u.is_number_integer() || u.get<long long>() < 1) {
            r.fail("sweep.units", "entries must be positive integers");
          } else {
            sweep.units.push_back(u.get<std::size_t>());
          }
        }
      }
      r.count(s, "replicates", "sweep.replicates", sweep.replicates);
      if (!s.contains("methods") || !s.at("methods").is_object() || s.at("methods").empty()) {
        r.fail("sweep.methods", "must map method names to their options");
      } else {
        for (const auto& [name, opts] : s.at("methods").items()) {
          const std::string path = "sweep.methods." + name;
          if (!kFilterMethods.count(name)) {
            r.fail(path, "not a filter method");
            continue;
          }
          if (!opts.is_object()) {
            r.fail(path, "must be an object");
            continue;
          }
          sweep.methods.push_back(name);
          sweep.options[name] = r.options(opts, path);
          r.require_options(name, sweep.options[name], opts, path);
        }
      }
      if (c.model.name == "measles") r.fail("sweep", "the scaling sweep uses the bm model");
      c.sweep = sweep;
    }
  }

  if (command == "profile") {
    if (!r.object(root, "profile", "profile")) {
      r.fail("profile", "required");
    } else {
      const auto& p = root.at("profile");
      ProfileConfig prof;
      r.check_keys(p, "profile", {"parameter", "grid", "lower", "upper", "nprof", "eval"});
      if (!p.contains("parameter")) r.fail("profile.parameter", "required");
      r.text(p, "parameter", "profile.parameter", prof.parameter);
      if (!p.contains("grid")) {
        r.fail("profile.grid", "required");
      } else {
        prof.grid = read_grid(r, p.at("grid"), "profile.grid");
      }
      if (p.contains("lower")) prof.lower = r.number_map(p.at("lower"), "profile.lower");
      if (p.contains("upper")) prof.upper = r.number_map(p.at("upper"), "profile.upper");
      std::set<std::string> lk, uk;
      for (const auto& [k, v] : prof.lower) lk.insert(k);
      for (const auto& [k, v] : prof.upper) uk.insert(k);
      if (lk != uk) r.fail("profile.upper", "must name the same parameters as profile.lower");
      for (const auto& [k, lo] : prof.lower) {
        auto it = prof.upper.find(k);
        if (it != prof.upper.end() && !(lo <= it->second)) {
          r.fail("profile.lower." + k, "exceeds the upper bound");
        }
      }
      if (lk.count(prof.parameter)) {
        r.fail("profile.lower." + prof.parameter, "the profiled parameter cannot be in the box");
      }
      r.count(p, "nprof", "profile.nprof", prof.nprof);
      if (p.contains("eval")) {
        if (!p.at("eval").is_object()) {
          r.fail("profile.eval", "must be an object");
        } else {
          json ev = p.at("eval");
          if (ev.contains("method")) {
            r.text(ev, "method", "profile.eval.method", prof.eval_method);
            ev.erase("method");
          }
          if (ev.contains("replicates")) {
            r.count(ev, "replicates", "profile.eval.replicates", prof.eval_replicates);
            ev.erase("replicates");
          }
          if (!kFilterMethods.count(prof.eval_method)) {
            r.fail("profile.eval.method", "must be a filter method");
          }
          prof.eval_options = r.options(ev, "profile.eval");
          r.require_options(prof.eval_method, prof.eval_options, ev, "profile.eval");
        }
      } else {
        r.fail("profile.eval", "required (method and options used to evaluate each search result)");
      }
      c.profile = prof;
    }
  }

  if (command == "mcap") {
    if (!r.object(root, "mcap", "mcap")) {
      r.fail("mcap", "required");
    } else {
      const auto& m = root.at("mcap");
      McapConfig mc;
      r.check_keys(m, "mcap", {"input", "parameter", "level", "span"});
      if (!m.contains("input")) r.fail("mcap.input", "required");
      if (!m.contains("parameter")) r.fail("mcap.parameter", "required");
      r.text(m, "input", "mcap.input", mc.input);
      r.text(m, "parameter", "mcap.parameter", mc.parameter);
      r.number(m, "level", "mcap.level", mc.level);
      r.number(m, "span", "mcap.span", mc.span);
      if (!(mc.level > 0.0 && mc.level < 1.0)) r.fail("mcap.level", "must lie in (0, 1)");
      if (!(mc.span > 0.0)) r.fail("mcap.span", "must be positive");
      c.mcap = mc;
    }
  }

  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.threads) {
    if (*overrides.threads < 1) r.fail("--threads", "must be at least 1");
    c.threads = *overrides.threads;
  }
  if (overrides.out) c.output = *overrides.out;

  if (!r.errors.empty()) {
    std::ostringstream msg;
    msg << "invalid config:";
    for (const auto& e : r.errors) msg << "\n  " << e;
    throw ValidationError(msg.str());
  }
  return c;
}

SpatPompModel build_model(const ModelConfig& config) {
  if (config.name == "bm") {
    ParameterVector truth = bm::default_params(config.units);
    for (const auto& [k, v] : config.truth) {
      if (!truth.contains(k)) throw ValidationError("model.truth: unknown parameter '" + k + "'");
      truth.set(k, v);
    }
    return bm::build({config.units, config.times, config.dt}, truth, RngKey{config.data_seed, 0});
  }
  if (config.name == "measles") {
    const std::string dir = config.data_dir.empty() ? SPATPOMP_DATA_DIR : config.data_dir;
    return measles::build_packaged(config.units, dir);
  }
  throw ValidationError("unknown model '" + config.name + "'");
}

ParameterVector resolve_params(const SpatPompModel& model,
                               const std::map<std::string, double>& overrides) {
  ParameterVector theta = model.params();
  std::string unknown;
  for (const auto& [k, v] : overrides) {
    if (!theta.contains(k)) {
      unknown += (unknown.empty() ? "" : ", ") + k;
    } else {
      theta.set(k, v);
    }
  }
  if (!unknown.empty()) throw ValidationError("params: unknown parameter(s) " + unknown);
  return theta;
}

}  // namespace spatpomp::cli
