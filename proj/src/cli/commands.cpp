#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>

#include "spatpomp/cli.hpp"
#include "spatpomp/csv.hpp"
#include "spatpomp/errors.hpp"
#include "spatpomp/filters.hpp"
#include "spatpomp/inference.hpp"
#include "spatpomp/models/bm.hpp"

namespace spatpomp::cli {

namespace {

using Clock = std::chrono::steady_clock;

std::string output_path(const ExperimentConfig& c, const std::string& file) {
  std::error_code ec;
  std::filesystem::create_directories(c.output, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + c.output + "': " + ec.message());
  return (std::filesystem::path(c.output) / file).string();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

void close_output(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw std::runtime_error("error while writing '" + path + "'");
}

std::string count(std::size_t v) { return std::to_string(v); }

std::vector<std::string> result_header(const ParameterVector& theta) {
  std::vector<std::string> h = {"run_id", "method"};
  h.insert(h.end(), theta.names().begin(), theta.names().end());
  for (const char* s : {"loglik", "loglik.se", "wall_time", "n_failures"}) h.emplace_back(s);
  return h;
}

struct ResultRow {
  std::string run_id;
  std::string method;
  ParameterVector theta;
  double loglik = 0.0;
  std::optional<double> se;
  std::optional<double> wall_time;
  std::size_t n_failures = 0;
};

void write_result(std::ostream& out, const ResultRow& row) {
  std::vector<std::string> f = {row.run_id, row.method};
  for (double v : row.theta.values()) f.push_back(csv::format(v));
  f.push_back(csv::format(row.loglik));
  f.push_back(row.se ? csv::format(*row.se) : "NA");
  f.push_back(row.wall_time ? csv::format(*row.wall_time) : "NA");
  f.push_back(count(row.n_failures));
  csv::write_row(out, f);
}

std::optional<double> elapsed(const ExperimentConfig& c, Clock::time_point start) {
  if (!c.record_wall_time) return std::nullopt;
  return std::chrono::duration<double>(Clock::now() - start).count();
}

GirfOptions girf_options(const MethodOptions& o) {
  return {o.Np.value_or(0), o.Ninter.value_or(0), o.Nguide.value_or(0), o.Lookahead.value_or(0)};
}

PerturbationSpec perturbation(const MethodOptions& o) {
  PerturbationSpec rw;
  if (o.rw_sd) {
    for (const auto& [k, v] : *o.rw_sd) {
      if (k == "*") {
        rw.fallback = v;
      } else {
        rw.sd[k] = v;
      }
    }
  }
  return rw;
}

using C = SpatPompModel::Component;

// Checks everything about a method that depends on the model, so that
// mistakes surface before any filtering starts.
void check_method(const SpatPompModel& model, const std::string& method, const MethodOptions& o) {
  const std::size_t N = model.num_times();
  if (method == "pfilter" || method == "bpfilter" || method == "abf" || method == "iubf") {
    model.require(C::Rinit, method);
    model.require(C::Rprocess, method);
    model.require(C::DunitMeasure, method);
  }
  if (method == "bpfilter") BlockPartition::by_size(model.units(), *o.block_size).validate(model.units());
  if (method == "abf" || method == "iubf") {
    NeighborhoodSpec::preset(o.nbhd, model.units()).validate(model.units(), N);
  }
  if (method == "enkf" || method == "ienkf") {
    model.require(C::Rinit, method);
    model.require(C::Rprocess, method);
    model.require(C::EunitMeasure, method);
    model.require(C::VunitMeasure, method);
  }
  if (method == "girf" || method == "igirf") {
    model.require(C::Rinit, method);
    model.require(C::Rprocess, method);
    model.require(C::DunitMeasure, method);
    model.require(C::Skeleton, method);
    girf_options(o).validate(N);
  }
  if (method == "igirf" || method == "ienkf" || method == "iubf") perturbation(o).resolve(model);
}

FilterResult run_filter(const SpatPompModel& model, const ParameterVector& theta,
                        const std::string& method, const MethodOptions& o, const RngKey& key,
                        int threads) {
  if (method == "pfilter") return pfilter(model, theta, *o.Np, key, threads);
  if (method == "enkf") return enkf(model, theta, *o.Np, key, threads);
  if (method == "bpfilter") {
    return bpfilter(model, theta, *o.Np, BlockPartition::by_size(model.units(), *o.block_size), key,
                    threads);
  }
  if (method == "girf") return girf(model, theta, girf_options(o), key, threads);
  if (method == "abf") {
    return abf(model, theta, *o.Nrep, *o.Np, NeighborhoodSpec::preset(o.nbhd, model.units()), key,
               threads);
  }
  throw ValidationError("unknown filter method '" + method + "'");
}

SearchResult run_search(const SpatPompModel& model, const ParameterVector& theta0,
                        const std::string& method, const MethodOptions& o,
                        const PerturbationSpec& rw, const RngKey& key, int threads) {
  const CoolingSchedule cooling{o.cooling};
  if (method == "igirf") return igirf(model, theta0, *o.Ngirf, girf_options(o), rw, cooling, key, threads);
  if (method == "ienkf") return ienkf(model, theta0, *o.Nenkf, *o.Np, rw, cooling, key, threads);
  if (method == "iubf") {
    IubfOptions io;
    io.Nubf = *o.Nubf;
    io.Nparam = *o.Nparam;
    io.Nrep_per_param = *o.Nrep_per_param;
    io.prop = *o.prop;
    io.nbhd = NeighborhoodSpec::preset(o.nbhd, model.units());
    return iubf(model, theta0, io, rw, cooling, key, threads);
  }
  throw ValidationError("unknown search method '" + method + "'");
}

}  // namespace

std::vector<std::string> cmd_simulate(const ExperimentConfig& c) {
  const auto model = build_model(c.model);
  const auto theta = resolve_params(model, c.params);
  const auto sims = simulate(model, theta, RngKey{c.seed, 0}, c.nsim);
  const auto& units = model.obs().unit_names;
  const auto& states = model.unit_statenames();
  const std::size_t K = model.unit_dim();
  std::vector<std::string> written;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const std::string suffix = c.nsim > 1 ? "_" + std::to_string(i + 1) : "";
    const auto spath = output_path(c, "states" + suffix + ".csv");
    const auto opath = output_path(c, "obs" + suffix + ".csv");
    auto sout = open_output(spath);
    csv::write_row(sout, {"time", "unit", "variable", "value"});
    for (std::size_t n = 0; n <= model.num_times(); ++n) {
      for (std::size_t u = 0; u < units.size(); ++u) {
        for (std::size_t k = 0; k < K; ++k) {
          csv::write_row(sout, {csv::format(model.grid().at(n)), units[u], states[k],
                                csv::format(sims[i].states(static_cast<Eigen::Index>(u * K + k),
                                                           static_cast<Eigen::Index>(n)))});
        }
      }
    }
    close_output(sout, spath);
    auto oout = open_output(opath);
    csv::write_row(oout, {"time", "unit", "variable", "value"});
    for (std::size_t n = 1; n <= model.num_times(); ++n) {
      for (std::size_t u = 0; u < units.size(); ++u) {
        csv::write_row(oout, {csv::format(model.grid().at(n)), units[u], model.obs().unit_obsnames.front(),
                              csv::format(sims[i].obs(static_cast<Eigen::Index>(u),
                                                      static_cast<Eigen::Index>(n - 1)))});
      }
    }
    close_output(oout, opath);
    written.push_back(spath);
    written.push_back(opath);
  }
  return written;
}

std::vector<std::string> cmd_filter(const ExperimentConfig& c) {
  if (c.sweep) {
    const auto& sw = *c.sweep;
    std::vector<std::pair<SpatPompModel, ParameterVector>> models;
    for (std::size_t U : sw.units) {
      ModelConfig mc = c.model;
      mc.units = U;
      auto model = build_model(mc);
      auto theta = resolve_params(model, c.params);
      for (const auto& m : sw.methods) check_method(model, m, sw.options.at(m));
      models.emplace_back(std::move(model), std::move(theta));
    }
    const auto path = output_path(c, "sweep.csv");
    auto out = open_output(path);
    csv::write_row(out, {"method", "U", "rep", "loglik", "exact_kf_loglik"});
    for (const auto& [model, theta] : models) {
      const double exact = bm::exact_loglik(model, theta);
      for (const auto& m : sw.methods) {
        for (std::size_t r = 0; r < sw.replicates; ++r) {
          const auto fr = run_filter(model, theta, m, sw.options.at(m), RngKey{c.seed, r}, c.threads);
          csv::write_row(out, {m, count(model.units()), count(r + 1), csv::format(fr.loglik),
                               csv::format(exact)});
        }
      }
    }
    close_output(out, path);
    return {path};
  }

  const auto model = build_model(c.model);
  const auto theta = resolve_params(model, c.params);
  check_method(model, c.method, c.options);
  const auto path = output_path(c, "results.csv");
  auto out = open_output(path);
  csv::write_row(out, result_header(theta));
  std::vector<double> ll;
  std::size_t failures = 0;
  const auto start_all = Clock::now();
  for (std::size_t r = 0; r < c.replicates; ++r) {
    const auto start = Clock::now();
    const auto fr = run_filter(model, theta, c.method, c.options, RngKey{c.seed, r}, c.threads);
    ll.push_back(fr.loglik);
    failures += fr.n_failures;
    write_result(out, {count(r + 1), c.method, theta, fr.loglik, std::nullopt, elapsed(c, start),
                       fr.n_failures});
  }
  if (c.replicates > 1) {
    const auto agg = logmeanexp(ll, true);
    write_result(out, {"aggregate", c.method, theta, agg.value, agg.se, elapsed(c, start_all),
                       failures});
  }
  close_output(out, path);
  return {path};
}

std::vector<std::string> cmd_search(const ExperimentConfig& c) {
  const auto model = build_model(c.model);
  const auto theta0 = resolve_params(model, c.params);
  check_method(model, c.method, c.options);
  const auto start = Clock::now();
  const auto res = run_search(model, theta0, c.method, c.options, perturbation(c.options),
                              RngKey{c.seed, 0}, c.threads);
  const auto tpath = output_path(c, "trace.csv");
  auto tout = open_output(tpath);
  std::vector<std::string> header = {"iteration"};
  header.insert(header.end(), theta0.names().begin(), theta0.names().end());
  header.emplace_back("loglik");
  csv::write_row(tout, header);
  for (const auto& row : res.trace) {
    std::vector<std::string> f = {count(row.iteration)};
    for (double v : row.theta.values()) f.push_back(csv::format(v));
    f.push_back(csv::format(row.loglik));
    csv::write_row(tout, f);
  }
  close_output(tout, tpath);
  const auto fpath = output_path(c, "final_params.csv");
  auto fout = open_output(fpath);
  csv::write_row(fout, result_header(theta0));
  write_result(fout, {"1", c.method, res.estimate, res.trace.back().loglik, std::nullopt,
                      elapsed(c, start), res.n_failures});
  close_output(fout, fpath);
  return {tpath, fpath};
}

std::vector<std::string> cmd_profile(const ExperimentConfig& c) {
  const auto& pc = *c.profile;
  const auto model = build_model(c.model);
  const auto base = resolve_params(model, c.params);
  if (!base.contains(pc.parameter)) {
    throw ValidationError("profile.parameter: unknown parameter '" + pc.parameter + "'");
  }
  check_method(model, c.method, c.options);
  check_method(model, pc.eval_method, pc.eval_options);
  ParameterVector lower, upper;
  for (const auto& [k, v] : pc.lower) {
    if (!base.contains(k)) throw ValidationError("profile.lower: unknown parameter '" + k + "'");
    lower.add(k, v);
    upper.add(k, pc.upper.at(k));
  }
  const auto design = profile_design(pc.parameter, pc.grid, base, lower, upper, model.transform(),
                                     pc.nprof, RngKey{c.seed, 0});
  auto rw = perturbation(c.options);
  rw.sd[pc.parameter] = 0.0;

  const auto path = output_path(c, "profile.csv");
  auto out = open_output(path);
  csv::write_row(out, result_header(base));
  for (std::size_t i = 0; i < design.starts.size(); ++i) {
    const auto start = Clock::now();
    const RngKey key{c.seed, i + 1};
    const auto res = run_search(model, design.starts[i], c.method, c.options, rw, key.child(1), c.threads);
    std::vector<double> ll;
    std::size_t failures = res.n_failures;
    for (std::size_t r = 0; r < pc.eval_replicates; ++r) {
      const auto fr = run_filter(model, res.estimate, pc.eval_method, pc.eval_options,
                                 key.child(2 + r), c.threads);
      ll.push_back(fr.loglik);
      failures += fr.n_failures;
    }
    const auto agg = logmeanexp(ll, ll.size() > 1);
    write_result(out, {count(i + 1), c.method, res.estimate, agg.value, agg.se, elapsed(c, start),
                       failures});
  }
  close_output(out, path);
  return {path};
}

std::vector<std::string> cmd_mcap(const ExperimentConfig& c) {
  const auto& mc = *c.mcap;
  if (!std::filesystem::exists(mc.input)) throw ValidationError("mcap.input: no such file '" + mc.input + "'");
  const auto table = csv::read(mc.input);
  const auto pcol = table.column(mc.parameter);
  const auto lcol = table.column("loglik");
  std::vector<double> param, ll;
  for (const auto& row : table.rows) {
    param.push_back(csv::parse_number(row.at(pcol)));
    ll.push_back(csv::parse_number(row.at(lcol)));
  }
  if (table.rows.size() < 5) throw ValidationError("mcap needs at least 5 profile points");
  const auto res = mcap(ll, param, mc.level, mc.span);
  const auto path = output_path(c, "mcap.csv");
  auto out = open_output(path);
  csv::write_row(out, {mc.parameter, "smoothed", "mle", "ci_lower", "ci_upper", "cutoff", "se_stat",
                       "se_mc", "one_sided"});
  for (std::size_t g = 0; g < res.grid.size(); ++g) {
    csv::write_row(out, {csv::format(res.grid[g]), csv::format(res.smoothed[g]),
                         csv::format(res.maximizer), csv::format(res.lo), csv::format(res.hi),
                         csv::format(res.cutoff), csv::format(res.se_stat), csv::format(res.se_mc),
                         res.one_sided ? "TRUE" : "FALSE"});
  }
  close_output(out, path);
  return {path};
}

}  // namespace spatpomp::cli
