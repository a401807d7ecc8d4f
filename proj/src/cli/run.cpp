#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "spatpomp/cli.hpp"
#include "spatpomp/errors.hpp"

namespace spatpomp::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatiotemporal POMP experiments: simulate, filter, search, profile, mcap"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;
  const char* names[] = {"simulate", "filter", "search", "profile", "mcap"};
  const char* about[] = {"simulate states and observations", "estimate the log likelihood",
                         "iterated filtering search", "profile likelihood over a grid",
                         "Monte Carlo adjusted profile interval"};
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> seed_opts, thread_opts, out_opts;
  for (int i = 0; i < 5; ++i) {
    auto* sub = app.add_subcommand(names[i], about[i]);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    seed_opts.push_back(sub->add_option("--seed", seed, "random seed"));
    thread_opts.push_back(sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber));
    out_opts.push_back(sub->add_option("--out", out_dir, "output directory"));
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? 0 : 2;
  }

  try {
    std::size_t which = 0;
    while (!subs[which]->parsed()) ++which;
    std::ifstream in(config_path);
    if (!in) throw ValidationError("cannot read config '" + config_path + "'");
    std::stringstream text;
    text << in.rdbuf();
    Overrides ov;
    if (seed_opts[which]->count()) ov.seed = seed;
    if (thread_opts[which]->count()) ov.threads = threads;
    if (out_opts[which]->count()) ov.out = out_dir;
    const auto config = parse_config(text.str(), names[which], ov);
    std::vector<std::string> files;
    switch (which) {
      case 0: files = cmd_simulate(config); break;
      case 1: files = cmd_filter(config); break;
      case 2: files = cmd_search(config); break;
      case 3: files = cmd_profile(config); break;
      default: files = cmd_mcap(config); break;
    }
    for (const auto& f : files) out << f << "\n";
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const CapabilityError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace spatpomp::cli
