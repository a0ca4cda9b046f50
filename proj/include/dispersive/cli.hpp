#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dispersive/io.hpp"

namespace dispersive::cli {

namespace detail {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::string verify_dir;
};

inline io::json load_document(const Options& opt) {
  std::string text;
  try {
    text = io::read_text(opt.config);
  } catch (const std::exception&) {
    throw ConfigError("", "cannot read config file '" + opt.config + "'");
  }
  io::json doc;
  try {
    doc = io::json::parse(text);
  } catch (const io::json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  if (opt.seed && doc.is_object()) doc["seed"] = *opt.seed;
  return doc;
}

inline int run_mode(const Options& opt, io::Mode mode, std::ostream& out) {
  const auto cfg = io::parse_config(load_document(opt));
  const auto dir = io::resolve_output_dir(opt.out, cfg);
  const auto result = io::run_job(cfg, dir, mode);
  if (!opt.quiet) out << result.summary << "\n";
  return result.exit_code;
}

inline int sweep_mode(const Options& opt, std::ostream& out) {
  const auto cfg = io::parse_config(load_document(opt));
  if (!cfg.sweep) throw ConfigError("sweep", "the sweep subcommand needs a sweep section");
  const auto dir = io::resolve_output_dir(opt.out, cfg);
  const auto result = io::run_sweep(cfg, dir);
  if (!opt.quiet)
    for (std::size_t i = 0; i < result.jobs.size(); ++i)
      out << "job " << i << ": exit " << result.jobs[i].exit_code << " " << result.jobs[i].summary << "\n";
  return result.exit_code;
}

inline int verify_mode(const Options& opt, std::ostream& out, std::ostream& err) {
  const std::string dir = !opt.verify_dir.empty() ? opt.verify_dir : opt.out;
  if (dir.empty()) {
    err << "verify: give a directory (positional or --out)\n";
    return io::kExitValidation;
  }
  const auto problems = io::verify_directory(dir);
  for (const auto& p : problems) err << "verify: " << p << "\n";
  if (!opt.quiet && problems.empty()) out << "verified " << dir << "\n";
  return problems.empty() ? io::kExitOk : io::kExitFailure;
}

}  // namespace detail

/// Entry point for the `dispersive` binary. Returns the process exit code.
inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Pseudospectral solver and function-space toolkit for u_t + (n(u))_x + L u_x = 0"};
  app.require_subcommand(1);
  detail::Options opt;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opt.config, "JSON configuration file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", seed, "override the configuration seed");
    sub->add_flag("--quiet", opt.quiet, "suppress the summary line");
  };
  auto* run = app.add_subcommand("run", "evolve the configured problem (and its experiment, if any)");
  auto* experiment = app.add_subcommand("experiment", "run only the configured property-lab experiment");
  auto* sweep = app.add_subcommand("sweep", "run the jobs of a sweep section on worker threads");
  auto* verify = app.add_subcommand("verify", "re-check the hashes of an output directory");
  add_common(run, true);
  add_common(experiment, true);
  add_common(sweep, true);
  add_common(verify, false);
  verify->add_option("dir", opt.verify_dir, "output directory to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return io::kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return io::kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return io::kExitValidation;
  }
  for (auto* sub : {run, experiment, sweep, verify})
    if (sub->count("--seed")) opt.seed = seed;

  try {
    if (*run) return detail::run_mode(opt, io::Mode::run, out);
    if (*experiment) return detail::run_mode(opt, io::Mode::experiment, out);
    if (*sweep) return detail::sweep_mode(opt, out);
    return detail::verify_mode(opt, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return io::kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return io::kExitFailure;
  }
}

}  // namespace dispersive::cli
