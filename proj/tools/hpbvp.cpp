#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "hpbvp/cli.hpp"
#include "hpbvp/errors.hpp"

namespace {

int do_run(const std::string& config_path, const hpbvp::cli::RunOptions& opts) {
  const auto cfg = hpbvp::cli::load_config(config_path);
  const auto res = hpbvp::cli::run(cfg, opts);
  std::cout << hpbvp::cli::to_string(cfg.task) << ": " << (res.status == 0 ? "PASS" : "FAIL") << "\n"
            << "table    " << res.table_path << "\n"
            << "manifest " << res.manifest_path << "\n";
  if (!res.certificate_path.empty()) std::cout << "certificate " << res.certificate_path << "\n";
  std::cout << res.summary.dump() << "\n";
  return res.status;
}

int do_replay(const std::string& cert_path) {
  const auto r = hpbvp::cli::replay_certificate_file(cert_path);
  for (const auto& f : r.failures) std::cout << "fail: " << f << "\n";
  std::cout << "replay: " << (r.pass ? "PASS" : "FAIL") << " (" << r.margins.size() << " grid points)\n";
  return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stable subspaces, symmetrizer certificates and Evans scans for hyperbolic-parabolic BVPs"};
  app.require_subcommand(0, 1);

  std::string config_path;
  hpbvp::cli::RunOptions opts;
  std::vector<std::string> overrides;
  auto add_run_flags = [&](CLI::App* a) {
    a->add_option("config", config_path, "run configuration (JSON)")->required();
    a->add_option("--output-dir,-o", opts.output_dir, "directory for tables and manifests");
    a->add_option("--workers,-j", opts.workers, "worker threads, 0 = number of processors");
    a->add_option("--seed", opts.seed, "seed for randomized sampling");
    a->add_option("--tolerance", overrides, "override a tolerance, key=value (repeatable)");
  };
  auto* run_cmd = app.add_subcommand("run", "run a configured task");
  add_run_flags(run_cmd);

  std::string cert_path;
  auto* replay_cmd = app.add_subcommand("replay", "re-verify a stored certificate");
  replay_cmd->add_option("certificate", cert_path, "certificate file")->required();

  auto* keys_cmd = app.add_subcommand("tolerances", "list tolerance keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw hpbvp::cli::ConfigError("--tolerance " + o + ": expected key=value");
      double v = 0.0;
      try {
        v = std::stod(o.substr(eq + 1));
      } catch (const std::exception&) {
        throw hpbvp::cli::ConfigError("--tolerance " + o + ": value is not a number");
      }
      hpbvp::cli::Tolerances probe;
      hpbvp::cli::set_tolerance(probe, o.substr(0, eq), v);
      opts.tolerance_overrides[o.substr(0, eq)] = v;
    }
    if (*run_cmd) return do_run(config_path, opts);
    if (*replay_cmd) return do_replay(cert_path);
    if (*keys_cmd) {
      for (const auto& k : hpbvp::cli::tolerance_keys()) std::cout << k << "\n";
      return 0;
    }
    std::cout << app.help();
    return 2;
  } catch (const hpbvp::cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
