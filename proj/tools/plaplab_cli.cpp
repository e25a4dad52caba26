// Experiment runner: every check as a subcommand, JSON config in,
// report.json + CSV tables out. Exit code 0 iff all configured checks pass.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plaplab/pipeline.hpp"

using namespace plaplab;

namespace {

struct Cli {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  bool have_seed = false, have_p = false, have_q = false, have_eps = false;
  std::uint64_t seed = 0;
  double p = 0, q = 0, eps = 0;

  RunConfig resolve() const {
    Json cfg = resolve_config_json(config_path, overrides);
    if (have_seed) cfg["seed"] = seed;
    if (have_p) cfg["p"] = p;
    if (have_q) cfg["q"] = q;
    if (have_eps) cfg["eps"] = eps;
    return make_run_config(cfg, config_path.empty() ? "config" : config_path);
  }
};

void add_common(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--config", cli.config_path, "JSON config file (overlays the defaults)");
  cmd->add_option("--out", cli.out_dir, "output directory (report.json, tables/, fields/)");
  cmd->add_option("--seed", cli.seed, "random seed")->each([&](const std::string&) {
    cli.have_seed = true;
  });
  cmd->add_option("--p", cli.p, "exponent p")->each([&](const std::string&) {
    cli.have_p = true;
  });
  cmd->add_option("--q", cli.q, "envelope exponent q")->each([&](const std::string&) {
    cli.have_q = true;
  });
  cmd->add_option("--eps", cli.eps, "envelope parameter eps")->each([&](const std::string&) {
    cli.have_eps = true;
  });
  cmd->add_option("--override", cli.overrides,
                  "config override as dotted key=value (repeatable)");
}

int run_command(const std::string& name, const Cli& cli,
                VerificationReport (*runner)(const RunConfig&, const Outputs&)) {
  RunConfig rc = cli.resolve();
  if (name == "singular")
    validate_singular(rc, cli.config_path.empty() ? "config" : cli.config_path);
  Outputs out = Outputs::at(cli.out_dir);
  VerificationReport rep = runner(rc, out);
  out.write_tables(rep);
  for (const auto& c : rep.checks) {
    std::printf("[%s] %s (violations=%zu", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.violations.size());
    if (std::isfinite(c.min_residual)) std::printf(", min_residual=%.3g", c.min_residual);
    std::printf(")\n");
  }
  if (out.enabled) {
    std::ofstream os(out.dir / "report.json", std::ios::binary);
    os << run_report_json(name, rc, rep).dump(2) << '\n';
  }
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p-Laplace inf-convolution laboratory"};
  app.require_subcommand(1);
  Cli cli;

  struct Sub {
    const char* name;
    const char* desc;
    VerificationReport (*runner)(const RunConfig&, const Outputs&);
  };
  const Sub subs[] = {
      {"envelope", "compute u_eps, emit fields and summary", run_envelope_cmd},
      {"lemmas", "envelope property suite (monotonicity, bounds, argmin checks)",
       run_lemmas_cmd},
      {"weak", "supersolution scan over the bump family", run_weak_cmd},
      {"identity", "three-exponent pointwise identity sweep", run_identity_cmd},
      {"singular", "full 1<p<2 pipeline: envelope, bounds, sign condition, weak form",
       run_singular_cmd},
      {"sweep", "eps/delta/h convergence studies", run_sweep_cmd},
      {"bench", "oracle vs fast envelope timing table", run_bench_cmd},
  };
  for (const auto& s : subs) add_common(app.add_subcommand(s.name, s.desc), cli);

  CLI::App* gal = app.add_subcommand("gallery", "gallery utilities");
  CLI::App* gal_list = gal->add_subcommand("list", "one line per entry: name dim p-range role f");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gal_list->parsed()) {
      std::fputs(gallery_list_text().c_str(), stdout);
      return 0;
    }
    for (const auto& s : subs)
      if (app.get_subcommand(s.name)->parsed()) return run_command(s.name, cli, s.runner);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
