// weakinv command-line front end: classify, verify, decompose, list.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <weakinv/commands.hpp>
#include <weakinv/weakinv.hpp>

namespace {

std::pair<std::string, double> parse_tol(const std::string & s)
{
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) { throw weakinv::ConfigurationError("--tol expects name=value, got '" + s + "'"); }
  try {
    std::size_t used = 0;
    double v         = std::stod(s.substr(eq + 1), &used);
    if (used != s.size() - eq - 1) { throw std::invalid_argument(s); }
    return {s.substr(0, eq), v};
  } catch (const std::logic_error &) {
    throw weakinv::ConfigurationError("--tol: cannot parse value in '" + s + "'");
  }
}

Eigen::VectorXd to_vector(const std::vector<double> & v)
{
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Weak invariance of vector fields under Lie group actions"};
  app.require_subcommand(1);
  app.fallthrough();

  std::int64_t seed = 0;
  std::string out_dir = ".";
  std::vector<std::string> tols;
  bool json = false;
  auto * seed_opt = app.add_option("--seed", seed, "override the scenario sampling seed");
  app.add_option("--out", out_dir, "directory for JSON reports and CSV trajectories");
  app.add_option("--tol", tols, "tolerance override name=value (repeatable)")->take_all();
  app.add_flag("--json", json, "print the JSON report instead of the table");

  std::string file;
  auto * classify = app.add_subcommand("classify", "classify the scenario field (exit 0 Strong/Weak, 2 PartialOnly, 3 None)");
  classify->add_option("file", file, "scenario file or bundled scenario name")->required();
  auto * verify = app.add_subcommand("verify", "run the property battery (exit 4 if a check fails)");
  verify->add_option("file", file, "scenario file or bundled scenario name")->required();
  auto * decompose = app.add_subcommand("decompose", "integrate the cascade and compare with the direct flow");
  decompose->add_option("file", file, "scenario file or bundled scenario name")->required();
  double t = 0.0;
  std::vector<double> y0;
  std::vector<double> g0;
  auto * t_opt  = decompose->add_option("--t", t, "integration time (default from the scenario)");
  auto * y0_opt = decompose->add_option("--y0", y0, "initial quotient point")->expected(0, -1);
  auto * g0_opt = decompose->add_option("--g0", g0, "initial group element as algebra coordinates")->expected(1, -1);
  app.add_subcommand("list", "list builtin groups, actions, field families and bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return weakinv::exit_code::error;
  }

  try {
    weakinv::CommandOptions opts;
    if (seed_opt->count() > 0) {
      if (seed < 0) { throw weakinv::ConfigurationError("--seed must be non-negative"); }
      opts.seed = static_cast<std::uint64_t>(seed);
    }
    opts.out_dir = out_dir;
    opts.json    = json;
    for (const auto & s : tols) { opts.tolerances.push_back(parse_tol(s)); }

    if (app.got_subcommand("list")) {
      weakinv::cmd_list(std::cout);
      return weakinv::exit_code::ok;
    }

    auto sc = weakinv::load_scenario_file(weakinv::resolve_scenario(file));
    weakinv::RunReport rep;
    if (app.got_subcommand("classify")) {
      rep = weakinv::cmd_classify(std::move(sc), opts);
    } else if (app.got_subcommand("verify")) {
      rep = weakinv::cmd_verify(std::move(sc), opts);
    } else {
      std::optional<double> tt;
      std::optional<Eigen::VectorXd> yy;
      std::optional<Eigen::VectorXd> gg;
      if (t_opt->count() > 0) { tt = t; }
      if (y0_opt->count() > 0) { yy = to_vector(y0); }
      if (g0_opt->count() > 0) { gg = to_vector(g0); }
      rep = weakinv::cmd_decompose(std::move(sc), opts, tt, yy, gg).report;
    }
    weakinv::emit_report(rep, opts, std::cout);
    return rep.exit_code;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return weakinv::exit_code::error;
  }
}
