// Command line front end: validate / run / sweep / constants / conditions.
// Exit codes: 0 success, 2 validation failure, 3 task failure, 4 I/O failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fracnls/manifest.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fracnls::IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json parse_json(const std::string& bytes) {
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw fracnls::ValidationError({{"", std::string("not valid JSON: ") + e.what()}});
  }
}

nlohmann::json issues_json(const fracnls::ValidationError& e) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& it : e.issues())
    arr.push_back(nlohmann::json{{"pointer", it.pointer}, {"message", it.message}});
  return arr;
}

int cmd_validate(const std::string& path) {
  const std::string bytes = read_file(path);
  try {
    const auto m = fracnls::validate_manifest(parse_json(bytes));
    nlohmann::json out{{"valid", true},
                       {"issues", nlohmann::json::array()},
                       {"warnings", m.warnings}};
    std::cout << out.dump(2) << "\n";
    return 0;
  } catch (const fracnls::ValidationError& e) {
    nlohmann::json out{{"valid", false}, {"issues", issues_json(e)}};
    std::cout << out.dump(2) << "\n";
    return 2;
  }
}

int cmd_run(const std::string& path) {
  const std::string bytes = read_file(path);
  const auto m = fracnls::validate_manifest(parse_json(bytes));
  const auto result = fracnls::run(m, bytes);
  bool any_failed = false;
  for (const auto& t : result.tasks) {
    std::cout << t.name << ": " << t.status;
    if (!t.error.empty()) std::cout << " (" << t.error << ")";
    std::cout << "\n";
    any_failed = any_failed || t.status != "ok";
  }
  std::cout << "summary: " << result.summary_path << "\n";
  return any_failed ? 3 : 0;
}

int cmd_sweep(const std::string& path) {
  const std::string bytes = read_file(path);
  const auto spec = fracnls::validate_sweep(parse_json(bytes));
  const std::string out = fracnls::sweep(spec);
  std::cout << "sweep: " << out << "\n";
  return 0;
}

int cmd_conditions(const std::string& path) {
  const std::string bytes = read_file(path);
  const auto m = fracnls::validate_manifest(parse_json(bytes));
  const auto ct = fracnls::detail::resolve_constants(m);
  std::cout << fracnls::conditions_report(m.params, ct).dump(2) << "\n";
  return 0;
}

int cmd_constants(const std::vector<double>& est, const std::vector<double>& grid_args) {
  const int N = static_cast<int>(est[0]);
  const double s = est[1];
  const double r = est[2];
  const auto grid = fracnls::GridDescriptor::create(
      N, static_cast<int>(grid_args[0]), grid_args[1]);
  const auto gn = fracnls::estimate_gn_constant(N, s, r, grid);
  const auto sob = fracnls::estimate_sobolev_constant(N, s, grid);
  nlohmann::json out{
      {"N", N},
      {"s", s},
      {"r", r},
      {"grid", {{"points_per_axis", grid.points_per_axis},
                {"box_half_length", grid.box_half_length}}},
      {"gn_r", {{"value", gn.value}, {"value_refined", gn.value_refined},
                {"iterations", gn.iterations}}},
      {"sobolev_S", {{"value", sob.value}, {"value_refined", sob.value_refined},
                     {"iterations", sob.iterations}}},
      {"sources", "estimated"}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral solver and verification toolkit for normalized solutions of the "
               "mixed fractional Schrodinger equation"};
  app.require_subcommand(1);

  std::string manifest_path, sweep_path, conditions_path;
  auto* validate = app.add_subcommand("validate", "check a manifest, print issues as JSON");
  validate->add_option("manifest", manifest_path, "manifest JSON file")->required();
  auto* run = app.add_subcommand("run", "execute the tasks of a manifest");
  run->add_option("manifest", manifest_path, "manifest JSON file")->required();
  auto* sweep = app.add_subcommand("sweep", "run a manifest across a parameter axis");
  sweep->add_option("spec", sweep_path, "sweep spec JSON file")->required();
  auto* conditions = app.add_subcommand("conditions", "print the condition report for a manifest");
  conditions->add_option("manifest", conditions_path, "manifest JSON file")->required();

  std::vector<double> est, grid_args;
  auto* constants = app.add_subcommand("constants", "estimate the GN and Sobolev constants");
  constants->add_option("--estimate", est, "N s r")->expected(3)->required();
  constants->add_option("--grid", grid_args, "M L")->expected(2)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (validate->parsed()) return cmd_validate(manifest_path);
    if (run->parsed()) return cmd_run(manifest_path);
    if (sweep->parsed()) return cmd_sweep(sweep_path);
    if (conditions->parsed()) return cmd_conditions(conditions_path);
    if (constants->parsed()) return cmd_constants(est, grid_args);
  } catch (const fracnls::ValidationError& e) {
    nlohmann::json out{{"valid", false}, {"issues", issues_json(e)}};
    std::cerr << out.dump(2) << "\n";
    return 2;
  } catch (const fracnls::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fracnls::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
