#include "lowrank/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include <CLI11.hpp>

#include "lowrank/harness.hpp"

namespace lowrank {
namespace {

void emit_report(const json& rep, const std::string& out_path, std::ostream& out) {
  const std::string text = rep.dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw InputError("cannot write " + out_path);
  f << text;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"deterministic transfer relations of rank-deficient stationary processes"};
  app.require_subcommand(1);

  std::string model_path, out_path;
  int ordering = -1;
  bool all_orderings = false;
  double tol_rank = 1e-9;
  int grid = 64;
  double gamma = 10.0, sigma = 0.0;
  long T = 0;
  std::uint64_t seed = 0;
  bool check_spectrum = false;

  CLI::App* an = app.add_subcommand("analyze", "channel splits, F(z), stability and causality");
  an->add_option("model", model_path, "model JSON file")->required();
  an->add_flag("--all-orderings", all_orderings, "report every admissible split (default)");
  an->add_option("--ordering", ordering, "report a single admissible split (0-based)");
  an->add_option("--tol-rank", tol_rank, "relative rank tolerance for D");
  an->add_option("--grid", grid, "unit-circle comparison angles");
  an->add_option("--out", out_path, "write the JSON report here instead of stdout");

  CLI::App* sy = app.add_subcommand("synthesize", "stabilizing feedback H(z) by analytic interpolation");
  sy->add_option("model", model_path, "model JSON file")->required();
  sy->add_option("--ordering", ordering, "admissible split (0-based)")->required();
  sy->add_option("--gamma", gamma, "sensitivity bound ||Q|| <= gamma");
  sy->add_option("--sigma", sigma, "spectral-zero parameter (scalar two-node problems)");
  sy->add_option("--tol-rank", tol_rank, "relative rank tolerance for D");
  sy->add_option("--grid", grid, "unit-circle comparison angles");
  sy->add_option("--out", out_path, "write the JSON report here instead of stdout");

  CLI::App* si = app.add_subcommand("simulate", "sample paths driven by white noise");
  si->add_option("model", model_path, "model JSON file")->required();
  si->add_option("--T", T, "number of steps")->required();
  si->add_option("--seed", seed, "RNG seed")->required();
  si->add_flag("--check-spectrum", check_spectrum, "verify the Welch estimate against the model");
  si->add_option("--out", out_path, "write the CSV here instead of stdout");

  CLI::App* ne = app.add_subcommand("network", "network model: edge list and (M, N)");
  ne->add_option("model", model_path, "model JSON file")->required();
  ne->add_option("--ordering", ordering, "admissible split (0-based)")->required();
  ne->add_option("--gamma", gamma, "sensitivity bound when feedback is required");

  CLI::App* fa = app.add_subcommand("factor", "dynamic factor decomposition: Wu, F");
  fa->add_option("model", model_path, "model JSON file")->required();
  fa->add_option("--ordering", ordering, "admissible split (0-based)")->required();

  try {
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (an->parsed()) {
      if (all_orderings && ordering >= 0)
        throw InputError("--all-orderings and --ordering are mutually exclusive");
      const Model model = load_model(model_path);
      AnalyzeOptions o;
      o.all_orderings = ordering < 0;
      o.ordering = ordering;
      o.tol_rank = tol_rank;
      o.grid = grid;
      const CliReport r = analyze_model(model, o);
      emit_report(r.report, out_path, out);
      return r.verified ? 0 : 2;
    }
    if (sy->parsed()) {
      const Model model = load_model(model_path);
      SynthesizeOptions o;
      o.ordering = ordering;
      o.gamma = gamma;
      o.sigma = sigma;
      o.tol_rank = tol_rank;
      o.grid = grid;
      const CliReport r = synthesize_model(model, o);
      emit_report(r.report, out_path, out);
      return r.verified ? 0 : 2;
    }
    if (si->parsed()) {
      const Model model = load_model(model_path);
      const MatX<double> Z = simulate_paths(model.ss, T, seed);
      if (out_path.empty()) {
        write_csv(out, model.labels, Z);
      } else {
        std::ofstream f(out_path);
        if (!f) throw InputError("cannot write " + out_path);
        write_csv(f, model.labels, Z);
      }
      if (check_spectrum) {
        const SpectralCheckOptions sopt;
        const SpectralCheckReport rep = spectral_check(model.ss, Z, nullptr, sopt);
        json j = spectral_check_to_json(rep, sopt);
        j["T"] = T;
        j["seed"] = seed;
        j["rng"] = "mt19937_64+box-muller";
        (out_path.empty() ? err : out) << j.dump(2) << "\n";
        return rep.pass ? 0 : 2;
      }
      return 0;
    }
    if (ne->parsed()) {
      const Model model = load_model(model_path);
      NetworkOptions o;
      o.ordering = ordering;
      o.gamma = gamma;
      const CliReport r = network_report(model, o);
      emit_report(r.report, out_path, out);
      return r.verified ? 0 : 2;
    }
    if (fa->parsed()) {
      const Model model = load_model(model_path);
      FactorOptions o;
      o.ordering = ordering;
      const CliReport r = factor_report(model, o);
      emit_report(r.report, out_path, out);
      return r.verified ? 0 : 2;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const UnstableA& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const BoundaryDegeneracy& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const MultiplicityUnsupported& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "verification failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace lowrank
