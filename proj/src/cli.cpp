#include "eattn/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"

#include "eattn/heads.hpp"
#include "eattn/random.hpp"
#include "eattn/verify.hpp"

namespace eattn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kProbeSeedMix = 0xD1B54A32D192ED03ull;

json matrix_json(const DenseMatrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

int to_integer(const std::string& param, double value, int minimum) {
  if (!std::isfinite(value) || value != std::floor(value) || value < minimum ||
      value > std::numeric_limits<int>::max()) {
    throw ConfigError("sweep: " + param + " needs an integer >= " + std::to_string(minimum) +
                      ", got " + format_real(value));
  }
  return static_cast<int>(value);
}

// Head 0 of the generated problem, plus a probe state off the stationary point.
struct CheckInputs {
  DenseMatrix a;
  DenseMatrix v;
  DenseMatrix z;
};

CheckInputs check_inputs(const RunConfig& config) {
  const Problem problem = generate_problem(config);
  const auto ctx = build_context(problem.x, problem.weights.front());
  GaussianSource noise(config.seed ^ kProbeSeedMix);
  DenseMatrix z = ctx.av + noise.matrix(ctx.n(), ctx.d_v(), 1.0);
  return {ctx.a, ctx.v, std::move(z)};
}

void write_json(std::ostream& out, const json& report) { out << report.dump(2) << "\n"; }

}  // namespace

SweepSpec parse_sweep_spec(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError("sweep: expected name=v1,v2,... but got \"" + text + "\"");
  }
  SweepSpec spec;
  spec.param = text.substr(0, eq);
  std::stringstream values(text.substr(eq + 1));
  std::string item;
  while (std::getline(values, item, ',')) {
    std::size_t used = 0;
    double value = 0;
    try {
      value = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw ConfigError("sweep: \"" + item + "\" is not a number");
    }
    spec.values.push_back(value);
  }
  if (spec.values.empty()) throw ConfigError("sweep: no values given");
  with_parameter(RunConfig{}, spec.param, spec.values.front());  // rejects unknown names early
  return spec;
}

RunConfig with_parameter(RunConfig c, const std::string& param, double value) {
  if (param == "n") {
    c.n = to_integer(param, value, 1);
  } else if (param == "d") {
    c.d = to_integer(param, value, 1);
  } else if (param == "d_k") {
    c.d_k = to_integer(param, value, 1);
  } else if (param == "d_v") {
    c.d_v = to_integer(param, value, 1);
  } else if (param == "p") {
    c.form = EnergyForm::polynomial(to_integer(param, value, 1));
  } else if (param == "eta") {
    c.eta = value;
  } else if (param == "t_max") {
    c.t_max = to_integer(param, value, 1);
  } else if (param == "grad_tol") {
    c.grad_tol = value;
  } else if (param == "clip_norm") {
    c.clip_norm = value;
  } else if (param == "perturb_sigma") {
    c.perturb_sigma = value;
  } else {
    throw ConfigError("sweep: unknown parameter \"" + param + "\"");
  }
  c.validate();
  return c;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, const SweepSpec& spec, int repeats) {
  if (repeats < 1) throw ConfigError("sweep: repeats must be >= 1");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    RunConfig point = with_parameter(config, spec.param, spec.values[i]);
    point.seed = config.seed + i;
    point.heads = 1;
    const Problem problem = generate_problem(point);
    const auto spec0 = head_spec(point, 0);

    SweepRow row;
    row.value = spec.values[i];
    row.wall_time_ms = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      const auto out = nonlinear_head(problem.x, problem.weights.front(), spec0);
      const auto stop = std::chrono::steady_clock::now();
      row.wall_time_ms = std::min(
          row.wall_time_ms, std::chrono::duration<double, std::milli>(stop - start).count());
      row.converged = out.trace.converged;
      row.iters = out.trace.iters;
      row.final_grad_norm = out.trace.grad_norms.back();
    }
    rows.push_back(row);
  }
  return rows;
}

json run_report(const RunConfig& config, const Problem& problem, bool emit_z,
                bool* any_diverged) {
  const auto outputs = run_heads(problem.x, head_definitions(config, problem));
  json heads = json::array();
  bool diverged = false;
  for (std::size_t h = 0; h < outputs.size(); ++h) {
    const auto& o = outputs[h];
    json entry = {
        {"head", h},
        {"form", config.form.name()},
        {"iters", o.trace.iters},
        {"converged", o.trace.converged},
        {"diverged", o.trace.diverged},
        {"final_grad_norm", o.trace.grad_norms.back()},
        {"energy_initial", o.trace.energies.front()},
        {"energy_final", o.trace.energies.back()},
    };
    if (emit_z) entry["z"] = matrix_json(o.z);
    diverged = diverged || o.trace.diverged;
    heads.push_back(std::move(entry));
  }
  if (any_diverged) *any_diverged = diverged;
  json report = {{"command", "run"}, {"config", config_to_json(config)}, {"heads", heads}};
  const DenseMatrix z = concat_heads(outputs);
  report["output_shape"] = {z.rows(), z.cols()};
  if (emit_z) report["z"] = matrix_json(z);
  return report;
}

json gradcheck_report(const RunConfig& config, double h, double tol) {
  const CheckInputs in = check_inputs(config);
  const auto rep = config.form.kind() == EnergyForm::Kind::linear
                       ? linear_gradcheck(in.a, in.v, in.z, h, tol)
                       : gradcheck(config.form, in.a, in.v, in.z, h, tol);
  return {{"command", "gradcheck"},
          {"config", config_to_json(config)},
          {"form", config.form.name()},
          {"h", rep.h},
          {"tol", tol},
          {"max_abs_err", rep.max_abs_err},
          {"max_rel_err", rep.max_rel_err},
          {"worst_index", {rep.worst_index.first, rep.worst_index.second}},
          {"pass", rep.pass}};
}

json stationarity_report(const RunConfig& config, double tol, bool omit_regularizer) {
  const CheckInputs in = check_inputs(config);
  const auto rep =
      config.form.kind() == EnergyForm::Kind::linear
          ? linear_stationarity_check(in.a, in.v, tol)
          : stationarity_check(config.form, in.a, in.v, tol,
                               omit_regularizer ? Regularization::omitted
                                                : Regularization::included);
  return {{"command", "stationarity"},
          {"config", config_to_json(config)},
          {"form", config.form.name()},
          {"regularized", !omit_regularizer},
          {"tol", tol},
          {"grad_norm_at_av", rep.grad_norm_at_av},
          {"scale", rep.scale},
          {"pass", rep.pass}};
}

int cmd_gen(const RunConfig& config, const fs::path& out_dir) {
  const Problem p = generate_problem(config);
  fs::create_directories(out_dir);
  save_matrix_file(out_dir / "X.json", "X", p.x);
  for (int h = 0; h < config.heads; ++h) {
    for (const auto& [base, m] : {std::pair<std::string, const DenseMatrix*>{"W_q", &p.weights[h].w_q},
                                  {"W_k", &p.weights[h].w_k},
                                  {"W_v", &p.weights[h].w_v}}) {
      const std::string stem = weight_file_stem(base, h);
      save_matrix_file(out_dir / (stem + ".json"), stem, *m);
    }
  }
  return kOk;
}

int cmd_run(const RunConfig& config, const std::optional<fs::path>& in_dir, std::ostream& out,
            bool emit_z) {
  const Problem problem = in_dir ? load_problem(config, *in_dir) : generate_problem(config);
  bool diverged = false;
  write_json(out, run_report(config, problem, emit_z, &diverged));
  return diverged ? kDiverged : kOk;
}

int cmd_gradcheck(const RunConfig& config, double h, double tol, std::ostream& out) {
  const json report = gradcheck_report(config, h, tol);
  write_json(out, report);
  return report.at("pass").get<bool>() ? kOk : kCheckFailed;
}

int cmd_stationarity(const RunConfig& config, double tol, bool omit_regularizer,
                     std::ostream& out) {
  const json report = stationarity_report(config, tol, omit_regularizer);
  write_json(out, report);
  return report.at("pass").get<bool>() ? kOk : kCheckFailed;
}

int cmd_trace(const RunConfig& config, std::ostream& csv) {
  const Problem problem = generate_problem(config);
  const auto out = nonlinear_head(problem.x, problem.weights.front(), head_spec(config, 0));
  csv << "iter,energy,grad_norm\n";
  for (std::size_t t = 0; t < out.trace.energies.size(); ++t) {
    csv << t << "," << format_real(out.trace.energies[t]) << ","
        << format_real(out.trace.grad_norms[t]) << "\n";
  }
  return out.trace.diverged ? kDiverged : kOk;
}

int cmd_sweep(const RunConfig& config, const SweepSpec& spec, int repeats, std::ostream& csv) {
  const auto rows = run_sweep(config, spec, repeats);
  csv << spec.param << ",converged,iters,final_grad_norm,wall_time_ms\n";
  for (const auto& r : rows) {
    csv << format_real(r.value) << "," << (r.converged ? 1 : 0) << "," << r.iters << ","
        << format_real(r.final_grad_norm) << "," << format_real(r.wall_time_ms) << "\n";
  }
  return kOk;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Energy-functional attention heads: generation, runs, and verification"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_path;
  bool emit_z = false;
  app.add_option("--config", config_path, "Run configuration (JSON)");
  app.add_option("--out", out_path, "Output file (directory for gen); stdout when omitted");
  app.add_flag("--emit-z", emit_z, "Include final states in run reports");

  auto* gen = app.add_subcommand("gen", "Write seeded X, W_q, W_k, W_v matrix files");
  auto* run = app.add_subcommand("run", "Run the configured heads and report");
  std::string in_dir;
  run->add_option("--in", in_dir, "Directory of matrix files written by gen");

  double h = 1e-6;
  double check_tol = 1e-5;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Analytic vs central-difference gradient");
  gradcheck_cmd->add_option("--step", h, "Finite-difference step");
  gradcheck_cmd->add_option("--tol", check_tol, "Max relative error");

  double stat_tol = 1e-8;
  bool omit_regularizer = false;
  auto* stationarity = app.add_subcommand("stationarity", "Gradient norm at Z = AV");
  stationarity->add_option("--tol", stat_tol, "Tolerance relative to 1 + |AV|");
  stationarity->add_flag("--omit-regularizer", omit_regularizer, "Check the bare energy");

  auto* trace = app.add_subcommand("trace", "Descent trace as CSV");

  std::string sweep_text;
  int repeats = 1;
  auto* sweep = app.add_subcommand("sweep", "Parameter sweep as CSV");
  sweep->add_option("--sweep", sweep_text, "name=v1,v2,...")->required();
  sweep->add_option("--repeats", repeats, "Timing repetitions per grid point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    const RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);

    if (gen->parsed()) {
      if (out_path.empty()) throw ConfigError("gen: --out <directory> is required");
      return cmd_gen(config, out_path);
    }

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary);
      if (!file) throw std::runtime_error("cannot write " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file;

    if (run->parsed()) {
      std::optional<fs::path> dir;
      if (!in_dir.empty()) dir = in_dir;
      const int code = cmd_run(config, dir, out, emit_z);
      if (code == kDiverged) std::cerr << "run: descent diverged\n";
      return code;
    }
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(config, h, check_tol, out);
    if (stationarity->parsed()) return cmd_stationarity(config, stat_tol, omit_regularizer, out);
    if (trace->parsed()) return cmd_trace(config, out);
    if (sweep->parsed()) return cmd_sweep(config, parse_sweep_spec(sweep_text), repeats, out);
  } catch (const OverflowError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const NonFiniteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace eattn::cli
