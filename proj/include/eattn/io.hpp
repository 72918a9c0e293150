#pragma once

// Run configuration and matrix file formats shared by the command-line tool.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "eattn/attention.hpp"
#include "eattn/energy.hpp"
#include "eattn/heads.hpp"

namespace eattn {

struct RunConfig {
  int n = 8;
  int d = 16;
  int d_k = 4;
  int d_v = 4;
  EnergyForm form = EnergyForm::quadratic();
  double eta = 0.01;
  int t_max = 100;
  double grad_tol = 1e-8;
  std::optional<double> clip_norm;
  double perturb_sigma = 0.0;
  std::uint64_t seed = 0;
  int heads = 1;
  bool backtracking = true;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys and bad values raise ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json form_to_json(const EnergyForm& form);
EnergyForm form_from_json(const nlohmann::json& j);

struct MatrixFile {
  std::string name;
  DenseMatrix matrix;
};

/// {"name": ..., "rows": ..., "cols": ..., "data": [...]} with 17 significant digits.
std::string format_matrix_file(const std::string& name, const DenseMatrix& m);
MatrixFile parse_matrix_file(const std::string& text);
void save_matrix_file(const std::filesystem::path& path, const std::string& name,
                      const DenseMatrix& m);
MatrixFile load_matrix_file(const std::filesystem::path& path);

/// Shortest form of a double that still has 17 significant digits ("%.17g").
std::string format_real(double value);

/// Token matrix plus one set of projection weights per head.
struct Problem {
  DenseMatrix x;
  std::vector<ProjectionWeights<double>> weights;
};

/// Draws X, then W_q, W_k, W_v for each head, from one GaussianSource(seed)
/// stream with standard deviation 1/sqrt(d).
Problem generate_problem(const RunConfig& config);

/// Base file name ("X", "W_q", "W_q_h1", ...) for a generated matrix.
std::string weight_file_stem(const std::string& base, int head);

Problem load_problem(const RunConfig& config, const std::filesystem::path& dir);

/// Seed of the state perturbation for head h.
std::uint64_t perturbation_seed(std::uint64_t seed, int head);

HeadSpec<double> head_spec(const RunConfig& config, int head);
std::vector<HeadDefinition<double>> head_definitions(const RunConfig& config,
                                                     const Problem& problem);

}  // namespace eattn
