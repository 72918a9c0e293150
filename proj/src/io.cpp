#include "eattn/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "eattn/random.hpp"

namespace eattn {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  if (n < 1 || d < 1 || d_k < 1 || d_v < 1) {
    throw ConfigError("config: n, d, d_k and d_v must all be >= 1");
  }
  if (heads < 1) throw ConfigError("config: heads must be >= 1");
  if (!(perturb_sigma >= 0) || !std::isfinite(perturb_sigma)) {
    throw ConfigError("config: perturb_sigma must be a finite number >= 0");
  }
  DescentConfig<double> descent;
  descent.eta = eta;
  descent.max_iters = t_max;
  descent.grad_tol = grad_tol;
  descent.clip_norm = clip_norm;
  descent.validate();
}

json form_to_json(const EnergyForm& form) {
  switch (form.kind()) {
    case EnergyForm::Kind::linear: return {{"kind", "linear"}};
    case EnergyForm::Kind::quadratic: return {{"kind", "quadratic"}};
    case EnergyForm::Kind::polynomial: return {{"kind", "polynomial"}, {"p", form.degree()}};
    case EnergyForm::Kind::exponential: return {{"kind", "exponential"}};
  }
  return {};
}

EnergyForm form_from_json(const json& j) {
  if (j.is_string()) return form_from_json(json{{"kind", j}});
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ConfigError("config: form must be an object with a string \"kind\"");
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "linear") return EnergyForm::linear();
  if (kind == "quadratic") return EnergyForm::quadratic();
  if (kind == "exponential") return EnergyForm::exponential();
  if (kind == "polynomial") {
    if (!j.contains("p") || !j.at("p").is_number_integer()) {
      throw ConfigError("config: polynomial form needs an integer \"p\"");
    }
    return EnergyForm::polynomial(j.at("p").get<int>());
  }
  throw ConfigError("config: unknown form kind \"" + kind + "\"");
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for \"") + key + "\": " + e.what());
  }
}

void read_int(const json& j, const char* key, int& field) {
  if (j.contains(key) && !j.at(key).is_number_integer()) {
    throw ConfigError(std::string("config: \"") + key + "\" must be an integer");
  }
  read_field(j, key, field);
}

void read_real(const json& j, const char* key, double& field) {
  if (j.contains(key) && !j.at(key).is_number()) {
    throw ConfigError(std::string("config: \"") + key + "\" must be a number");
  }
  read_field(j, key, field);
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  static const std::set<std::string> known = {
      "n",        "d",         "d_k",           "d_v",  "form",  "eta",         "t_max",
      "grad_tol", "clip_norm", "perturb_sigma", "seed", "heads", "backtracking"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ConfigError("config: unknown key \"" + item.key() + "\"");
  }
  RunConfig c;
  read_int(j, "n", c.n);
  read_int(j, "d", c.d);
  read_int(j, "d_k", c.d_k);
  read_int(j, "d_v", c.d_v);
  if (j.contains("form")) c.form = form_from_json(j.at("form"));
  read_real(j, "eta", c.eta);
  read_int(j, "t_max", c.t_max);
  read_real(j, "grad_tol", c.grad_tol);
  if (j.contains("clip_norm") && !j.at("clip_norm").is_null()) {
    double clip = 0;
    read_real(j, "clip_norm", clip);
    c.clip_norm = clip;
  }
  read_real(j, "perturb_sigma", c.perturb_sigma);
  if (j.contains("seed") && !j.at("seed").is_number_unsigned()) {
    throw ConfigError("config: \"seed\" must be a non-negative integer");
  }
  read_field(j, "seed", c.seed);
  read_int(j, "heads", c.heads);
  if (j.contains("backtracking") && !j.at("backtracking").is_boolean()) {
    throw ConfigError("config: \"backtracking\" must be true or false");
  }
  read_field(j, "backtracking", c.backtracking);
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["n"] = c.n;
  j["d"] = c.d;
  j["d_k"] = c.d_k;
  j["d_v"] = c.d_v;
  j["form"] = form_to_json(c.form);
  j["eta"] = c.eta;
  j["t_max"] = c.t_max;
  j["grad_tol"] = c.grad_tol;
  j["clip_norm"] = c.clip_norm ? json(*c.clip_norm) : json(nullptr);
  j["perturb_sigma"] = c.perturb_sigma;
  j["seed"] = c.seed;
  j["heads"] = c.heads;
  j["backtracking"] = c.backtracking;
  return j;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string format_real(double value) {
  if (value == 0 && std::signbit(value)) return "-0.0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string format_matrix_file(const std::string& name, const DenseMatrix& m) {
  std::ostringstream os;
  os << "{\"name\": " << json(name).dump() << ", \"rows\": " << m.rows()
     << ", \"cols\": " << m.cols() << ", \"data\": [";
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (i) os << ", ";
    os << format_real(m.data()[i]);
  }
  os << "]}\n";
  return os.str();
}

MatrixFile parse_matrix_file(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("matrix file: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("name") || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data") || !j.at("data").is_array() || !j.at("rows").is_number_integer() ||
      !j.at("cols").is_number_integer()) {
    throw ConfigError("matrix file: expected keys name, rows, cols, data");
  }
  const auto rows = j.at("rows").get<long long>();
  const auto cols = j.at("cols").get<long long>();
  const auto& data = j.at("data");
  if (rows < 1 || cols < 1) throw ConfigError("matrix file: rows and cols must be positive");
  if (static_cast<long long>(data.size()) != rows * cols) {
    throw ConfigError("matrix file: data has " + std::to_string(data.size()) +
                      " entries, expected " + std::to_string(rows * cols));
  }
  MatrixFile out;
  out.name = j.at("name").get<std::string>();
  out.matrix.resize(rows, cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].is_number()) throw ConfigError("matrix file: non-numeric entry");
    out.matrix.data()[i] = data[i].get<double>();
  }
  if (!out.matrix.allFinite()) throw ConfigError("matrix file: non-finite entry");
  return out;
}

void save_matrix_file(const fs::path& path, const std::string& name, const DenseMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_matrix_file(name, m);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

MatrixFile load_matrix_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("matrix file: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_matrix_file(buf.str());
}

Problem generate_problem(const RunConfig& config) {
  config.validate();
  GaussianSource source(config.seed);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(config.d));
  Problem p;
  p.x = source.matrix(config.n, config.d, stddev);
  for (int h = 0; h < config.heads; ++h) {
    ProjectionWeights<double> w;
    w.w_q = source.matrix(config.d, config.d_k, stddev);
    w.w_k = source.matrix(config.d, config.d_k, stddev);
    w.w_v = source.matrix(config.d, config.d_v, stddev);
    p.weights.push_back(std::move(w));
  }
  return p;
}

std::string weight_file_stem(const std::string& base, int head) {
  return head == 0 ? base : base + "_h" + std::to_string(head);
}

namespace {

DenseMatrix load_checked(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  MatrixFile f = load_matrix_file(path);
  if (f.matrix.rows() != rows || f.matrix.cols() != cols) {
    throw DimensionError(path.string() + ": shape " +
                         detail::shape_string(f.matrix.rows(), f.matrix.cols()) +
                         " but config expects " + detail::shape_string(rows, cols));
  }
  return std::move(f.matrix);
}

}  // namespace

Problem load_problem(const RunConfig& config, const fs::path& dir) {
  config.validate();
  Problem p;
  p.x = load_checked(dir / "X.json", config.n, config.d);
  for (int h = 0; h < config.heads; ++h) {
    ProjectionWeights<double> w;
    w.w_q = load_checked(dir / (weight_file_stem("W_q", h) + ".json"), config.d, config.d_k);
    w.w_k = load_checked(dir / (weight_file_stem("W_k", h) + ".json"), config.d, config.d_k);
    w.w_v = load_checked(dir / (weight_file_stem("W_v", h) + ".json"), config.d, config.d_v);
    p.weights.push_back(std::move(w));
  }
  return p;
}

std::uint64_t perturbation_seed(std::uint64_t seed, int head) {
  return seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(head + 1);
}

HeadSpec<double> head_spec(const RunConfig& config, int head) {
  HeadSpec<double> spec;
  spec.d = config.d;
  spec.d_k = config.d_k;
  spec.d_v = config.d_v;
  spec.form = config.form;
  spec.descent.eta = config.eta;
  spec.descent.max_iters = config.t_max;
  spec.descent.grad_tol = config.grad_tol;
  spec.descent.clip_norm = config.clip_norm;
  spec.descent.backtracking = config.backtracking;
  spec.perturb_sigma = config.perturb_sigma;
  spec.seed = perturbation_seed(config.seed, head);
  return spec;
}

std::vector<HeadDefinition<double>> head_definitions(const RunConfig& config,
                                                     const Problem& problem) {
  std::vector<HeadDefinition<double>> out;
  for (int h = 0; h < static_cast<int>(problem.weights.size()); ++h) {
    out.emplace_back(problem.weights[h], head_spec(config, h));
  }
  return out;
}

}  // namespace eattn
