#include "avar/model_io.hpp"

#include <fstream>
#include <sstream>

#include "avar/expr.hpp"

namespace avar::io {

ordered_json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::InvalidInput, "FileNotFound",
                "cannot open '" + path + "'");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput, "MalformedJson",
                "'" + path + "': " + e.what() + " (byte " +
                    std::to_string(e.byte) + ")");
  }
}

ChainModelFile chain_model_from_json(const ordered_json& j) {
  if (!j.contains("Q") || !j["Q"].is_array())
    throw Error(ErrorKind::InvalidInput, "BadModel",
                "model file needs a rate matrix under key 'Q'");
  const auto& rows = j["Q"];
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd Q(n, n);
  for (int i = 0; i < n; ++i) {
    if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != n)
      throw Error(ErrorKind::InvalidInput, "BadModel",
                  "'Q' must be a square array of arrays");
    for (int k = 0; k < n; ++k) Q(i, k) = rows[i][k].get<double>();
  }
  if (j.contains("n") && j["n"].get<int>() != n)
    throw Error(ErrorKind::InvalidInput, "BadModel",
                "declared 'n' does not match the size of 'Q'");

  std::vector<std::string> labels;
  if (j.contains("labels"))
    labels = j["labels"].get<std::vector<std::string>>();

  ChainModelFile out;
  out.model = chain::validate_model(Q, std::move(labels));
  if (j.contains("f")) {
    auto fv = j["f"].get<std::vector<double>>();
    if (static_cast<int>(fv.size()) != n)
      throw Error(ErrorKind::InvalidInput, "BadModel",
                  "'f' must have one entry per state");
    out.f = Eigen::Map<Eigen::VectorXd>(fv.data(), n);
  }
  return out;
}

ChainModelFile load_chain_model(const std::string& path) {
  return chain_model_from_json(parse_json_file(path));
}

namespace {

diffusion1d::ScalarFn scalar_from_json(const ordered_json& j,
                                       const diffusion1d::GridSpec& grid,
                                       std::string* text) {
  if (j.is_string()) {
    auto e = expr::Expression::parse(j.get<std::string>());
    *text = e.text();
    return [e](double x) { return e(x); };
  }
  if (j.is_number()) {
    double v = j.get<double>();
    *text = std::to_string(v);
    return [v](double) { return v; };
  }
  if (j.is_array()) {
    auto samples = j.get<std::vector<double>>();
    if (static_cast<int>(samples.size()) != grid.n)
      throw Error(ErrorKind::InvalidInput, "BadSpec",
                  "sample array must have n_grid entries");
    *text = "samples[" + std::to_string(samples.size()) + "]";
    double h = grid.x_max / (grid.n - 1);
    return [samples, h](double x) {
      // piecewise-linear between grid samples
      int n = static_cast<int>(samples.size());
      if (x <= 0.0) return samples.front();
      int i = static_cast<int>(x / h);
      if (i >= n - 1) return samples.back();
      double t = (x - i * h) / h;
      return (1.0 - t) * samples[i] + t * samples[i + 1];
    };
  }
  throw Error(ErrorKind::InvalidInput, "BadSpec",
              "expected an expression string, number, or sample array");
}

}  // namespace

DiffusionSpec diffusion_spec_from_json(const ordered_json& j) {
  DiffusionSpec spec;
  if (!j.contains("x_max"))
    throw Error(ErrorKind::InvalidInput, "BadSpec",
                "diffusion spec requires 'x_max'");
  if (!j.contains("n_grid"))
    throw Error(ErrorKind::InvalidInput, "BadSpec",
                "diffusion spec requires 'n_grid'");
  spec.grid.x_max = j["x_max"].get<double>();
  spec.grid.n = j["n_grid"].get<int>();
  if (!j.contains("a") || !j.contains("pi"))
    throw Error(ErrorKind::InvalidInput, "BadSpec",
                "diffusion spec requires 'a' and 'pi'");
  spec.a = scalar_from_json(j["a"], spec.grid, &spec.a_text);
  spec.pi = scalar_from_json(j["pi"], spec.grid, &spec.pi_text);
  if (j.contains("x0")) spec.x0 = j["x0"].get<double>();
  return spec;
}

DiffusionSpec load_diffusion_spec(const std::string& path) {
  return diffusion_spec_from_json(parse_json_file(path));
}

Eigen::VectorXd parse_inline_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      values.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidInput, "BadVector",
                  "cannot parse '" + tok + "' as a number");
    }
  }
  if (values.empty())
    throw Error(ErrorKind::InvalidInput, "BadVector", "empty vector spec");
  return Eigen::Map<Eigen::VectorXd>(values.data(),
                                     static_cast<int>(values.size()));
}

namespace {

void flatten(const ordered_json& node, const std::string& prefix,
             std::ostringstream& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items())
      flatten(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (node.is_array()) {
    int i = 0;
    for (const auto& value : node)
      flatten(value, prefix + "[" + std::to_string(i++) + "]", out);
  } else {
    out << prefix << ",";
    if (node.is_string())
      out << node.get<std::string>();
    else
      out << node.dump();
    out << "\n";
  }
}

}  // namespace

std::string to_flat_csv(const ordered_json& report) {
  std::ostringstream out;
  out << "metric,value\n";
  flatten(report, "", out);
  return out.str();
}

}  // namespace avar::io
