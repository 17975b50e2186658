#ifndef AVAR_MODEL_IO_HPP
#define AVAR_MODEL_IO_HPP

#include <optional>
#include <string>

#include <json.hpp>

#include "avar/chain.hpp"
#include "avar/diffusion1d.hpp"

namespace avar::io {

using nlohmann::ordered_json;

// Chain model file: {"n": int, "Q": [[rate,...],...],
//                    "labels": [str,...]?, "f": [num,...]?}
struct ChainModelFile {
  chain::CtmcModel model;
  std::optional<Eigen::VectorXd> f;
};

ChainModelFile load_chain_model(const std::string& path);
ChainModelFile chain_model_from_json(const ordered_json& j);

// Diffusion spec: {"a": expr-or-samples, "pi": expr-or-samples,
//                  "x0": num?, "x_max": num, "n_grid": int}
struct DiffusionSpec {
  diffusion1d::ScalarFn a;
  diffusion1d::ScalarFn pi;
  std::optional<double> x0;
  diffusion1d::GridSpec grid;
  std::string a_text, pi_text;  // provenance for manifests
};

DiffusionSpec load_diffusion_spec(const std::string& path);
DiffusionSpec diffusion_spec_from_json(const ordered_json& j);

// Parses a JSON file, converting parse errors into InvalidInput errors that
// carry the byte offset.
ordered_json parse_json_file(const std::string& path);

// Inline vector spec "1,-1,0".
Eigen::VectorXd parse_inline_vector(const std::string& text);

// Flat CSV with one row per scalar metric, columns metric,value. Nested
// objects flatten with dotted keys; non-numeric leaves render as strings.
std::string to_flat_csv(const ordered_json& report);

}  // namespace avar::io

#endif
