#include "metroplan/nn/checkpoint.hpp"

#include "../io_util.hpp"
#include "json.hpp"

namespace metroplan::nn {

using nlohmann::json;

namespace {

json matrix_values(const Matrix& m) { return json(m.values()); }

Matrix read_matrix(const json& data, std::size_t rows, std::size_t cols, const std::string& where) {
  if (!data.is_array()) throw ParseError(where + ": expected an array");
  std::vector<double> values;
  values.reserve(data.size());
  for (const json& v : data) {
    if (!v.is_number()) throw ParseError(where + ": expected numbers");
    values.push_back(v.get<double>());
  }
  if (values.size() != rows * cols)
    throw ParseError(where + ": " + std::to_string(values.size()) + " values for shape " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  return Matrix(rows, cols, std::move(values));
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  json doc;
  doc["format"] = 1;
  doc["kind"] = "metroplan.checkpoint";
  doc["metadata"] = json::parse(checkpoint.metadata);
  json params = json::array();
  for (const Parameter& p : checkpoint.parameters)
    params.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"data", matrix_values(p.value)}});
  doc["parameters"] = std::move(params);
  if (!checkpoint.adam.m.empty()) {
    json m = json::array(), v = json::array();
    for (const Matrix& x : checkpoint.adam.m) m.push_back(matrix_values(x));
    for (const Matrix& x : checkpoint.adam.v) v.push_back(matrix_values(x));
    doc["adam"] = {{"step", checkpoint.adam.step}, {"m", std::move(m)}, {"v", std::move(v)}};
  }
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const json doc = detail::parse_document(text, "checkpoint");
  detail::FieldReader in(doc, "checkpoint");
  if (in.integer("format") != 1) throw ParseError("checkpoint: unsupported format");
  if (in.string("kind") != "metroplan.checkpoint") throw ParseError("checkpoint.kind: not a metroplan checkpoint");

  Checkpoint out;
  if (doc.contains("metadata")) {
    if (!doc["metadata"].is_object()) throw ParseError("checkpoint.metadata: expected an object");
    out.metadata = doc["metadata"].dump();
  }
  const json& params = in.array("parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    detail::FieldReader p(params[i], "checkpoint.parameters[" + std::to_string(i) + "]");
    const std::vector<int> shape = p.int_array("shape");
    if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) throw ParseError(p.path("shape") + ": expected [rows, cols]");
    const auto rows = static_cast<std::size_t>(shape[0]);
    const auto cols = static_cast<std::size_t>(shape[1]);
    out.parameters.add(p.string("name"), read_matrix(p.at("data"), rows, cols, p.path("data")));
  }
  if (doc.contains("adam")) {
    detail::FieldReader a(doc["adam"], "checkpoint.adam");
    out.adam.step = a.integer("step");
    const json& m = a.array("m");
    const json& v = a.array("v");
    if (m.size() != out.parameters.size() || v.size() != out.parameters.size())
      throw ParseError("checkpoint.adam: moment count does not match the parameter count");
    for (std::size_t i = 0; i < out.parameters.size(); ++i) {
      const Matrix& w = out.parameters[i].value;
      out.adam.m.push_back(read_matrix(m[i], w.rows(), w.cols(), "checkpoint.adam.m[" + std::to_string(i) + "]"));
      out.adam.v.push_back(read_matrix(v[i], w.rows(), w.cols(), "checkpoint.adam.v[" + std::to_string(i) + "]"));
    }
  }
  return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  detail::write_text_file(path, checkpoint_to_json(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(detail::read_text_file(path));
}

}  // namespace metroplan::nn
