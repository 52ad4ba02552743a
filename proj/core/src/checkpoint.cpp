#include "hcmr/checkpoint.hpp"

#include "hcmr/error.hpp"
#include "hcmr/rule_io.hpp"

#include <nlohmann/json.hpp>

namespace hcmr {

namespace {

using nlohmann::json;

json config_json(const ModelConfig& c) {
  return json{{"n_concepts", c.n_concepts},       {"n_rules", c.n_rules},
              {"input_dim", c.input_dim},         {"size_rule_emb", c.size_rule_emb},
              {"size_c_emb", c.size_c_emb},       {"size_latent", c.size_latent},
              {"backbone_hidden", c.backbone_hidden}, {"beta", c.beta},
              {"st_temperature", c.st_temperature}, {"mc_samples", c.mc_samples}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.n_concepts = j.at("n_concepts").get<int>();
  c.n_rules = j.at("n_rules").get<int>();
  c.input_dim = j.at("input_dim").get<int>();
  c.size_rule_emb = j.at("size_rule_emb").get<int>();
  c.size_c_emb = j.at("size_c_emb").get<int>();
  c.size_latent = j.at("size_latent").get<int>();
  c.backbone_hidden = j.at("backbone_hidden").get<std::vector<int>>();
  c.beta = j.at("beta").get<double>();
  c.st_temperature = j.at("st_temperature").get<double>();
  c.mc_samples = j.at("mc_samples").get<int>();
  c.validate();
  return c;
}

}  // namespace

std::optional<ConstraintSet> Checkpoint::constraints() const {
  if (constraints_text.empty()) return std::nullopt;
  ConstraintSet cs = parse_constraints(constraints_text, params.config.n_concepts, params.config.n_rules);
  if (cs.digest() != constraints_digest) throw SchemaError("checkpoint constraint digest mismatch");
  return cs;
}

std::string checkpoint_to_json(const ModelParameters& params, const ConstraintSet* constraints) {
  json doc;
  doc["format"] = "hcmr-checkpoint";
  doc["version"] = 1;
  doc["config"] = config_json(params.config);
  json tensors = json::object();
  for (auto& p : const_cast<ModelParameters&>(params).parameters()) {
    const ad::Matrix& m = p.var->value();
    std::vector<double> data(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    tensors[p.group + "/" + p.name] = json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
  }
  doc["parameters"] = tensors;
  if (constraints && !constraints->empty()) {
    doc["constraints"] = constraints->to_text();
    doc["constraints_digest"] = std::to_string(constraints->digest());
  }
  return doc.dump();
}

Checkpoint checkpoint_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.value("format", "") != "hcmr-checkpoint") throw SchemaError("not a checkpoint document");
    Checkpoint ck;
    ck.params = ModelParameters::init(config_from(doc.at("config")), 0);
    const json& tensors = doc.at("parameters");
    auto named = ck.params.parameters();
    if (tensors.size() != named.size()) throw SchemaError("checkpoint parameter count mismatch");
    for (auto& p : named) {
      const json& t = tensors.at(p.group + "/" + p.name);
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (rows != p.var->rows() || cols != p.var->cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw SchemaError("checkpoint tensor " + p.group + "/" + p.name + " has the wrong shape");
      }
      ad::Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
      *p.var = ad::Var::parameter(std::move(m));
    }
    if (doc.contains("constraints")) {
      ck.constraints_text = doc.at("constraints").get<std::string>();
      ck.constraints_digest = std::stoull(doc.at("constraints_digest").get<std::string>());
    }
    return ck;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     const ConstraintSet* constraints) {
  write_text_file(path, checkpoint_to_json(params, constraints));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_text_file(path)); }

}  // namespace hcmr
