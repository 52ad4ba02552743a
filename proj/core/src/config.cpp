#include "hcmr/config.hpp"

#include "hcmr/error.hpp"

#include <algorithm>
#include <cmath>

namespace hcmr {

void ModelConfig::validate(bool universal) const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ArgumentError("invalid model config: " + msg);
  };
  require(n_concepts >= 1, "n_concepts must be >= 1");
  require(n_rules >= 1, "n_rules must be >= 1");
  require(!universal || n_rules >= 2, "n_rules must be >= 2 for a universal classifier");
  require(input_dim >= 1, "input_dim must be positive");
  require(size_rule_emb >= 1, "size_rule_emb must be positive");
  require(size_c_emb >= 1, "size_c_emb must be positive");
  require(size_latent >= 1, "size_latent must be positive");
  require(std::all_of(backbone_hidden.begin(), backbone_hidden.end(), [](int w) { return w >= 1; }),
          "backbone_hidden widths must be positive");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
  require(std::isfinite(st_temperature) && st_temperature > 0.0, "st_temperature must be > 0");
  require(mc_samples >= 1, "mc_samples must be positive");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ArgumentError("invalid training config: " + msg);
  };
  require(std::isfinite(lr) && lr > 0.0, "lr must be > 0");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, "weight_decay must be >= 0");
  require(batch_size >= 1, "batch_size must be positive");
  require(epochs >= 1, "epochs must be positive");
  require(validate_every >= 1, "validate_every must be positive");
  require(label_noise >= 0.0 && label_noise < 0.5, "label_noise must lie in [0, 0.5)");
  for (const auto& g : frozen_groups) {
    require(g == "encoder" || g == "selector" || g == "memory", "unknown parameter group " + g);
  }
}

}  // namespace hcmr
