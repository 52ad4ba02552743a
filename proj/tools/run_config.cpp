#include "run_config.hpp"

#include "hcmr/error.hpp"
#include "hcmr/rule_io.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace hcmr::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

int to_int(const std::string& v, std::size_t line) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ParseError("expected an integer, got '" + v + "'", line);
  return out;
}

double to_double(const std::string& v, std::size_t line) {
  try {
    return parse_double(v);
  } catch (const Error&) {
    throw ParseError("expected a number, got '" + v + "'", line);
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig rc;
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  using Setter = std::function<void(const std::string&, std::size_t)>;
  const std::map<std::string, Setter> setters{
      {"n_concepts", [&](auto& v, auto l) { rc.model.n_concepts = to_int(v, l); rc.n_concepts_set = true; }},
      {"n_rules", [&](auto& v, auto l) { rc.model.n_rules = to_int(v, l); }},
      {"input_dim", [&](auto& v, auto l) { rc.model.input_dim = to_int(v, l); rc.input_dim_set = true; }},
      {"size_rule_emb", [&](auto& v, auto l) { rc.model.size_rule_emb = to_int(v, l); }},
      {"size_c_emb", [&](auto& v, auto l) { rc.model.size_c_emb = to_int(v, l); }},
      {"size_latent", [&](auto& v, auto l) { rc.model.size_latent = to_int(v, l); }},
      {"backbone_hidden",
       [&](auto& v, auto l) {
         rc.model.backbone_hidden.clear();
         for (const auto& w : split_list(v)) rc.model.backbone_hidden.push_back(to_int(w, l));
       }},
      {"beta", [&](auto& v, auto l) { rc.model.beta = to_double(v, l); }},
      {"st_temperature", [&](auto& v, auto l) { rc.model.st_temperature = to_double(v, l); }},
      {"mc_samples", [&](auto& v, auto l) { rc.model.mc_samples = to_int(v, l); }},
      {"lr", [&](auto& v, auto l) { rc.train.lr = to_double(v, l); }},
      {"weight_decay", [&](auto& v, auto l) { rc.train.weight_decay = to_double(v, l); }},
      {"batch_size", [&](auto& v, auto l) { rc.train.batch_size = to_int(v, l); }},
      {"epochs", [&](auto& v, auto l) { rc.train.epochs = to_int(v, l); }},
      {"validate_every", [&](auto& v, auto l) { rc.train.validate_every = to_int(v, l); }},
      {"seed",
       [&](auto& v, auto l) {
         std::uint64_t s = 0;
         const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
         if (ec != std::errc() || ptr != v.data() + v.size()) throw ParseError("expected a seed, got '" + v + "'", l);
         rc.train.seed = s;
       }},
      {"relaxed_gradients",
       [&](auto& v, auto l) {
         if (v != "true" && v != "false") throw ParseError("expected true or false, got '" + v + "'", l);
         rc.train.relaxed_gradients = v == "true";
       }},
      {"label_noise", [&](auto& v, auto l) { rc.train.label_noise = to_double(v, l); }},
      {"frozen_groups", [&](auto& v, auto) { rc.train.frozen_groups = split_list(v); }},
      {"train_data", [&](auto& v, auto) { rc.train_data = path_of(v); }},
      {"val_data", [&](auto& v, auto) { rc.val_data = path_of(v); }},
      {"val_fraction", [&](auto& v, auto l) { rc.val_fraction = to_double(v, l); }},
      {"constraints", [&](auto& v, auto) { rc.constraints = path_of(v); }},
      {"output_dir", [&](auto& v, auto) { rc.output_dir = path_of(v); }},
  };

  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw SchemaError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw SchemaError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    if (value.empty()) throw ParseError("empty value for '" + key + "'", line_no);
    it->second(value, line_no);
  }
  if (!seen.count("train_data")) throw SchemaError("missing required key 'train_data'");
  if (!(rc.val_fraction > 0.0 && rc.val_fraction < 1.0)) throw SchemaError("val_fraction must lie in (0, 1)");
  rc.train.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.parent_path());
}

}  // namespace hcmr::cli
