#include "cli.hpp"

#include "run_config.hpp"

#include "hcmr/checkpoint.hpp"
#include "hcmr/datasets.hpp"
#include "hcmr/error.hpp"
#include "hcmr/inference.hpp"
#include "hcmr/intervention_eval.hpp"
#include "hcmr/rule_io.hpp"
#include "hcmr/training.hpp"
#include "hcmr/verification.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>

namespace hcmr::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

std::optional<fs::path> env_output_dir() {
  const char* v = std::getenv("HCMR_OUTPUT_DIR");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return fs::path(v);
}

// Relative output files land under HCMR_OUTPUT_DIR when it is set.
fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (auto dir = env_output_dir()) return *dir / path;
  }
  return path;
}

void emit(const std::string& target, const std::string& text, std::ostream& out) {
  if (target.empty() || target == "-") {
    out << text;
  } else {
    write_text_file(output_path(target), text);
  }
}

struct LoadedModel {
  Checkpoint checkpoint;
  std::optional<ConstraintSet> constraints;
  FrozenModel model;
};

LoadedModel load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  auto cs = ck.constraints();
  FrozenModel fm = freeze(ck.params, cs ? &*cs : nullptr);
  return LoadedModel{std::move(ck), std::move(cs), std::move(fm)};
}

void check_data(const Dataset& data, const FrozenModel& model) {
  if (data.input_dim() != model.config.input_dim || data.n_concepts() != model.config.n_concepts) {
    throw UsageError("data has " + std::to_string(data.input_dim()) + " inputs and " +
                     std::to_string(data.n_concepts()) + " concepts; the model expects " +
                     std::to_string(model.config.input_dim) + " and " + std::to_string(model.config.n_concepts));
  }
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string constraints;
  std::string output;
  bool quiet = false;
};

int command_train(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.config);
  if (a.seed) rc.train.seed = *a.seed;
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (!a.constraints.empty()) rc.constraints = fs::path(a.constraints);
  rc.train.validate();

  Dataset data = load_csv(rc.train_data);
  Dataset train_set;
  Dataset val_set;
  if (rc.val_data) {
    train_set = std::move(data);
    val_set = load_csv(*rc.val_data);
  } else {
    const auto n_val = static_cast<Eigen::Index>(static_cast<double>(data.size()) * rc.val_fraction);
    train_set = data.head(data.size() - n_val);
    val_set = data.tail_from(data.size() - n_val);
  }
  if (rc.n_concepts_set && rc.model.n_concepts != train_set.n_concepts()) {
    throw UsageError("n_concepts does not match the training data");
  }
  if (rc.input_dim_set && rc.model.input_dim != train_set.input_dim()) {
    throw UsageError("input_dim does not match the training data");
  }
  rc.model.n_concepts = train_set.n_concepts();
  rc.model.input_dim = train_set.input_dim();
  rc.model.validate();

  std::optional<ConstraintSet> cs;
  if (rc.constraints) cs = load_constraints(*rc.constraints, rc.model.n_concepts, rc.model.n_rules);

  fs::path dir = "hcmr_run";
  if (rc.output_dir) dir = *rc.output_dir;
  if (auto env = env_output_dir()) dir = *env;
  if (!a.output.empty()) dir = a.output;

  TrainResult result = train(train_set, val_set, rc.model, rc.train, cs ? &*cs : nullptr, [&](const HistoryRow& h) {
    if (a.quiet) return;
    out << "epoch " << h.epoch << " loss " << format_double(h.loss);
    if (h.val_accuracy == h.val_accuracy) out << " val_accuracy " << format_double(h.val_accuracy);
    out << '\n';
  });
  if (result.diverged) out << "training diverged; keeping the best finite checkpoint\n";

  const FrozenModel fm = freeze(result.best, cs ? &*cs : nullptr);
  fs::create_directories(dir);
  save_checkpoint(dir / "checkpoint.json", result.best, cs ? &*cs : nullptr);
  write_text_file(dir / "history.csv", history_csv(result.history));
  save_rules(dir / "rules.txt", fm.rules, fm.priorities);
  out << "best_epoch " << result.best_epoch << " val_accuracy " << format_double(result.best_val_accuracy) << '\n';
  out << "wrote " << (dir / "checkpoint.json").string() << ", history.csv, rules.txt\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string predictions;
  std::optional<int> explain_row;
  bool json = false;
};

int command_eval(const EvalArgs& a, std::ostream& out) {
  const LoadedModel lm = load_model(a.checkpoint);
  const Dataset data = load_csv(a.data);
  check_data(data, lm.model);

  if (a.explain_row) {
    const int r = *a.explain_row;
    if (r < 0 || r >= data.size()) throw UsageError("--explain row out of range");
    std::vector<double> x(static_cast<std::size_t>(data.input_dim()));
    for (int c = 0; c < data.input_dim(); ++c) x[static_cast<std::size_t>(c)] = data.inputs(r, c);
    const PredictionTrace trace = infer_map(x, lm.model);
    out << (a.json ? trace_to_json(trace) + "\n" : explain(trace));
    return kExitOk;
  }

  const BatchPrediction pred = infer_map_batch(data.inputs, lm.model);
  std::ostringstream os;
  os << "concept,accuracy\n";
  double all_ok = 0.0;
  double all_n = 0.0;
  for (int c = 0; c < data.n_concepts(); ++c) {
    double ok = 0.0;
    double n = 0.0;
    for (Eigen::Index r = 0; r < data.size(); ++r) {
      if (data.observed(r, c) == 0.0) continue;
      n += 1.0;
      ok += pred.values(r, c) == data.labels(r, c) ? 1.0 : 0.0;
    }
    all_ok += ok;
    all_n += n;
    os << concept_name(c) << ',' << (n > 0.0 ? format_double(ok / n) : std::string("nan")) << '\n';
  }
  os << "mean," << (all_n > 0.0 ? format_double(all_ok / all_n) : std::string("nan")) << '\n';
  out << os.str();

  if (!a.predictions.empty()) {
    Dataset p;
    p.inputs = data.inputs;
    p.labels = pred.values;
    p.observed = ad::Matrix::Ones(data.size(), data.n_concepts());
    write_text_file(output_path(a.predictions), to_csv(p));
  }
  return kExitOk;
}

struct InterveneArgs {
  std::string checkpoint;
  std::string data;
  std::string policy = "graph_sources_first";
  std::string budgets;
  std::uint64_t seed = 0;
  std::string output;
};

int command_intervene(const InterveneArgs& a, std::ostream& out) {
  const LoadedModel lm = load_model(a.checkpoint);
  const Dataset data = load_csv(a.data);
  check_data(data, lm.model);
  const std::vector<int> budgets =
      a.budgets.empty() ? parse_budgets("0.." + std::to_string(lm.model.config.n_concepts)) : parse_budgets(a.budgets);
  InterventionPolicy policy{parse_policy(a.policy), a.seed};
  const InterventionCurve curve = evaluate_interventions(lm.model, data, policy, budgets);
  emit(a.output, curve_csv({curve}), out);
  return kExitOk;
}

struct VerifyArgs {
  std::string rules;
  std::string constraint;
  std::string cnf;
};

int command_verify(const VerifyArgs& a, std::ostream& out) {
  const RuleDocument doc = load_rules(a.rules);
  const PropositionalEncoding enc = export_propositional(doc.rules);
  const Formula f = parse_formula(a.constraint);
  if (!a.cnf.empty()) write_text_file(output_path(a.cnf), export_cnf(enc, f));
  const VerificationResult res = verify_constraint(enc, f);
  if (res.holds) {
    out << "HOLDS " << f.to_string() << " (" << res.assignments_checked << " assignments)\n";
    return kExitOk;
  }
  out << "VIOLATED " << f.to_string() << "\ncounterexample:\n";
  for (const auto& [atom, v] : *res.counterexample) out << "  " << atom << " = " << (v ? 1 : 0) << '\n';
  return kExitViolation;
}

struct GenArgs {
  std::string dataset;
  int n = 1000;
  std::uint64_t seed = 0;
  std::optional<double> noise;
  std::string output;
};

int command_gen_data(const GenArgs& a, std::ostream& out) {
  if (a.n < 1) throw UsageError("--n must be positive");
  Dataset data;
  if (a.dataset == "synth-xor") {
    SyntheticXorSpec spec;
    spec.n_examples = a.n;
    if (a.noise) spec.noise = *a.noise;
    data = gen_synthetic_xor(spec, a.seed);
  } else if (a.dataset == "sym-add") {
    SymbolicAdditionSpec spec;
    spec.n_examples = a.n;
    if (a.noise) spec.noise = *a.noise;
    data = gen_symbolic_addition(spec, a.seed);
  } else {
    throw UsageError("unknown dataset '" + a.dataset + "' (expected synth-xor or sym-add)");
  }
  emit(a.output, to_csv(data), out);
  return kExitOk;
}

struct ExportArgs {
  std::string checkpoint;
  std::string output;
};

int command_export_rules(const ExportArgs& a, std::ostream& out) {
  const LoadedModel lm = load_model(a.checkpoint);
  emit(a.output, export_rules(lm.model.rules, lm.model.priorities), out);
  return kExitOk;
}

}  // namespace

std::vector<int> parse_budgets(const std::string& text) {
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("bad budget list '" + text + "'");
    }
  };
  std::vector<int> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const int lo = to_int(text.substr(0, dots));
    const int hi = to_int(text.substr(dots + 2));
    if (hi < lo) throw UsageError("empty budget range '" + text + "'");
    for (int b = lo; b <= hi; ++b) out.push_back(b);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(item));
  if (out.empty()) throw UsageError("empty budget list");
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical concept memory reasoner", args.empty() ? "hcmr" : args.front()};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run configuration");
  train_cmd->add_option("--config", train_args.config, "key = value run configuration")->required();
  train_cmd->add_option("--seed", train_args.seed, "Override the configured seed");
  train_cmd->add_option("--epochs", train_args.epochs, "Override the configured epoch count");
  train_cmd->add_option("--constraints", train_args.constraints, "Constraint file");
  train_cmd->add_option("--output", train_args.output, "Output directory");
  train_cmd->add_flag("--quiet", train_args.quiet, "Do not print per-epoch progress");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Concept accuracy of a checkpoint on a CSV dataset");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--data", eval_args.data)->required();
  eval_cmd->add_option("--predictions", eval_args.predictions, "Write hard predictions as CSV");
  eval_cmd->add_option("--explain", eval_args.explain_row, "Explain the prediction for one row");
  eval_cmd->add_flag("--json", eval_args.json, "Explanation as JSON");

  InterveneArgs iv_args;
  auto* iv_cmd = app.add_subcommand("intervene", "Accuracy versus intervention budget");
  iv_cmd->add_option("--checkpoint", iv_args.checkpoint)->required();
  iv_cmd->add_option("--data", iv_args.data)->required();
  iv_cmd->add_option("--policy", iv_args.policy)
      ->check(CLI::IsMember({"graph_sources_first", "graph_sinks_first", "uncertainty", "random"}));
  iv_cmd->add_option("--budgets", iv_args.budgets, "Range 0..k or list a,b,c");
  iv_cmd->add_option("--seed", iv_args.seed, "Seed of the random policy");
  iv_cmd->add_option("--output", iv_args.output, "Curve CSV (stdout when omitted)");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Check a propositional constraint against exported rules");
  verify_cmd->add_option("--rules", verify_args.rules)->required();
  verify_cmd->add_option("--constraint", verify_args.constraint)->required();
  verify_cmd->add_option("--cnf", verify_args.cnf, "Also write the DIMACS CNF of the violation query");

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV");
  gen_cmd->add_option("--dataset", gen_args.dataset)->required()->check(CLI::IsMember({"synth-xor", "sym-add"}));
  gen_cmd->add_option("--n", gen_args.n, "Number of examples");
  gen_cmd->add_option("--seed", gen_args.seed);
  gen_cmd->add_option("--noise", gen_args.noise, "Gaussian input noise");
  gen_cmd->add_option("--output", gen_args.output, "CSV path (stdout when omitted)");

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-rules", "Write the learned rules of a checkpoint");
  export_cmd->add_option("--checkpoint", export_args.checkpoint)->required();
  export_cmd->add_option("--output", export_args.output, "Rules path (stdout when omitted)");

  std::vector<std::string> owned(args.begin(), args.end());
  if (owned.empty()) owned.emplace_back("hcmr");
  std::vector<char*> argv;
  for (auto& s : owned) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return command_train(train_args, out);
    if (*eval_cmd) return command_eval(eval_args, out);
    if (*iv_cmd) return command_intervene(iv_args, out);
    if (*verify_cmd) return command_verify(verify_args, out);
    if (*gen_cmd) return command_gen_data(gen_args, out);
    if (*export_cmd) return command_export_rules(export_args, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace hcmr::cli
