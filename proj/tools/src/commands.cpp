#include "commands.hpp"

#include "experiment.hpp"

#include "unlearn_lab/divergence.hpp"
#include "unlearn_lab/error.hpp"
#include "unlearn_lab/influence.hpp"
#include "unlearn_lab/io.hpp"
#include "unlearn_lab/markov.hpp"
#include "unlearn_lab/stats.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace unlearn_lab::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using io::format_double;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw ParameterError("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

fs::path output_dir(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_json(dir / "config.json", to_json(cfg));
  return dir;
}

std::string join(const std::vector<std::string>& parts, const char* sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

json eval_json(const EvalReport& r) {
  json j{{"acc_forget", r.acc_forget}, {"acc_retain", r.acc_retain},
         {"acc_test", r.acc_test},     {"mia", r.mia},
         {"w_dist", r.w_dist},         {"runtime_seconds", r.runtime_seconds}};
  if (r.kl_retain) j["kl_retain"] = *r.kl_retain;
  if (r.kl_forget) j["kl_forget"] = *r.kl_forget;
  return j;
}

// Appends one row to the runs.csv ledger, writing the header if the file is new.
void append_run_row(const fs::path& path, const std::string& run_id, const std::string& method,
                    std::uint64_t seed, const EvalReport& r) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream f(path, std::ios::app);
  if (!f) throw ParameterError("cannot write " + path.string());
  if (fresh) f << join(eval_csv_columns()) << '\n';
  f << join({run_id, method, std::to_string(seed), format_double(r.acc_forget),
             format_double(r.acc_retain), format_double(r.acc_test), format_double(r.mia),
             format_double(r.w_dist), optional_cell(r.kl_retain), optional_cell(r.kl_forget),
             format_double(r.runtime_seconds)})
    << '\n';
}

std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v;
  return s.str();
}

// ---------------------------------------------------------------- gen

void cmd_gen(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir = output_dir(cfg);
  std::vector<std::string> files;
  if (cfg.preset == "markov") {
    const MarkovCorpus corpus =
        gen_markov_sequences(cfg.markov.n_per_source, cfg.markov.length, cfg.seed);
    io::save_markov_corpus(dir / "corpus.csv", corpus);
    files = {"corpus.csv"};
    out << "corpus: " << corpus.size() << " sequences of length " << corpus.length() << '\n';
  } else {
    const io::DatasetFile file = resolve_dataset(cfg);
    const SplitSpec split = resolve_split(cfg, file);
    io::save_dataset(dir / "dataset", file.data, split);
    files = {"dataset.json", "dataset.csv"};
    out << "dataset: " << file.data.size() << " samples, " << file.data.class_count
        << " classes; forget " << split.forget.size() << ", retain " << split.retain.size()
        << ", test " << split.test.size() << '\n';
  }
  write_json(dir / "manifest.json",
             json{{"command", "gen"}, {"seed", cfg.seed}, {"files", files}});
  out << "wrote " << dir.string() << '\n';
}

// ---------------------------------------------------------------- train

void cmd_train(ExperimentConfig cfg, std::ostream& out) {
  if (cfg.dataset.path.empty()) {
    throw ParameterError("train: dataset.path is required (write a dataset with `gen`)");
  }
  cfg.metrics.retrain_reference = false;
  const fs::path dir = output_dir(cfg);
  const auto start = std::chrono::steady_clock::now();
  const Experiment ex = prepare_experiment(cfg);
  io::save_model(dir / "model.json", {ex.original.state, ex.extractor});
  const json report{{"epochs", ex.original.epochs},
                    {"grad_norm", ex.original.grad_norm},
                    {"tol", cfg.model.train.tol},
                    {"converged", ex.original.converged},
                    {"objective", ex.original.objective},
                    {"solver", to_string(cfg.model.train.solver)},
                    {"l2", cfg.model.train.l2},
                    {"acc_train", accuracy(ex.original.state, ex.train)},
                    {"acc_test", accuracy(ex.original.state, ex.test)},
                    {"runtime_seconds", seconds_since(start)}};
  write_json(dir / "train_report.json", report);
  out << "trained " << ex.original.epochs << " epochs, grad norm "
      << format_double(ex.original.grad_norm) << (ex.original.converged ? "" : " (not converged)")
      << "; wrote " << (dir / "model.json").string() << '\n';
}

// ---------------------------------------------------------------- unlearn / eval

std::optional<io::ModelFile> maybe_model(const ExperimentConfig& cfg) {
  if (cfg.model.path.empty()) return std::nullopt;
  return io::load_model(cfg.model.path);
}

std::string run_id(const ExperimentConfig& cfg, const std::string& method) {
  return method + "-seed" + std::to_string(cfg.seed);
}

void cmd_unlearn(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir = output_dir(cfg);
  const Experiment ex = prepare_experiment(cfg, maybe_model(cfg));
  const SplitEvaluator eval = ex.evaluator();
  const EvalReport before = eval(ex.original.state);
  const UnlearnRun run = run_unlearning(ex.problem(cfg.model.train), cfg.unlearn,
                                        [&](const ClassifierState& s) { return eval(s); });
  const std::string method = to_string(cfg.unlearn.method);
  EvalReport after = run.per_epoch.empty() ? eval(run.final_state) : run.per_epoch.back();
  after.runtime_seconds = run.wall_clock_seconds;

  {
    auto f = open_out(dir / "trajectory.csv");
    f << "epoch,forget_acc,retain_acc,test_acc,mia,w_dist\n";
    const auto row = [&](int epoch, const EvalReport& r) {
      f << join({std::to_string(epoch), format_double(r.acc_forget), format_double(r.acc_retain),
                 format_double(r.acc_test), format_double(r.mia), format_double(r.w_dist)})
        << '\n';
    };
    row(0, before);
    for (std::size_t t = 0; t < run.per_epoch.size(); ++t) {
      row(static_cast<int>(t) + 1, run.per_epoch[t]);
    }
  }
  if (!run.influence_updates.empty()) {
    io::save_influence_csv(dir / "influence.csv", run.influence_updates.front(), ex.split.forget);
  }
  append_run_row(dir / "runs.csv", run_id(cfg, method), method, cfg.seed, after);
  io::save_model(dir / "model.json", {run.final_state, ex.extractor});

  json epochs = json::array();
  for (std::size_t t = 0; t < run.per_epoch.size(); ++t) {
    json e = eval_json(run.per_epoch[t]);
    e["epoch"] = t + 1;
    epochs.push_back(e);
  }
  json updates = json::array();
  for (const auto& u : run.influence_updates) {
    updates.push_back({{"selected", u.selected_count()},
                       {"forget_size", u.raw.size()},
                       {"damping_used", u.damping_used},
                       {"truncation_percentile", u.truncation_percentile},
                       {"empty_selection", u.empty_selection}});
  }
  const json doc{{"run_id", run_id(cfg, method)},
                 {"method", method},
                 {"seed", cfg.seed},
                 {"config", to_json(cfg)},
                 {"original", eval_json(before)},
                 {"final", eval_json(after)},
                 {"epochs", epochs},
                 {"influence_updates", updates},
                 {"warnings", run.warnings},
                 {"diverged", run.diverged},
                 {"timings",
                  {{"prepare_seconds", ex.prepare_seconds},
                   {"unlearn_seconds", run.wall_clock_seconds}}}};
  write_json(dir / "run.json", doc);
  out << method << ": forget " << pct(after.acc_forget) << "% retain " << pct(after.acc_retain)
      << "% test " << pct(after.acc_test) << "% mia " << pct(after.mia) << "% w_dist "
      << format_double(after.w_dist) << '\n';
  for (const auto& w : run.warnings) out << "warning: " << w << '\n';
}

void cmd_eval(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir = output_dir(cfg);
  const auto model = maybe_model(cfg);
  const auto start = std::chrono::steady_clock::now();
  const Experiment ex = prepare_experiment(cfg, model);
  EvalReport r = ex.evaluator()(ex.original.state);
  r.runtime_seconds = seconds_since(start);
  const std::string label = model ? "model" : "original";
  append_run_row(dir / "runs.csv", run_id(cfg, label), label, cfg.seed, r);
  write_json(dir / "eval.json", eval_json(r));
  out << label << ": forget " << pct(r.acc_forget) << "% retain " << pct(r.acc_retain)
      << "% test " << pct(r.acc_test) << "% mia " << pct(r.mia) << "% w_dist "
      << format_double(r.w_dist) << '\n';
}

// ---------------------------------------------------------------- oracle

void cmd_oracle(ExperimentConfig cfg, std::ostream& out) {
  if (cfg.model.train.l2 == 0.0 && cfg.unlearn.damping.value == 0.0) {
    throw ParameterError("oracle: l2 = 0 and damping = 0 leave the leave-one-out optimum undefined");
  }
  cfg.metrics.retrain_reference = false;
  const fs::path dir = output_dir(cfg);
  const auto start = std::chrono::steady_clock::now();
  const Experiment ex = prepare_experiment(cfg);
  IndexList positions = ex.forget_positions();
  if (cfg.oracle.probes > static_cast<int>(positions.size())) {
    throw ParameterError("oracle.probes = " + std::to_string(cfg.oracle.probes) +
                         " exceeds the forget set size " + std::to_string(positions.size()));
  }
  if (cfg.oracle.probes > 0) positions.resize(static_cast<std::size_t>(cfg.oracle.probes));

  const ClassifierState& model = ex.original.state;
  const double l2 = cfg.model.train.l2;
  const HessianFactor factor =
      cfg.oracle.hessian == "train"
          ? HessianFactor(hessian_classifier(model, ex.train.features, l2), l2)
          : HessianFactor::assemble(model, ex.forget.features, cfg.unlearn.damping);
  const LabeledFeatures probes = select_rows(ex.train.features, ex.train.labels, positions);
  const Vector infl = influence_on_set(model, probes, ex.forget, factor);

  const LooProblem problem{ex.train, ex.forget_positions(), ex.data.class_count};
  const auto records = loo_oracle(problem, positions, cfg.model.train);

  const IndexList train_ids = ex.split.train();
  const double n = ex.train.size();
  std::vector<double> neg_infl, predicted, delta;
  auto f = open_out(dir / "loo.csv");
  f << "index,position,influence,predicted_delta,loo_delta\n";
  for (std::size_t k = 0; k < records.size(); ++k) {
    neg_infl.push_back(-infl(static_cast<Eigen::Index>(k)));
    predicted.push_back(neg_infl.back() / n);
    delta.push_back(records[k].delta_loss);
    f << join({std::to_string(train_ids[static_cast<std::size_t>(records[k].index)]),
               std::to_string(records[k].index), format_double(-neg_infl.back()),
               format_double(predicted.back()), format_double(delta.back())})
      << '\n';
  }
  const double rho = records.size() >= 2 ? spearman(neg_infl, delta) : 0.0;
  const double r = records.size() >= 2 ? pearson(predicted, delta) : 0.0;
  write_json(dir / "summary.json",
             json{{"probes", records.size()},
                  {"spearman", rho},
                  {"pearson_predicted", r},
                  {"hessian", cfg.oracle.hessian},
                  {"damping_used", factor.damping_used()},
                  {"train_size", ex.train.size()},
                  {"original_grad_norm", ex.original.grad_norm},
                  {"runtime_seconds", seconds_since(start)}});
  out << "oracle: " << records.size() << " probes, spearman " << format_double(rho) << '\n';
}

// ---------------------------------------------------------------- divergence

void cmd_divergence(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir = output_dir(cfg);
  const auto& d = cfg.divergence;
  struct Tally {
    double max_gap = 0.0;
    int violations = 0;
    int weighted_shrinks = 0;  // replays with ||D a||^2 <= ||a||^2
    std::vector<double> final_norm;
  };
  std::map<std::string, Tally> tally;
  auto f = open_out(dir / "divergence.csv");
  f << "seed,method,t,direct_norm,quadratic_norm,lower,upper\n";
  for (int s = 0; s < d.seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    const auto inst = divergence::make_logistic_instance(d.n_forget, d.dim, seed);
    for (const auto& name : d.schemes) {
      divergence::ReplayOptions opt;
      opt.scheme = divergence::weight_scheme_from_string(name);
      opt.mode = d.mode;
      opt.learning_rate = d.eta;
      opt.steps = d.steps;
      opt.beta = d.beta;
      opt.sample_seed = seed;
      Tally& t = tally[name];
      for (const auto& rec : divergence::replay_trace(inst, opt)) {
        const double scale = std::max(std::abs(rec.direct_norm), 1e-300);
        t.max_gap = std::max(t.max_gap, std::abs(rec.direct_norm - rec.quadratic_norm) / scale);
        if (!divergence::EigenBounds{rec.lower, rec.quadratic_norm, rec.upper}.holds()) {
          ++t.violations;
        }
        f << join({std::to_string(rec.seed), name, std::to_string(rec.step),
                   format_double(rec.direct_norm), format_double(rec.quadratic_norm),
                   format_double(rec.lower), format_double(rec.upper)})
          << '\n';
      }
      const auto state = divergence::replay(inst, opt);
      t.final_norm.push_back(divergence::summarize(inst, state, opt.scheme).direct_norm);
      t.weighted_shrinks += state.weights.cwiseProduct(state.a).squaredNorm() <= state.a.squaredNorm();
    }
  }
  json schemes = json::object();
  for (const auto& [name, t] : tally) {
    schemes[name] = {{"max_relative_gap", t.max_gap},
                     {"bound_violations", t.violations},
                     {"weighted_shrink_fraction",
                      static_cast<double>(t.weighted_shrinks) / static_cast<double>(d.seeds)},
                     {"final_norm_mean", mean(t.final_norm)},
                     {"final_norm_std", stddev(t.final_norm)}};
    out << name << ": final norm " << format_double(mean(t.final_norm)) << ", max gap "
        << format_double(t.max_gap) << ", violations " << t.violations << '\n';
  }
  write_json(dir / "summary.json", json{{"seeds", d.seeds},
                                        {"mode", divergence::to_string(d.mode)},
                                        {"schemes", schemes}});
}

// ---------------------------------------------------------------- markov

void cmd_markov(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir = output_dir(cfg);
  const auto& m = cfg.markov;
  markov::CaseStudyConfig mc = markov::default_case_study_config();
  mc.n_per_source = m.n_per_source;
  mc.length = m.length;
  mc.seed = cfg.seed;
  mc.train.l2 = m.l2;
  mc.methods.clear();
  for (const auto& name : m.methods) {
    UnlearnConfig u;
    u.method = method_from_string(name);
    u.learning_rate = m.eta;
    u.epochs = m.epochs;
    u.update_frequency = m.nu;
    u.rng_seed = cfg.seed;
    mc.methods.push_back(u);
  }
  const markov::CaseStudyResult res = markov::run_case_study(mc);

  const auto cells = [](const markov::CaseStudyTable& t) {
    return std::vector<std::string>{format_double(t.loss_retain), format_double(t.loss_forget),
                                    format_double(t.kl_retain), format_double(t.kl_forget)};
  };
  {
    auto f = open_out(dir / "case_study.csv");
    f << "method,loss_retain,loss_forget,kl_retain,kl_forget,forget_mass,runtime_seconds\n";
    auto first = cells(res.original);
    first.insert(first.begin(), "original");
    first.push_back(format_double(res.original_forget_mass));
    first.push_back(format_double(0.0));
    f << join(first) << '\n';
    for (const auto& row : res.rows) {
      auto c = cells(row.final_table);
      c.insert(c.begin(), to_string(row.method));
      c.push_back(format_double(row.forget_mass));
      c.push_back(format_double(row.wall_clock_seconds));
      f << join(c) << '\n';
    }
  }
  {
    auto f = open_out(dir / "trajectory.csv");
    f << "method,epoch,loss_retain,loss_forget,kl_retain,kl_forget\n";
    for (const auto& row : res.rows) {
      for (std::size_t t = 0; t < row.per_epoch.size(); ++t) {
        auto c = cells(row.per_epoch[t]);
        c.insert(c.begin(), std::to_string(t + 1));
        c.insert(c.begin(), to_string(row.method));
        f << join(c) << '\n';
      }
    }
  }
  out << "original: loss_retain " << format_double(res.original.loss_retain) << '\n';
  for (const auto& row : res.rows) {
    out << to_string(row.method) << ": loss_forget " << format_double(row.final_table.loss_forget)
        << " kl_retain " << format_double(row.final_table.kl_retain) << '\n';
  }
}

// ---------------------------------------------------------------- report

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  std::istringstream s(line);
  while (std::getline(s, cur, ',')) cells.push_back(cur);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void cmd_report(const std::vector<std::string>& dirs, const std::string& out_dir,
                std::ostream& out) {
  const std::vector<std::string>& columns = eval_csv_columns();
  const std::vector<std::string> metrics(columns.begin() + 3, columns.end());
  // method -> metric -> values, in first-seen method order
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  std::map<std::string, int> runs;

  for (const auto& d : dirs) {
    const fs::path csv = fs::path(d) / "runs.csv";
    if (!fs::is_directory(d)) throw ParameterError("report: run directory not found: " + d);
    std::ifstream f(csv);
    if (!f) throw ParameterError("report: missing " + csv.string());
    std::string line;
    std::getline(f, line);
    if (split_csv(line) != columns) throw FormatError("report: unexpected header in " + csv.string());
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (cells.size() != columns.size()) {
        throw FormatError("report: wrong number of fields in " + csv.string());
      }
      const std::string& method = cells[1];
      if (!runs.count(method)) order.push_back(method);
      ++runs[method];
      for (std::size_t c = 3; c < columns.size(); ++c) {
        if (cells[c].empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(cells[c].c_str(), &end);
        if (*end != '\0') throw FormatError("report: bad " + columns[c] + " in " + csv.string());
        values[method][columns[c]].push_back(v);
      }
    }
  }

  fs::create_directories(out_dir);
  {
    auto f = open_out(fs::path(out_dir) / "report.csv");
    std::vector<std::string> header = {"method", "runs"};
    for (const auto& m : metrics) {
      header.push_back(m + "_mean");
      header.push_back(m + "_std");
    }
    f << join(header) << '\n';
    for (const auto& method : order) {
      std::vector<std::string> row = {method, std::to_string(runs[method])};
      for (const auto& m : metrics) {
        const auto& v = values[method][m];
        row.push_back(v.empty() ? "" : format_double(mean(v)));
        row.push_back(v.empty() ? "" : format_double(stddev(v)));
      }
      f << join(row) << '\n';
    }
  }
  {
    // Accuracies and MIA in percent, like the usual unlearning tables.
    const auto cell = [](const std::vector<double>& v, bool percent, int digits) {
      if (v.empty()) return std::string("-");
      const double k = percent ? 100.0 : 1.0;
      std::ostringstream s;
      s << std::fixed << std::setprecision(digits) << k * mean(v) << " ± " << k * stddev(v);
      return s.str();
    };
    auto f = open_out(fs::path(out_dir) / "report.md");
    f << "| Method | Runs | Forget acc (%) | Retain acc (%) | Test acc (%) | MIA (%) | W_dist | "
         "KL retain | KL forget | Time (s) |\n";
    f << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& method : order) {
      auto& v = values[method];
      f << "| " << method << " | " << runs[method] << " | " << cell(v["acc_forget"], true, 2)
        << " | " << cell(v["acc_retain"], true, 2) << " | " << cell(v["acc_test"], true, 2)
        << " | " << cell(v["mia"], true, 2) << " | " << cell(v["w_dist"], false, 4) << " | "
        << cell(v["kl_retain"], false, 4) << " | " << cell(v["kl_forget"], false, 4) << " | "
        << cell(v["runtime_seconds"], false, 2) << " |\n";
    }
  }
  out << "report: " << dirs.size() << " runs, " << order.size() << " methods -> " << out_dir
      << '\n';
}

// ---------------------------------------------------------------- parsing

// Pulls `--section.key value` and `--section.key=value` out of the raw
// arguments; everything else goes to CLI11.
std::vector<std::pair<std::string, std::string>> extract_dotted(std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> found;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) {
      rest.push_back(a);
      continue;
    }
    const auto eq = a.find('=');
    const std::string name = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    if (name.find('.') == std::string::npos) {
      rest.push_back(a);
      continue;
    }
    if (eq != std::string::npos) {
      found.emplace_back(name, a.substr(eq + 1));
    } else {
      if (i + 1 >= args.size()) throw ParameterError("--" + name + " needs a value");
      found.emplace_back(name, args[++i]);
    }
  }
  args = std::move(rest);
  return found;
}

std::uint64_t parse_seed(const std::string& text, const std::string& where) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || text[0] == '-' || *end != '\0' || errno == ERANGE) {
    throw ParameterError(where + ": not a non-negative integer: '" + text + "'");
  }
  return v;
}

}  // namespace

ExperimentConfig resolve_config(const std::string& preset, const std::string& config_path,
                                const std::vector<std::pair<std::string, std::string>>& overrides) {
  json j;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ParameterError("cannot read config file " + config_path);
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw FormatError("config file " + config_path + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError("config file " + config_path + ": expected an object");
    if (!preset.empty()) j["preset"] = preset;
    j = to_json(from_json(j));
  } else {
    j = to_json(make_preset(preset.empty() ? "gaussian3" : preset));
  }
  if (const char* env = std::getenv("UNLEARN_LAB_SEED"); env != nullptr && *env != '\0') {
    j["seed"] = parse_seed(env, "UNLEARN_LAB_SEED");
  }
  for (const auto& [key, value] : overrides) apply_override(j, key, value);
  return from_json(j);
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Influence-guided machine unlearning on a frozen-feature softmax head",
               "unlearn_lab"};
  app.require_subcommand(1);

  struct Convenience {
    const char* flag;
    const char* key;
    const char* help;
  };
  static const Convenience conv[] = {
      {"--out", "output_dir", "output directory"},
      {"--seed", "seed", "experiment seed"},
      {"--method", "unlearn.method", "unlearning method"},
      {"--nu", "unlearn.nu", "influence update frequency (0 = once)"},
      {"--r", "unlearn.r", "top-r ratio of influential samples"},
  };
  std::string preset;
  std::string config_path;
  std::map<std::string, std::string> conv_values;
  std::vector<std::pair<CLI::Option*, std::string>> conv_options;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--preset", preset, "gaussian3, loo or markov");
    sub->add_option("--config", config_path, "JSON config file");
    for (const auto& c : conv) {
      conv_options.emplace_back(sub->add_option(c.flag, conv_values[c.key], c.help), c.key);
    }
    sub->footer("Any config entry can be set with --section.key value, e.g. --unlearn.eta 0.5");
  };

  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"gen", "generate a dataset (or the Markov corpus with --preset markov)"},
           {"train", "train the classifier head on dataset.path"},
           {"unlearn", "run one unlearning method"},
           {"eval", "evaluate the original or a saved model"},
           {"oracle", "leave-one-out retraining against influence estimates"},
           {"divergence", "logistic replay divergence identities and bounds"},
           {"markov", "Markov-chain sequence case study"}}) {
    subs[name] = app.add_subcommand(name, help);
    add_common(subs[name]);
  }
  std::vector<std::string> report_dirs;
  std::string report_out = "report";
  CLI::App* report = app.add_subcommand("report", "aggregate the runs.csv files of run directories");
  report->add_option("dirs", report_dirs, "run directories")->required();
  report->add_option("--out", report_out, "output directory");

  try {
    std::vector<std::string> args = raw_args;
    const auto dotted = extract_dotted(args);
    std::reverse(args.begin(), args.end());
    try {
      app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitUsage;
    }

    if (report->parsed()) {
      if (!dotted.empty()) throw ParameterError("report does not take config overrides");
      cmd_report(report_dirs, report_out, out);
      return kExitOk;
    }
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& [opt, key] : conv_options) {
      if (opt->count() > 0) overrides.emplace_back(key, conv_values[key]);
    }
    overrides.insert(overrides.end(), dotted.begin(), dotted.end());
    const ExperimentConfig cfg = resolve_config(preset, config_path, overrides);

    if (subs["gen"]->parsed()) cmd_gen(cfg, out);
    else if (subs["train"]->parsed()) cmd_train(cfg, out);
    else if (subs["unlearn"]->parsed()) cmd_unlearn(cfg, out);
    else if (subs["eval"]->parsed()) cmd_eval(cfg, out);
    else if (subs["oracle"]->parsed()) cmd_oracle(cfg, out);
    else if (subs["divergence"]->parsed()) cmd_divergence(cfg, out);
    else if (subs["markov"]->parsed()) cmd_markov(cfg, out);
    return kExitOk;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace unlearn_lab::cli
