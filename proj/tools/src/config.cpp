#include "config.hpp"

#include "unlearn_lab/error.hpp"

#include <cerrno>
#include <cstdlib>

namespace unlearn_lab::cli {

using nlohmann::json;

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"gaussian3", "loo", "markov"};
  return names;
}

ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  cfg.model.train.solver = Solver::newton;
  cfg.model.train.tol = 1e-9;
  cfg.model.train.l2 = 1e-3;
  cfg.unlearn.learning_rate = 1.0;
  cfg.unlearn.epochs = 24;
  // Stop once the forget set is forgotten; -1 runs all epochs.
  cfg.unlearn.target_forget_accuracy = 0.01;
  if (name == "gaussian3" || name == "markov") return cfg;
  if (name == "loo") {
    cfg.dataset.n_per_class = 60;
    cfg.dataset.spread = 0.5;
    cfg.model.feature_dim = 16;
    cfg.model.train.tol = 1e-10;
    return cfg;
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ParameterError("unknown preset '" + name + "' (expected one of: " + valid + ")");
}

void ExperimentConfig::validate() const {
  if (dataset.class_count < 2) throw ParameterError("dataset.class_count must be >= 2");
  if (dataset.input_dim < 2) throw ParameterError("dataset.input_dim must be >= 2");
  if (dataset.n_per_class < 5) throw ParameterError("dataset.n_per_class must be >= 5");
  if (!(dataset.spread > 0.0)) throw ParameterError("dataset.spread must be > 0");
  if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) {
    throw ParameterError("split.test_fraction must be in (0, 1)");
  }
  if (model.feature_dim < 1) throw ParameterError("model.feature_dim must be >= 1");
  model.train.validate();
  unlearn.validate();
  if (oracle.probes < 0) throw ParameterError("oracle.probes must be >= 0");
  if (oracle.hessian != "train" && oracle.hessian != "forget") {
    throw ParameterError("oracle.hessian must be train or forget");
  }
  if (divergence.seeds < 1 || divergence.n_forget < 1 || divergence.dim < 1 ||
      divergence.steps < 0) {
    throw ParameterError("divergence: seeds, n_forget and dim must be >= 1, steps >= 0");
  }
  for (const auto& s : divergence.schemes) divergence::weight_scheme_from_string(s);
  if (markov.n_per_source < 1 || markov.length < 2) {
    throw ParameterError("markov: n_per_source must be >= 1 and length >= 2");
  }
  for (const auto& m : markov.methods) method_from_string(m);
  if (output_dir.empty()) throw ParameterError("output_dir must not be empty");
}

json to_json(const ExperimentConfig& c) {
  const auto& t = c.model.train;
  const auto& u = c.unlearn;
  return json{
      {"preset", c.preset},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"dataset",
       {{"class_count", c.dataset.class_count},
        {"input_dim", c.dataset.input_dim},
        {"n_per_class", c.dataset.n_per_class},
        {"spread", c.dataset.spread},
        {"path", c.dataset.path}}},
      {"split",
       {{"mode", to_string(c.split.mode)},
        {"target_class", c.split.target_class},
        {"fraction", c.split.fraction},
        {"test_fraction", c.split.test_fraction}}},
      {"model",
       {{"extractor", to_string(c.model.extractor)},
        {"feature_dim", c.model.feature_dim},
        {"path", c.model.path},
        {"lr", t.learning_rate},
        {"max_epochs", t.max_epochs},
        {"tol", t.tol},
        {"l2", t.l2},
        {"solver", to_string(t.solver)},
        {"init_seed", t.init_seed}}},
      {"unlearn",
       {{"method", to_string(u.method)},
        {"eta", u.learning_rate},
        {"epochs", u.epochs},
        {"nu", u.update_frequency},
        {"r", u.top_ratio},
        {"beta", u.beta},
        {"alpha", u.l1_strength},
        {"percentile", u.percentile},
        {"damping", u.damping.value},
        {"damping_relative", u.damping.relative},
        {"batch_size", u.batch_size},
        {"target_forget_accuracy", u.target_forget_accuracy}}},
      {"metrics", {{"retrain_reference", c.metrics.retrain_reference}}},
      {"oracle", {{"probes", c.oracle.probes}, {"hessian", c.oracle.hessian}}},
      {"divergence",
       {{"seeds", c.divergence.seeds},
        {"n_forget", c.divergence.n_forget},
        {"dim", c.divergence.dim},
        {"steps", c.divergence.steps},
        {"eta", c.divergence.eta},
        {"beta", c.divergence.beta},
        {"mode", divergence::to_string(c.divergence.mode)},
        {"schemes", c.divergence.schemes}}},
      {"markov",
       {{"n_per_source", c.markov.n_per_source},
        {"length", c.markov.length},
        {"l2", c.markov.l2},
        {"eta", c.markov.eta},
        {"epochs", c.markov.epochs},
        {"nu", c.markov.nu},
        {"methods", c.markov.methods}}}};
}

namespace {

const json& section(const json& j, const std::string& name) {
  if (!j.contains(name) || !j.at(name).is_object()) {
    throw ParameterError("config: missing section '" + name + "'");
  }
  return j.at(name);
}

template <typename T>
void read(const json& j, const std::string& where, const std::string& key, T& out) {
  if (!j.contains(key)) return;  // keep the default
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParameterError("config: '" + where + key + "' has the wrong type");
  }
}

void check_keys(const json& j, const json& reference, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!reference.contains(key)) {
      throw ParameterError("config: unknown key '" + where + key + "'");
    }
    if (value.is_object() && reference.at(key).is_object()) {
      check_keys(value, reference.at(key), where + key + ".");
    }
  }
}

}  // namespace

ExperimentConfig from_json(const json& j) {
  if (!j.is_object()) throw ParameterError("config: expected a JSON object");
  ExperimentConfig c;
  read(j, "", "preset", c.preset);
  if (!c.preset.empty()) c = make_preset(c.preset);
  check_keys(j, to_json(c), "");
  read(j, "", "seed", c.seed);
  read(j, "", "output_dir", c.output_dir);

  std::string text;
  if (j.contains("dataset")) {
    const json& s = section(j, "dataset");
    read(s, "dataset.", "class_count", c.dataset.class_count);
    read(s, "dataset.", "input_dim", c.dataset.input_dim);
    read(s, "dataset.", "n_per_class", c.dataset.n_per_class);
    read(s, "dataset.", "spread", c.dataset.spread);
    read(s, "dataset.", "path", c.dataset.path);
  }
  if (j.contains("split")) {
    const json& s = section(j, "split");
    text = to_string(c.split.mode);
    read(s, "split.", "mode", text);
    c.split.mode = split_mode_from_string(text);
    read(s, "split.", "target_class", c.split.target_class);
    read(s, "split.", "fraction", c.split.fraction);
    read(s, "split.", "test_fraction", c.split.test_fraction);
  }
  if (j.contains("model")) {
    const json& s = section(j, "model");
    auto& t = c.model.train;
    text = to_string(c.model.extractor);
    read(s, "model.", "extractor", text);
    c.model.extractor = extractor_kind_from_string(text);
    read(s, "model.", "feature_dim", c.model.feature_dim);
    read(s, "model.", "path", c.model.path);
    read(s, "model.", "lr", t.learning_rate);
    read(s, "model.", "max_epochs", t.max_epochs);
    read(s, "model.", "tol", t.tol);
    read(s, "model.", "l2", t.l2);
    text = to_string(t.solver);
    read(s, "model.", "solver", text);
    t.solver = solver_from_string(text);
    read(s, "model.", "init_seed", t.init_seed);
  }
  if (j.contains("unlearn")) {
    const json& s = section(j, "unlearn");
    auto& u = c.unlearn;
    text = to_string(u.method);
    read(s, "unlearn.", "method", text);
    u.method = method_from_string(text);
    read(s, "unlearn.", "eta", u.learning_rate);
    read(s, "unlearn.", "epochs", u.epochs);
    read(s, "unlearn.", "nu", u.update_frequency);
    read(s, "unlearn.", "r", u.top_ratio);
    read(s, "unlearn.", "beta", u.beta);
    read(s, "unlearn.", "alpha", u.l1_strength);
    read(s, "unlearn.", "percentile", u.percentile);
    read(s, "unlearn.", "damping", u.damping.value);
    read(s, "unlearn.", "damping_relative", u.damping.relative);
    read(s, "unlearn.", "batch_size", u.batch_size);
    read(s, "unlearn.", "target_forget_accuracy", u.target_forget_accuracy);
  }
  if (j.contains("metrics")) {
    read(section(j, "metrics"), "metrics.", "retrain_reference", c.metrics.retrain_reference);
  }
  if (j.contains("oracle")) {
    const json& s = section(j, "oracle");
    read(s, "oracle.", "probes", c.oracle.probes);
    read(s, "oracle.", "hessian", c.oracle.hessian);
  }
  if (j.contains("divergence")) {
    const json& s = section(j, "divergence");
    auto& d = c.divergence;
    read(s, "divergence.", "seeds", d.seeds);
    read(s, "divergence.", "n_forget", d.n_forget);
    read(s, "divergence.", "dim", d.dim);
    read(s, "divergence.", "steps", d.steps);
    read(s, "divergence.", "eta", d.eta);
    read(s, "divergence.", "beta", d.beta);
    text = divergence::to_string(d.mode);
    read(s, "divergence.", "mode", text);
    d.mode = divergence::replay_mode_from_string(text);
    read(s, "divergence.", "schemes", d.schemes);
  }
  if (j.contains("markov")) {
    const json& s = section(j, "markov");
    auto& m = c.markov;
    read(s, "markov.", "n_per_source", m.n_per_source);
    read(s, "markov.", "length", m.length);
    read(s, "markov.", "l2", m.l2);
    read(s, "markov.", "eta", m.eta);
    read(s, "markov.", "epochs", m.epochs);
    read(s, "markov.", "nu", m.nu);
    read(s, "markov.", "methods", m.methods);
  }
  c.unlearn.rng_seed = c.seed;
  c.validate();
  return c;
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

json parse_like(const json& current, const std::string& key, const std::string& value) {
  const auto bad = [&] {
    return ParameterError("--" + key + ": cannot parse '" + value + "'");
  };
  if (current.is_boolean()) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw bad();
  }
  if (current.is_number_integer() || current.is_number_unsigned()) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (value.empty() || *end != '\0' || errno == ERANGE) throw bad();
    if (current.is_number_unsigned()) {
      if (v < 0) throw bad();
      return static_cast<std::uint64_t>(v);
    }
    return v;
  }
  if (current.is_number_float()) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0' || errno == ERANGE) throw bad();
    return v;
  }
  if (current.is_array()) return split_list(value);
  return value;
}

}  // namespace

void apply_override(json& j, const std::string& key, const std::string& value) {
  json* node = &j;
  std::string path;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    path += (path.empty() ? "" : ".") + part;
    if (!node->is_object() || !node->contains(part)) {
      throw ParameterError("unknown config key '" + path + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ParameterError("config key '" + key + "' is a section");
  *node = parse_like(*node, key, value);
}

}  // namespace unlearn_lab::cli
