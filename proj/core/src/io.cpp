#include "unlearn_lab/io.hpp"

#include "unlearn_lab/error.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace unlearn_lab::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "unlearn_lab.dataset";
constexpr const char* kModelFormat = "unlearn_lab.model";
constexpr int kFormatVersion = 1;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw FormatError(where + ": '" + text + "' is not a number");
  }
  return v;
}

int parse_int(const std::string& text, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw FormatError(where + ": '" + text + "' is not an integer");
  }
  return static_cast<int>(v);
}

template <typename T>
T field(const json& j, const std::string& key, const std::string& file) {
  if (!j.contains(key)) throw FormatError(file + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(file + ": field '" + key + "' has the wrong type");
  }
}

json read_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

fs::path dataset_stem(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".json" || ext == ".csv") return fs::path(path).replace_extension();
  return path;
}

fs::path with_suffix(const fs::path& stem, const std::string& suffix) {
  return fs::path(stem.string() + suffix);
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void save_dataset(const fs::path& stem_in, const LabeledDataset& ds,
                  const std::optional<SplitSpec>& split) {
  ds.validate();
  const fs::path stem = dataset_stem(stem_in);
  const fs::path body = with_suffix(stem, ".csv");

  json header = {{"format", kDatasetFormat},
                 {"version", kFormatVersion},
                 {"n", ds.size()},
                 {"input_dim", ds.input_dim()},
                 {"class_count", ds.class_count},
                 {"seed", ds.seed},
                 {"body", body.filename().string()}};
  if (split) {
    header["split"] = {{"mode", to_string(split->mode)},
                       {"target_class", split->target_class},
                       {"fraction", split->fraction},
                       {"seed", split->seed},
                       {"forget", split->forget},
                       {"retain", split->retain},
                       {"test", split->test}};
  }
  open_out(with_suffix(stem, ".json")) << header.dump(2) << '\n';

  std::ofstream out = open_out(body);
  for (int j = 0; j < ds.input_dim(); ++j) out << 'x' << j << ',';
  out << "label\n";
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.input_dim(); ++j) out << format_double(ds.features(i, j)) << ',';
    out << ds.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

DatasetFile load_dataset(const fs::path& path) {
  const fs::path stem = dataset_stem(path);
  const fs::path header_path = with_suffix(stem, ".json");
  const std::string hname = header_path.string();
  const json header = read_json(header_path);

  if (field<std::string>(header, "format", hname) != kDatasetFormat) {
    throw FormatError(hname + ": field 'format' is not " + std::string(kDatasetFormat));
  }
  const int n = field<int>(header, "n", hname);
  const int d = field<int>(header, "input_dim", hname);
  if (n < 0) throw FormatError(hname + ": field 'n' must be >= 0");
  if (d < 1) throw FormatError(hname + ": field 'input_dim' must be >= 1");

  DatasetFile file;
  file.data.class_count = field<int>(header, "class_count", hname);
  file.data.seed = field<std::uint64_t>(header, "seed", hname);
  const fs::path body = stem.parent_path() / field<std::string>(header, "body", hname);
  const std::string bname = body.string();

  std::ifstream in = open_in(body);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(bname + ": missing header row");
  if (static_cast<int>(split_csv(line).size()) != d + 1) {
    throw FormatError(bname + ": header has the wrong number of columns");
  }
  file.data.features.resize(n, d);
  file.data.labels.reserve(static_cast<std::size_t>(n));
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= n) throw FormatError(bname + ": more rows than field 'n' = " + std::to_string(n));
    const auto cells = split_csv(line);
    const std::string where = bname + " row " + std::to_string(row + 1);
    if (static_cast<int>(cells.size()) != d + 1) throw FormatError(where + ": wrong column count");
    for (int j = 0; j < d; ++j) file.data.features(row, j) = parse_double(cells[static_cast<std::size_t>(j)], where);
    file.data.labels.push_back(parse_int(cells.back(), where));
    ++row;
  }
  if (row != n) throw FormatError(bname + ": fewer rows than field 'n' = " + std::to_string(n));
  try {
    file.data.validate();
  } catch (const ParameterError& e) {
    throw FormatError(bname + ": " + e.what());
  }

  if (header.contains("split")) {
    const json& s = header.at("split");
    const std::string sname = hname + " split";
    SplitSpec spec;
    try {
      spec.mode = split_mode_from_string(field<std::string>(s, "mode", sname));
    } catch (const ParameterError& e) {
      throw FormatError(sname + ": field 'mode': " + e.what());
    }
    spec.target_class = field<int>(s, "target_class", sname);
    spec.fraction = field<double>(s, "fraction", sname);
    spec.seed = field<std::uint64_t>(s, "seed", sname);
    spec.forget = field<IndexList>(s, "forget", sname);
    spec.retain = field<IndexList>(s, "retain", sname);
    spec.test = field<IndexList>(s, "test", sname);
    for (const IndexList* list : {&spec.forget, &spec.retain, &spec.test}) {
      for (int i : *list) {
        if (i < 0 || i >= n) throw FormatError(sname + ": index " + std::to_string(i) + " out of range");
      }
    }
    file.split = std::move(spec);
  }
  return file;
}

void save_markov_corpus(const fs::path& path, const MarkovCorpus& corpus) {
  if (corpus.sequences.size() != corpus.sources.size()) {
    throw ParameterError("corpus: one source tag per sequence is required");
  }
  std::ofstream out = open_out(path);
  out << "# seed=" << corpus.seed << '\n';
  out << "source";
  for (int t = 0; t < corpus.length(); ++t) out << ",s" << t;
  out << '\n';
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    out << to_string(corpus.sources[i]);
    for (int s : corpus.sequences[i]) out << ',' << s;
    out << '\n';
  }
}

MarkovCorpus load_markov_corpus(const fs::path& path) {
  const std::string name = path.string();
  std::ifstream in = open_in(path);
  MarkovCorpus corpus;
  std::string line;
  int row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# seed=", 0) == 0) {
      corpus.seed = std::stoull(line.substr(7));
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    ++row;
    const auto cells = split_csv(line);
    const std::string where = name + " row " + std::to_string(row);
    if (cells.size() < 3) throw FormatError(where + ": a sequence needs at least 2 states");
    try {
      corpus.sources.push_back(markov_source_from_string(cells[0]));
    } catch (const ParameterError& e) {
      throw FormatError(where + ": " + e.what());
    }
    std::vector<int> seq;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      const int s = parse_int(cells[j], where);
      if (s < 0 || s >= kMarkovStateCount) throw FormatError(where + ": state out of range");
      seq.push_back(s);
    }
    if (!corpus.sequences.empty() && seq.size() != corpus.sequences.front().size()) {
      throw FormatError(where + ": sequences must share one length");
    }
    corpus.sequences.push_back(std::move(seq));
  }
  if (!header_seen) throw FormatError(name + ": missing header row");
  return corpus;
}

void save_model(const fs::path& path, const ModelFile& model) {
  const ClassifierState& c = model.classifier;
  json weights = json::array();
  for (int k = 0; k < c.class_count(); ++k) {
    std::vector<double> row;
    for (int j = 0; j < c.feature_dim(); ++j) row.push_back(c.weights(k, j));
    weights.push_back(row);
  }
  std::vector<double> bias(c.bias.data(), c.bias.data() + c.bias.size());
  const FeatureExtractor& e = model.extractor;
  const json doc = {{"format", kModelFormat},
                    {"version", kFormatVersion},
                    {"class_count", c.class_count()},
                    {"feature_dim", c.feature_dim()},
                    {"weights", weights},
                    {"bias", bias},
                    {"extractor",
                     {{"kind", to_string(e.kind())},
                      {"input_dim", e.input_dim()},
                      {"feature_dim", e.feature_dim()},
                      {"seed", e.seed()}}}};
  open_out(path) << doc.dump(2) << '\n';
}

ModelFile load_model(const fs::path& path) {
  const std::string name = path.string();
  const json doc = read_json(path);
  if (field<std::string>(doc, "format", name) != kModelFormat) {
    throw FormatError(name + ": field 'format' is not " + std::string(kModelFormat));
  }
  const int c = field<int>(doc, "class_count", name);
  const int d = field<int>(doc, "feature_dim", name);
  if (c < 2) throw FormatError(name + ": field 'class_count' must be >= 2");
  if (d < 1) throw FormatError(name + ": field 'feature_dim' must be >= 1");
  const auto weights = field<std::vector<std::vector<double>>>(doc, "weights", name);
  const auto bias = field<std::vector<double>>(doc, "bias", name);
  if (static_cast<int>(weights.size()) != c) throw FormatError(name + ": field 'weights' needs class_count rows");
  if (static_cast<int>(bias.size()) != c) throw FormatError(name + ": field 'bias' needs class_count entries");

  ModelFile file;
  file.classifier = ClassifierState::zeros(c, d);
  for (int k = 0; k < c; ++k) {
    if (static_cast<int>(weights[static_cast<std::size_t>(k)].size()) != d) {
      throw FormatError(name + ": field 'weights' row " + std::to_string(k) + " needs feature_dim entries");
    }
    for (int j = 0; j < d; ++j) file.classifier.weights(k, j) = weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    file.classifier.bias(k) = bias[static_cast<std::size_t>(k)];
  }

  if (!doc.contains("extractor")) throw FormatError(name + ": missing field 'extractor'");
  const json& ex = doc.at("extractor");
  const std::string ename = name + " extractor";
  const int in_dim = field<int>(ex, "input_dim", ename);
  const int feat_dim = field<int>(ex, "feature_dim", ename);
  if (feat_dim != d) throw FormatError(ename + ": field 'feature_dim' disagrees with the classifier");
  ExtractorKind kind;
  try {
    kind = extractor_kind_from_string(field<std::string>(ex, "kind", ename));
  } catch (const ParameterError& e) {
    throw FormatError(ename + ": field 'kind': " + e.what());
  }
  if (kind == ExtractorKind::identity) {
    if (in_dim != feat_dim) throw FormatError(ename + ": identity extractor needs input_dim == feature_dim");
    file.extractor = FeatureExtractor::identity(in_dim);
  } else {
    file.extractor = FeatureExtractor::random_relu(in_dim, feat_dim,
                                                   field<std::uint64_t>(ex, "seed", ename));
  }
  return file;
}

void save_influence_csv(const fs::path& path, const InfluenceReport& report,
                        const IndexList& sample_ids) {
  if (sample_ids.size() != static_cast<std::size_t>(report.raw.size())) {
    throw ParameterError("save_influence_csv: one sample id per influence value is required");
  }
  std::ofstream out = open_out(path);
  out << "index,raw,selected,weight\n";
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << sample_ids[i] << ',' << format_double(report.raw(k)) << ','
        << (report.selected[i] ? 1 : 0) << ','
        << format_double(report.weights.size() > k ? report.weights(k) : 0.0) << '\n';
  }
}

}  // namespace unlearn_lab::io
