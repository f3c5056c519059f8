#pragma once

#include "unlearn_lab/influence.hpp"
#include "unlearn_lab/model.hpp"
#include "unlearn_lab/synth_data.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace unlearn_lab::io {

struct DatasetFile {
  LabeledDataset data;
  std::optional<SplitSpec> split;
};

/// Writes `<stem>.json` (dims, classes, seed, split indices, body name) and
/// `<stem>.csv` (header row, then features..., label per sample). Doubles are
/// printed with 17 significant digits so loading is bit-exact.
void save_dataset(const std::filesystem::path& stem, const LabeledDataset& ds,
                  const std::optional<SplitSpec>& split = std::nullopt);

// Accepts the stem or either file. Throws FormatError naming the bad field.
DatasetFile load_dataset(const std::filesystem::path& path);

// CSV: header "source,s0,...", one sequence per row.
void save_markov_corpus(const std::filesystem::path& path,
                        const MarkovCorpus& corpus);
MarkovCorpus load_markov_corpus(const std::filesystem::path& path);

struct ModelFile {
  ClassifierState classifier;
  FeatureExtractor extractor = FeatureExtractor::identity(1);
};

/// JSON: row-major weight list, bias list and the extractor kind/dims/seed.
/// The random projection is regenerated from its seed on load.
void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

// CSV: index,raw,selected,weight.
void save_influence_csv(const std::filesystem::path& path,
                        const InfluenceReport& report,
                        const IndexList& sample_ids);

// Full-precision formatting used by every CSV writer.
std::string format_double(double value);

}  // namespace unlearn_lab::io
