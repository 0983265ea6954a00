#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "fstrans/config.hpp"

namespace fstrans {

/// Deterministic RNG with explicit draw algorithms, so results are
/// bit-identical across platforms and serializable into checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, n), rejection-sampled to avoid modulo bias.
  std::int64_t uniform_int(std::int64_t n);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform_real();

  /// Derives an independent stream (e.g. one per worker or sub-task).
  Rng fork(std::uint64_t salt);

  std::string save_state() const;
  void load_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

/// Image tensor batch: values [B,3,H,W] in [-1,1], labels [B] in [0,|S|+|T|).
struct ImageBatch {
  torch::Tensor values;
  torch::Tensor labels;
};

/// One training sample: a content image of class c_x plus K class images of c_y.
struct TrainingTuple {
  torch::Tensor content;       // [1,3,H,W]
  torch::Tensor class_images;  // [K,3,H,W]
  std::int64_t c_x = -1;
  std::int64_t c_y = -1;
};

/// A collated batch of TrainingTuples.
struct TupleBatch {
  torch::Tensor content;       // [B,3,H,W]
  torch::Tensor class_images;  // [B,K,3,H,W]
  torch::Tensor c_x;           // [B] long
  torch::Tensor c_y;           // [B] long
};

/// Immutable view of a class-partitioned corpus. Class label order is
/// source classes first (in config order), then target classes.
class CorpusIndex {
 public:
  CorpusIndex() = default;

  const DatasetConfig& config() const { return cfg_; }
  int image_size() const { return cfg_.image_size; }
  std::int64_t n_source() const { return static_cast<std::int64_t>(cfg_.source_classes.size()); }
  std::int64_t n_target() const { return static_cast<std::int64_t>(cfg_.target_classes.size()); }

  const std::vector<std::string>& source_classes() const { return cfg_.source_classes; }
  const std::vector<std::string>& target_classes() const { return cfg_.target_classes; }
  std::vector<std::string> all_classes() const;

  /// Global label of a class name (source block first, then target block).
  std::int64_t label_of(const std::string& cls) const;
  const std::vector<std::filesystem::path>& files(const std::string& cls) const;

  /// Restricts the source set to its first n classes (nested subsets for sweeps).
  CorpusIndex with_source_subset(int n) const;

  friend CorpusIndex scan_corpus(const DatasetConfig& cfg);

 private:
  DatasetConfig cfg_;
  std::map<std::string, std::vector<std::filesystem::path>> files_;
};

/// Builds the class->file index. Missing class directory or an emptied class
/// is a ConfigError; undecodable images are skipped with a warning on stderr.
CorpusIndex scan_corpus(const DatasetConfig& cfg);

/// Draws (c_x, c_y) uniformly without replacement from the source classes,
/// the content image uniformly from class c_x and K class images with
/// replacement from class c_y. Pure function of (index, K, rng).
TrainingTuple sample_training_tuple(const CorpusIndex& index, int k, Rng& rng);

/// Collates batch_size tuples; optionally applies horizontal flips (p=0.5,
/// drawn from the same rng stream).
TupleBatch sample_training_batch(const CorpusIndex& index, int batch_size, int k, Rng& rng,
                                 bool flip_augment);

/// Loads every file of a class as one ImageBatch (deterministic file order).
ImageBatch load_class_batch(const CorpusIndex& index, const std::string& cls,
                            std::int64_t max_images = -1);

torch::Tensor load_images(const std::vector<std::filesystem::path>& paths, int image_size);

struct SynthesisSpec {
  int n_classes = 16;
  int n_per_class = 100;
  int image_size = 32;
  std::uint64_t seed = 7;
};

/// Renders the procedural corpus: per class a distinct (shape template,
/// palette, texture) combination; within a class only pose, position and
/// scale vary. Byte-identical output for identical spec. Writes
/// root/manifest.json with the generation parameters.
void synthesize_corpus(const std::filesystem::path& root, const SynthesisSpec& spec);

}  // namespace fstrans
