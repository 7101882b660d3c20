#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "biastransfer/metrics.hpp"
#include "biastransfer/nn/layers.hpp"

namespace bt {

struct DownstreamConfig {
  int input_size = 128;
  int width = 16;
  int num_classes = 4;
  int epochs = 40;
  double lr = 1e-3;
  bool augment = true;  // random dihedral transforms
  double min_val_accuracy = 0.85;
  std::uint64_t seed = 7;
};

/// Small convolutional classifier: four stride-2 k4 conv stages with
/// LeakyReLU, a 1x1 class projection and global average pooling. No
/// normalisation layers, so colour statistics reach the decision.
class DownstreamModel {
 public:
  explicit DownstreamModel(const DownstreamConfig& cfg);
  ~DownstreamModel();
  DownstreamModel(DownstreamModel&&) noexcept;
  DownstreamModel& operator=(DownstreamModel&&) noexcept;

  /// Logits for one unit- or symmetric-range image of side input_size.
  std::vector<double> logits(const Image& img) const;
  int predict(const Image& img) const;

  nn::ParameterRefs parameters();
  const DownstreamConfig& config() const { return cfg_; }
  double val_accuracy() const { return val_accuracy_; }

  void save(const std::filesystem::path& path);
  static DownstreamModel load(const std::filesystem::path& path);

 private:
  friend DownstreamModel train_downstream(const std::vector<Image>&, const std::vector<int>&,
                                          const std::vector<Image>&, const std::vector<int>&,
                                          const DownstreamConfig&);
  nn::Tensor input(const Image& img) const;

  DownstreamConfig cfg_;
  std::unique_ptr<nn::Sequential> net_;
  double val_accuracy_ = 0.0;
};

/// Trains on the labelled target-domain training split and keeps the
/// weights of the best validation epoch. Raises DataError when validation
/// accuracy stays below cfg.min_val_accuracy, which invalidates the
/// benchmark.
DownstreamModel train_downstream(const std::vector<Image>& train_images,
                                 const std::vector<int>& train_labels,
                                 const std::vector<Image>& val_images,
                                 const std::vector<int>& val_labels, const DownstreamConfig& cfg);

ClassificationScores evaluate_downstream(const DownstreamModel& model,
                                         const std::vector<Image>& images,
                                         const std::vector<int>& labels);

}  // namespace bt
