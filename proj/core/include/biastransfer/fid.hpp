#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "biastransfer/imaging.hpp"

namespace bt {

/// N x dim feature matrix of one image set.
struct FeatureEmbedding {
  std::string extractor_id;
  Eigen::MatrixXd features;

  int dim() const { return static_cast<int>(features.cols()); }
  int count() const { return static_cast<int>(features.rows()); }
};

inline constexpr double kFidRegularization = 1e-6;
inline constexpr double kFidImagTolerance = 1e-3;

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)) with S + eps*I.
/// The trace of the square root is taken as Tr((S_a^(1/2) S_b S_a^(1/2))^(1/2)),
/// which has the same eigenvalues and is symmetric. Negative eigenvalues
/// whose square root exceeds the imaginary tolerance raise NumericError.
double frechet_distance(const FeatureEmbedding& a, const FeatureEmbedding& b);

/// Maps one image (any range, square side >= 32) to a feature vector.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd features(const Image& img) const = 0;
};

/// Fixed random convolutional encoder: five stride-2 k4 conv stages
/// (3-16-32-64-64-64) with LeakyReLU 0.2, global average pooling, 64
/// features. Weights are generated from a fixed seed, so the extractor
/// needs no asset file.
class RandConvExtractor final : public FeatureExtractor {
 public:
  explicit RandConvExtractor(std::uint64_t seed = kDefaultSeed);
  ~RandConvExtractor() override;
  std::string id() const override { return "randconv64"; }
  int dim() const override { return 64; }
  Eigen::VectorXd features(const Image& img) const override;

  static constexpr std::uint64_t kDefaultSeed = 20210611;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

using ExtractorFactory = std::function<std::unique_ptr<FeatureExtractor>()>;

/// Registers an extractor under `id`, replacing any previous entry.
void register_extractor(const std::string& id, ExtractorFactory factory);
/// Shared instance for `id`; unknown ids raise ConfigError.
const FeatureExtractor& get_extractor(const std::string& id);

FeatureEmbedding extract_features(const std::vector<Image>& images,
                                  const std::string& extractor_id = "randconv64");

}  // namespace bt
