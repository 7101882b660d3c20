#include "biastransfer/fid.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "biastransfer/errors.hpp"
#include "biastransfer/nn/layers.hpp"
#include "biastransfer/rng.hpp"

namespace bt {

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments moments(const FeatureEmbedding& e) {
  if (e.count() < 2) throw DataError("frechet_distance needs at least 2 samples per set");
  if (!e.features.allFinite()) throw NumericError("non-finite features in embedding");
  Moments m;
  m.mean = e.features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = e.features.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * centered / static_cast<double>(e.count() - 1);
  m.cov.diagonal().array() += kFidRegularization;
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition did not converge");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureEmbedding& a, const FeatureEmbedding& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("feature dims differ: " + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()));
  }
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const Eigen::MatrixXd ra = psd_sqrt(ma.cov);
  Eigen::MatrixXd inner = ra * mb.cov * ra;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("matrix square root did not converge");
  double trace_sqrt = 0.0;
  for (double lambda : eig.eigenvalues()) {
    if (lambda < 0.0) {
      if (std::sqrt(-lambda) >= kFidImagTolerance) {
        throw NumericError("matrix square root has imaginary component " +
                           std::to_string(std::sqrt(-lambda)));
      }
      continue;
    }
    trace_sqrt += std::sqrt(lambda);
  }
  const double d = (ma.mean - mb.mean).squaredNorm() + ma.cov.trace() + mb.cov.trace() -
                   2.0 * trace_sqrt;
  return std::max(d, 0.0);
}

struct RandConvExtractor::Impl {
  nn::Sequential net;
};

RandConvExtractor::RandConvExtractor(std::uint64_t seed) : impl_(std::make_unique<Impl>()) {
  constexpr int widths[] = {3, 16, 32, 64, 64, 64};
  Rng rng(seed);
  for (int i = 0; i < 5; ++i) {
    auto conv = std::make_unique<nn::Conv2d>(widths[i], widths[i + 1], 4, 2, 1, nn::PadMode::reflect);
    nn::ParameterRefs refs;
    conv->collect_parameters(refs);
    nn::init_normal(refs, rng, std::sqrt(2.0 / (widths[i] * 16.0)));
    impl_->net.add(std::move(conv));
    impl_->net.emplace<nn::LeakyRelu>(0.2f);
  }
  impl_->net.emplace<nn::GlobalAvgPool>();
}

RandConvExtractor::~RandConvExtractor() = default;

Eigen::VectorXd RandConvExtractor::features(const Image& img) const {
  if (img.channels() != 3) throw ChannelError("feature extractor expects RGB images");
  if (img.height() < 32 || img.width() < 32) {
    throw DimensionError("feature extractor needs sides >= 32");
  }
  const nn::Tensor x = nn::Tensor::from_image(convert_range(img, Range::symmetric));
  const nn::Tensor f = impl_->net.forward(x, nullptr);
  Eigen::VectorXd out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[static_cast<Eigen::Index>(i)] = f.data()[i];
  return out;
}

namespace {

struct Registry {
  std::mutex mu;
  std::map<std::string, ExtractorFactory> factories;
  std::map<std::string, std::unique_ptr<FeatureExtractor>> instances;
};

Registry& registry() {
  static Registry* r = [] {
    auto* init = new Registry;
    init->factories["randconv64"] = [] { return std::make_unique<RandConvExtractor>(); };
    return init;
  }();
  return *r;
}

}  // namespace

void register_extractor(const std::string& id, ExtractorFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.factories[id] = std::move(factory);
  r.instances.erase(id);
}

const FeatureExtractor& get_extractor(const std::string& id) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  if (auto it = r.instances.find(id); it != r.instances.end()) return *it->second;
  const auto f = r.factories.find(id);
  if (f == r.factories.end()) throw ConfigError("unknown feature extractor '" + id + "'");
  auto& slot = r.instances[id];
  slot = f->second();
  return *slot;
}

FeatureEmbedding extract_features(const std::vector<Image>& images, const std::string& extractor_id) {
  const FeatureExtractor& ex = get_extractor(extractor_id);
  if (images.empty()) throw DataError("extract_features: empty image list");
  FeatureEmbedding e;
  e.extractor_id = extractor_id;
  e.features.resize(static_cast<Eigen::Index>(images.size()), ex.dim());
  for (std::size_t i = 0; i < images.size(); ++i) {
    e.features.row(static_cast<Eigen::Index>(i)) = ex.features(images[i]).transpose();
  }
  return e;
}

}  // namespace bt
