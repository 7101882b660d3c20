#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "biastransfer/imaging.hpp"
#include "biastransfer/rng.hpp"
#include "biastransfer/segmentation.hpp"

namespace bt {

inline constexpr int kPhantomClasses = 4;
/// Class index = 2 * large_blobs + many_dots.
inline const std::array<std::string, kPhantomClasses> kPhantomClassNames = {
    "small_few", "small_many", "large_few", "large_many"};

/// Procedural tissue-like phantom: non-overlapping smooth blobs (the
/// glomerulus stand-in) holding small dark discs (the nuclei stand-in) on a
/// textured background. Lengths are in pixels at size 128 and scale with
/// size.
struct PhantomSpec {
  int size = 128;
  int min_blobs = 2;
  int max_blobs = 2;
  std::array<double, 2> small_radius = {13.0, 16.0};
  std::array<double, 2> large_radius = {21.0, 25.0};
  std::array<int, 2> few_dots = {1, 3};
  std::array<int, 2> many_dots = {6, 8};
  double dot_radius = 2.0;
  double texture_scale = 12.0;
  std::array<double, kPhantomClasses> class_weights = {1.0, 1.0, 1.0, 1.0};
  std::uint64_t seed = 0;

  void validate() const;
};

struct Phantom {
  Image image;  // unit range RGB
  SegMask blobs;  // 1..n per blob
  SegMask dots;   // 1..m per dot
  int label = 0;
};

/// Label implied by the rendered geometry (mean blob radius and mean dots
/// per blob, thresholded between the spec's ranges).
int phantom_class(const PhantomSpec& spec, double mean_radius, double mean_dots);

/// Deterministic in (spec.seed, id).
Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t id);

/// Content-independent acquisition bias.
struct DomainBias {
  std::array<double, 3> gain = {1.0, 1.0, 1.0};
  std::array<double, 3> offset = {0.0, 0.0, 0.0};
  double gamma = 1.0;
  double hue_rotation = 0.0;  // degrees about the grey axis
  double vignette_strength = 0.0;
  double noise_sigma = 0.0;

  void validate() const;
  bool operator==(const DomainBias&) const = default;
};

DomainBias tar_bias_preset();
DomainBias new_bias_preset();

nlohmann::json to_json(const DomainBias& b);
DomainBias domain_bias_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PhantomSpec& s);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

/// affine per channel, gamma, hue rotation, vignette, Gaussian noise, clip.
Image apply_domain_bias(const Image& img, const DomainBias& bias, Rng& rng);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::map<std::string, int> group_of;

  const std::vector<std::string>& ids(const std::string& split) const;
};

/// Groups (synthetic patients) go wholly into one split; sizes follow
/// 70/15/15 by largest remaining deficit.
DatasetSplit grouped_split(const std::vector<std::string>& ids, const std::vector<int>& groups,
                           Rng& rng);

struct Sample {
  std::string id;
  int group = 0;
  Phantom phantom;
};

struct DomainDataset {
  std::string name;
  DomainBias bias;
  std::vector<Sample> samples;
  DatasetSplit split;

  const Sample& by_id(const std::string& id) const;
  std::vector<const Sample*> in_split(const std::string& split_name) const;
};

struct BenchmarkSpec {
  int n_images = 100;
  int max_group_size = 4;
  PhantomSpec phantom;
  std::optional<std::array<double, kPhantomClasses>> new_class_weights;
  DomainBias tar_bias = tar_bias_preset();
  DomainBias new_bias = new_bias_preset();
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const BenchmarkSpec& s);
BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j);

struct Benchmark {
  BenchmarkSpec spec;
  DomainDataset tar;
  DomainDataset new_domain;
};

/// Pure function of spec (including its seeds).
Benchmark make_benchmark(const BenchmarkSpec& spec);

/// Writes <root>/<domain>/<split>/{images,masks}/ plus <root>/<domain>/labels.csv
/// and <root>/manifest.json.
void write_benchmark(const std::filesystem::path& root, const Benchmark& b);

/// Reads one domain folder in the layout above. Missing masks or labels
/// are allowed (labels -1).
DomainDataset read_domain_folder(const std::filesystem::path& dir, const std::string& name);

}  // namespace bt
