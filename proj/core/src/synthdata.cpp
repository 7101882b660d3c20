#include "biastransfer/synthdata.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "biastransfer/errors.hpp"
#include "biastransfer/image_io.hpp"

namespace bt {

namespace {

constexpr double kShapeAmplitude = 0.08;  // |a2| + |a3| bound, so r >= 0.92 R

struct Blob {
  double cx, cy, radius;
  double a2, p2, a3, p3;

  double boundary(double theta) const {
    return radius * (1.0 + a2 * std::cos(2.0 * theta + p2) + a3 * std::cos(3.0 * theta + p3));
  }
  double max_extent() const { return radius * (1.0 + std::abs(a2) + std::abs(a3)); }
  /// Signed distance proxy: positive inside, in pixels along the ray.
  double inside_depth(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    return boundary(std::atan2(dy, dx)) - std::hypot(dx, dy);
  }
};

struct Dot {
  double x, y;
};

/// Smooth value noise in [-1, 1] on a lattice of pitch `cell`.
class ValueNoise {
 public:
  ValueNoise(int size, double cell, Rng& rng) : cell_(cell) {
    n_ = static_cast<int>(std::ceil(size / cell)) + 2;
    v_.resize(static_cast<std::size_t>(n_) * n_);
    for (double& v : v_) v = rng.uniform(-1.0, 1.0);
  }

  double at(double x, double y) const {
    const double gx = x / cell_, gy = y / cell_;
    const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
    const double fx = smooth(gx - ix), fy = smooth(gy - iy);
    auto v = [&](int a, int b) { return v_[static_cast<std::size_t>(b) * n_ + a]; };
    const double top = v(ix, iy) * (1 - fx) + v(ix + 1, iy) * fx;
    const double bot = v(ix, iy + 1) * (1 - fx) + v(ix + 1, iy + 1) * fx;
    return top * (1 - fy) + bot * fy;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  double cell_;
  int n_ = 0;
  std::vector<double> v_;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

int sample_class(const std::array<double, kPhantomClasses>& w, Rng& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = rng.uniform() * total;
  for (int c = 0; c < kPhantomClasses; ++c) {
    if (u < w[c]) return c;
    u -= w[c];
  }
  return kPhantomClasses - 1;
}

}  // namespace

void PhantomSpec::validate() const {
  if (size < 32) throw ConfigError("phantom size must be >= 32");
  if (min_blobs < 1 || max_blobs < min_blobs) throw ConfigError("invalid blob count range");
  auto range_ok = [](auto r) { return r[0] > 0 && r[1] >= r[0]; };
  if (!range_ok(small_radius) || !range_ok(large_radius) || small_radius[1] >= large_radius[0]) {
    throw ConfigError("blob radius ranges must be positive, ordered and disjoint");
  }
  if (few_dots[0] < 0 || few_dots[1] < few_dots[0] || many_dots[0] <= few_dots[1] ||
      many_dots[1] < many_dots[0]) {
    throw ConfigError("dot count ranges must be ordered and disjoint");
  }
  if (!(dot_radius > 0.0) || !(texture_scale > 0.0)) throw ConfigError("invalid phantom scales");
  double total = 0.0;
  for (double w : class_weights) {
    if (!(w >= 0.0)) throw ConfigError("class weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("class weights must not all be zero");
}

int phantom_class(const PhantomSpec& spec, double mean_radius, double mean_dots) {
  const double scale = spec.size / 128.0;
  const bool large = mean_radius > 0.5 * (spec.small_radius[1] + spec.large_radius[0]) * scale;
  const bool many = mean_dots > 0.5 * (spec.few_dots[1] + spec.many_dots[0]);
  return 2 * static_cast<int>(large) + static_cast<int>(many);
}

Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t id) {
  spec.validate();
  Rng rng = Rng::derive(spec.seed, id);
  const double scale = spec.size / 128.0;
  const int cls = sample_class(spec.class_weights, rng);
  const bool large = cls / 2 == 1, many = cls % 2 == 1;
  const int n_blobs = rng.integer(spec.min_blobs, spec.max_blobs);
  const auto radius_range = large ? spec.large_radius : spec.small_radius;
  const auto dots_range = many ? spec.many_dots : spec.few_dots;
  const double dot_r = spec.dot_radius * scale;
  const double margin = 2.0 * scale;

  std::vector<Blob> blobs;
  for (int attempt = 0; static_cast<int>(blobs.size()) < n_blobs; ++attempt) {
    if (attempt > 20000) throw DataError("cannot place blobs; reduce blob radius or count");
    Blob b{};
    b.radius = rng.uniform(radius_range[0], radius_range[1]) * scale;
    const double split = rng.uniform();
    b.a2 = kShapeAmplitude * split * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    b.a3 = kShapeAmplitude * (1.0 - split) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    b.p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    b.p3 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ext = b.max_extent() + margin;
    if (2.0 * ext >= spec.size) throw DataError("blob does not fit into the phantom");
    b.cx = rng.uniform(ext, spec.size - ext);
    b.cy = rng.uniform(ext, spec.size - ext);
    const bool clear = std::all_of(blobs.begin(), blobs.end(), [&](const Blob& o) {
      return std::hypot(o.cx - b.cx, o.cy - b.cy) > o.max_extent() + b.max_extent() + 2.0 * margin;
    });
    if (clear) blobs.push_back(b);
  }

  std::vector<Dot> dots;
  std::vector<int> dot_blob;
  double dots_total = 0.0, radius_total = 0.0;
  for (std::size_t bi = 0; bi < blobs.size(); ++bi) {
    const Blob& b = blobs[bi];
    radius_total += b.radius;
    const int want = rng.integer(dots_range[0], dots_range[1]);
    int placed = 0;
    for (int attempt = 0; placed < want && attempt < 4000; ++attempt) {
      const double x = rng.uniform(b.cx - b.radius, b.cx + b.radius);
      const double y = rng.uniform(b.cy - b.radius, b.cy + b.radius);
      if (b.inside_depth(x, y) < dot_r + 1.5 * scale) continue;
      const bool clear = std::all_of(dots.begin(), dots.end(), [&](const Dot& d) {
        return std::hypot(d.x - x, d.y - y) > 2.0 * dot_r + 2.0 * scale;
      });
      if (!clear) continue;
      dots.push_back({x, y});
      dot_blob.push_back(static_cast<int>(bi));
      ++placed;
    }
    dots_total += placed;
  }

  Phantom ph;
  ph.label = phantom_class(spec, radius_total / blobs.size(), dots_total / blobs.size());
  ph.image = Image(spec.size, spec.size, 3, Range::unit);
  ph.blobs = SegMask(spec.size, spec.size);
  ph.dots = SegMask(spec.size, spec.size);

  const ValueNoise coarse(spec.size, spec.texture_scale * scale, rng);
  const ValueNoise fine(spec.size, spec.texture_scale * scale / 3.0, rng);
  const double bg[3] = {0.93, 0.80, 0.86};
  const double tissue[3] = {0.84, 0.56, 0.72};
  const double rim[3] = {0.66, 0.38, 0.58};
  const double nucleus[3] = {0.32, 0.18, 0.48};
  const double rim_width = 1.5 * scale;

  for (int y = 0; y < spec.size; ++y) {
    for (int x = 0; x < spec.size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double tex = 0.06 * coarse.at(px, py) + 0.025 * fine.at(px, py);
      double col[3];
      for (int c = 0; c < 3; ++c) col[c] = bg[c] + tex;
      for (std::size_t bi = 0; bi < blobs.size(); ++bi) {
        const double depth = blobs[bi].inside_depth(px, py);
        if (depth >= 0.0) ph.blobs.at(y, x) = static_cast<std::int32_t>(bi + 1);
        const double cover = clamp01(depth + 0.5);
        const double ring = clamp01(1.0 - std::abs(depth - rim_width * 0.5) / rim_width);
        for (int c = 0; c < 3; ++c) {
          col[c] = col[c] * (1.0 - cover) + (tissue[c] + 1.2 * tex) * cover;
          col[c] = col[c] * (1.0 - ring) + rim[c] * ring;
        }
      }
      for (std::size_t di = 0; di < dots.size(); ++di) {
        const double dist = std::hypot(dots[di].x - px, dots[di].y - py);
        if (dist <= dot_r) ph.dots.at(y, x) = static_cast<std::int32_t>(di + 1);
        const double cover = clamp01(dot_r - dist + 0.5);
        for (int c = 0; c < 3; ++c) col[c] = col[c] * (1.0 - cover) + nucleus[c] * cover;
      }
      for (int c = 0; c < 3; ++c) {
        ph.image.at(y, x, c) = static_cast<float>(clamp01(col[c] + 0.01 * rng.normal()));
      }
    }
  }
  return ph;
}

// ------------------------------------------------------------- bias

void DomainBias::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (!std::isfinite(gain[c]) || !std::isfinite(offset[c])) throw ConfigError("non-finite bias");
  }
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(vignette_strength >= 0.0 && vignette_strength <= 1.0)) {
    throw ConfigError("vignette_strength must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
  if (!std::isfinite(hue_rotation)) throw ConfigError("non-finite hue rotation");
}

DomainBias tar_bias_preset() {
  DomainBias b;
  b.noise_sigma = 0.005;
  return b;
}

DomainBias new_bias_preset() {
  DomainBias b;
  b.gain = {0.80, 0.95, 0.90};
  b.offset = {0.08, -0.02, 0.04};
  b.gamma = 1.6;
  b.hue_rotation = 35.0;
  b.vignette_strength = 0.25;
  b.noise_sigma = 0.02;
  return b;
}

nlohmann::json to_json(const DomainBias& b) {
  return {{"gain", b.gain},
          {"offset", b.offset},
          {"gamma", b.gamma},
          {"hue_rotation", b.hue_rotation},
          {"vignette_strength", b.vignette_strength},
          {"noise_sigma", b.noise_sigma}};
}

DomainBias domain_bias_from_json(const nlohmann::json& j) {
  DomainBias b;
  try {
    b.gain = j.value("gain", b.gain);
    b.offset = j.value("offset", b.offset);
    b.gamma = j.value("gamma", b.gamma);
    b.hue_rotation = j.value("hue_rotation", b.hue_rotation);
    b.vignette_strength = j.value("vignette_strength", b.vignette_strength);
    b.noise_sigma = j.value("noise_sigma", b.noise_sigma);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid domain bias: ") + e.what());
  }
  b.validate();
  return b;
}

nlohmann::json to_json(const PhantomSpec& s) {
  return {{"size", s.size},
          {"min_blobs", s.min_blobs},
          {"max_blobs", s.max_blobs},
          {"small_radius", s.small_radius},
          {"large_radius", s.large_radius},
          {"few_dots", s.few_dots},
          {"many_dots", s.many_dots},
          {"dot_radius", s.dot_radius},
          {"texture_scale", s.texture_scale},
          {"class_weights", s.class_weights},
          {"seed", s.seed}};
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  PhantomSpec s;
  try {
    s.size = j.value("size", s.size);
    s.min_blobs = j.value("min_blobs", s.min_blobs);
    s.max_blobs = j.value("max_blobs", s.max_blobs);
    s.small_radius = j.value("small_radius", s.small_radius);
    s.large_radius = j.value("large_radius", s.large_radius);
    s.few_dots = j.value("few_dots", s.few_dots);
    s.many_dots = j.value("many_dots", s.many_dots);
    s.dot_radius = j.value("dot_radius", s.dot_radius);
    s.texture_scale = j.value("texture_scale", s.texture_scale);
    s.class_weights = j.value("class_weights", s.class_weights);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid phantom spec: ") + e.what());
  }
  s.validate();
  return s;
}

Image apply_domain_bias(const Image& img, const DomainBias& bias, Rng& rng) {
  bias.validate();
  if (img.channels() != 3) throw ChannelError("domain bias expects RGB images");
  Image out = convert_range(img, Range::unit);
  const int h = out.height(), w = out.width();
  const std::size_t n = out.plane_size();

  for (int c = 0; c < 3; ++c) {
    for (float& v : out.plane(c)) v = static_cast<float>(bias.gain[c] * v + bias.offset[c]);
  }
  if (bias.gamma != 1.0) {
    for (float& v : out.values()) v = static_cast<float>(std::pow(clamp01(v), bias.gamma));
  }
  if (bias.hue_rotation != 0.0) {
    const double t = bias.hue_rotation * std::numbers::pi / 180.0;
    const Eigen::Vector3d k = Eigen::Vector3d::Ones().normalized();
    Eigen::Matrix3d kx;
    kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    const Eigen::Matrix3d r = std::cos(t) * Eigen::Matrix3d::Identity() + std::sin(t) * kx +
                              (1.0 - std::cos(t)) * k * k.transpose();
    auto p0 = out.plane(0), p1 = out.plane(1), p2 = out.plane(2);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d v = r * Eigen::Vector3d(p0[i], p1[i], p2[i]);
      p0[i] = static_cast<float>(v[0]);
      p1[i] = static_cast<float>(v[1]);
      p2[i] = static_cast<float>(v[2]);
    }
  }
  if (bias.vignette_strength > 0.0) {
    const double cy = 0.5 * h, cx = 0.5 * w;
    const double r2max = cx * cx + cy * cy;
    for (int c = 0; c < 3; ++c) {
      auto p = out.plane(c);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
          const double f = 1.0 - bias.vignette_strength * (dx * dx + dy * dy) / r2max;
          p[static_cast<std::size_t>(y) * w + x] *= static_cast<float>(f);
        }
      }
    }
  }
  if (bias.noise_sigma > 0.0) {
    for (float& v : out.values()) v += static_cast<float>(bias.noise_sigma * rng.normal());
  }
  out = clip_to_range(std::move(out));
  if (img.range() != Range::unit) out = convert_range(out, img.range());
  return out;
}

// ------------------------------------------------------------- splits

const std::vector<std::string>& DatasetSplit::ids(const std::string& split) const {
  if (split == "train") return train;
  if (split == "val") return val;
  if (split == "test") return test;
  throw ConfigError("unknown split '" + split + "'");
}

DatasetSplit grouped_split(const std::vector<std::string>& ids, const std::vector<int>& groups,
                           Rng& rng) {
  if (ids.size() != groups.size()) throw DimensionError("ids and groups differ in length");
  if (ids.size() < 40) {
    throw DataError("at least 40 images are needed for a grouped 70/15/15 split, got " +
                    std::to_string(ids.size()));
  }
  std::vector<int> order;
  for (int g : groups) {
    if (std::find(order.begin(), order.end(), g) == order.end()) order.push_back(g);
  }
  if (order.size() < 3) throw DataError("need at least three groups to fill three splits");
  rng.shuffle(std::span<int>(order));

  const double n = static_cast<double>(ids.size());
  const double target[3] = {0.70 * n, 0.15 * n, 0.15 * n};
  double filled[3] = {0.0, 0.0, 0.0};
  DatasetSplit s;
  std::vector<std::string>* dest[3] = {&s.train, &s.val, &s.test};
  for (int g : order) {
    std::vector<std::string> members;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (groups[i] == g) members.push_back(ids[i]);
    }
    int pick = 0;
    for (int k = 1; k < 3; ++k) {
      if (target[k] - filled[k] > target[pick] - filled[pick]) pick = k;
    }
    filled[pick] += static_cast<double>(members.size());
    for (auto& id : members) {
      s.group_of[id] = g;
      dest[pick]->push_back(std::move(id));
    }
  }
  for (auto* d : dest) std::sort(d->begin(), d->end());
  return s;
}

const Sample& DomainDataset::by_id(const std::string& id) const {
  for (const auto& s : samples) {
    if (s.id == id) return s;
  }
  throw DataError("no sample '" + id + "' in domain " + name);
}

std::vector<const Sample*> DomainDataset::in_split(const std::string& split_name) const {
  std::vector<const Sample*> out;
  for (const auto& id : split.ids(split_name)) out.push_back(&by_id(id));
  return out;
}

// ------------------------------------------------------------- benchmark

void BenchmarkSpec::validate() const {
  if (n_images < 40) throw DataError("n_images must be >= 40 to honour grouped splits");
  if (max_group_size < 1) throw ConfigError("max_group_size must be positive");
  phantom.validate();
  tar_bias.validate();
  new_bias.validate();
}

nlohmann::json to_json(const BenchmarkSpec& s) {
  nlohmann::json j = {{"n_images", s.n_images},
                      {"max_group_size", s.max_group_size},
                      {"phantom", to_json(s.phantom)},
                      {"tar_bias", to_json(s.tar_bias)},
                      {"new_bias", to_json(s.new_bias)},
                      {"seed", s.seed}};
  j["new_class_weights"] = s.new_class_weights ? nlohmann::json(*s.new_class_weights) : nlohmann::json();
  return j;
}

BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j) {
  BenchmarkSpec s;
  try {
    s.n_images = j.value("n_images", s.n_images);
    s.max_group_size = j.value("max_group_size", s.max_group_size);
    if (j.contains("phantom")) s.phantom = phantom_spec_from_json(j.at("phantom"));
    if (j.contains("tar_bias")) s.tar_bias = domain_bias_from_json(j.at("tar_bias"));
    if (j.contains("new_bias")) s.new_bias = domain_bias_from_json(j.at("new_bias"));
    s.seed = j.value("seed", s.seed);
    if (j.contains("new_class_weights") && !j.at("new_class_weights").is_null()) {
      s.new_class_weights = j.at("new_class_weights").get<std::array<double, kPhantomClasses>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid benchmark spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

DomainDataset make_domain(const BenchmarkSpec& spec, const std::string& name, const PhantomSpec& ph,
                          const DomainBias& bias, std::uint64_t id_offset, std::uint64_t stream) {
  DomainDataset d;
  d.name = name;
  d.bias = bias;
  Rng group_rng = Rng::derive(spec.seed, stream);
  std::vector<std::string> ids;
  std::vector<int> groups;
  int group = 0, left_in_group = 0;
  std::string prefix = name;
  std::transform(prefix.begin(), prefix.end(), prefix.begin(), ::tolower);
  for (int i = 0; i < spec.n_images; ++i) {
    if (left_in_group == 0) {
      ++group;
      left_in_group = group_rng.integer(1, spec.max_group_size);
    }
    --left_in_group;
    Sample s;
    std::ostringstream id;
    id << prefix << '_' << std::setw(4) << std::setfill('0') << i;
    s.id = id.str();
    s.group = group;
    s.phantom = generate_phantom(ph, id_offset + static_cast<std::uint64_t>(i));
    Rng noise = Rng::derive(spec.seed, stream * 1000003ull + static_cast<std::uint64_t>(i));
    s.phantom.image = apply_domain_bias(s.phantom.image, bias, noise);
    ids.push_back(s.id);
    groups.push_back(group);
    d.samples.push_back(std::move(s));
  }
  d.split = grouped_split(ids, groups, group_rng);
  return d;
}

}  // namespace

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  Benchmark b;
  b.spec = spec;
  b.tar = make_domain(spec, "TAR", spec.phantom, spec.tar_bias, 0, 1);
  PhantomSpec new_phantom = spec.phantom;
  if (spec.new_class_weights) new_phantom.class_weights = *spec.new_class_weights;
  b.new_domain = make_domain(spec, "NEW", new_phantom, spec.new_bias,
                             static_cast<std::uint64_t>(spec.n_images), 2);
  return b;
}

namespace {

void write_domain(const std::filesystem::path& dir, const DomainDataset& d) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream labels(dir / "labels.csv");
  if (!labels) throw IoError("cannot write " + (dir / "labels.csv").string());
  labels << "id,group,split,label,class_name\n";
  for (const char* split : {"train", "val", "test"}) {
    for (const Sample* s : d.in_split(split)) {
      const auto base = dir / split;
      write_image(base / "images" / (s->id + ".png"), s->phantom.image);
      write_mask(base / "masks" / (s->id + "_blobs.png"), s->phantom.blobs);
      write_mask(base / "masks" / (s->id + "_dots.png"), s->phantom.dots);
      labels << s->id << ',' << s->group << ',' << split << ',' << s->phantom.label << ','
             << kPhantomClassNames[s->phantom.label] << '\n';
    }
  }
}

}  // namespace

void write_benchmark(const std::filesystem::path& root, const Benchmark& b) {
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  write_domain(root / b.tar.name, b.tar);
  write_domain(root / b.new_domain.name, b.new_domain);
  nlohmann::json m = {{"kind", "synthetic_benchmark"},
                      {"spec", to_json(b.spec)},
                      {"domains", {b.tar.name, b.new_domain.name}},
                      {"classes", kPhantomClassNames}};
  for (const auto* d : {&b.tar, &b.new_domain}) {
    m["splits"][d->name] = {{"train", d->split.train.size()},
                            {"val", d->split.val.size()},
                            {"test", d->split.test.size()}};
  }
  std::ofstream out(root / "manifest.json");
  if (!out) throw IoError("cannot write " + (root / "manifest.json").string());
  out << m.dump(2) << '\n';
}

DomainDataset read_domain_folder(const std::filesystem::path& dir, const std::string& name) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no dataset folder " + dir.string());
  DomainDataset d;
  d.name = name;
  std::map<std::string, std::pair<int, int>> labels;  // id -> (group, label)
  if (std::ifstream in(dir / "labels.csv"); in) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
      if (cols.size() < 4) throw DataError("malformed labels.csv line: " + line);
      try {
        labels[cols[0]] = {std::stoi(cols[1]), std::stoi(cols[3])};
      } catch (const std::exception&) {
        throw DataError("malformed labels.csv line: " + line);
      }
    }
  }
  for (const char* split : {"train", "val", "test"}) {
    const auto images = dir / split / "images";
    if (!std::filesystem::is_directory(images)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(images)) {
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Sample s;
      s.id = f.stem().string();
      s.phantom.image = read_image(f);
      s.phantom.label = -1;
      if (auto it = labels.find(s.id); it != labels.end()) {
        s.group = it->second.first;
        s.phantom.label = it->second.second;
      }
      const auto masks = dir / split / "masks";
      if (std::filesystem::exists(masks / (s.id + "_blobs.png"))) {
        s.phantom.blobs = read_mask(masks / (s.id + "_blobs.png"));
      }
      if (std::filesystem::exists(masks / (s.id + "_dots.png"))) {
        s.phantom.dots = read_mask(masks / (s.id + "_dots.png"));
      }
      auto& dest = std::string(split) == "train" ? d.split.train
                   : std::string(split) == "val" ? d.split.val
                                                 : d.split.test;
      dest.push_back(s.id);
      d.split.group_of[s.id] = s.group;
      d.samples.push_back(std::move(s));
    }
  }
  if (d.samples.empty()) throw DataError("no images found under " + dir.string());
  return d;
}

}  // namespace bt
