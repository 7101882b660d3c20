#include "biastransfer/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "biastransfer/checkpoint.hpp"
#include "biastransfer/color_transfer.hpp"
#include "biastransfer/errors.hpp"
#include "biastransfer/fid.hpp"
#include "biastransfer/full_resolution.hpp"
#include "biastransfer/image_io.hpp"
#include "biastransfer/report.hpp"
#include "biastransfer/similarity.hpp"

namespace bt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + section);
    }
  }
}

template <class T>
T get(const json& j, const char* key, T fallback, const char* section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(section) + "." + key + " has the wrong type");
  }
}

}  // namespace

fs::path resolve_output_path(const fs::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / p;
  return p;
}

BundleSpec ExperimentConfig::bundle_spec(std::uint64_t seed) const {
  BundleSpec s =
      default_bundle_spec(architecture, image_size, base_width, {source_domain, target_domain});
  if (n_resblocks) s.generator.n_resblocks = *n_resblocks;
  if (n_down) s.generator.n_down = *n_down;
  if (patch_grid) s.discriminator.patch_grid = *patch_grid;
  s.seed = seed;
  s.validate();
  return s;
}

fs::path ExperimentConfig::data_dir() const {
  return data_root.empty() ? output_dir / "data" : resolve_output_path(data_root);
}

json ExperimentConfig::to_json() const {
  json model = {{"image_size", image_size}, {"base_width", base_width}};
  if (n_resblocks) model["n_resblocks"] = *n_resblocks;
  if (n_down) model["n_down"] = *n_down;
  if (patch_grid) model["patch_grid"] = *patch_grid;
  json metrics = {{"fid_extractor", fid_extractor}};
  if (downstream_model) metrics["downstream_model"] = downstream_model->string();
  return {{"profile", profile},
          {"output_dir", output_dir.string()},
          {"architecture", bt::to_string(architecture)},
          {"model", model},
          {"train", bt::to_json(train)},
          {"data",
           {{"root", data_dir().string()}, {"source", source_domain}, {"target", target_domain}}},
          {"synth", bt::to_json(synth)},
          {"metrics", metrics},
          {"downstream",
           {{"input_size", downstream.input_size},
            {"width", downstream.width},
            {"epochs", downstream.epochs},
            {"lr", downstream.lr},
            {"augment", downstream.augment},
            {"min_val_accuracy", downstream.min_val_accuracy},
            {"seed", downstream.seed}}}};
}

ExperimentConfig parse_experiment_config(const json& j) {
  check_keys(j, "config",
             {"profile", "output_dir", "architecture", "extra", "model", "train", "data", "synth",
              "metrics", "downstream"});
  ExperimentConfig c;
  c.profile = get<std::string>(j, "profile", "paper", "config");
  if (c.profile != "paper" && c.profile != "desk") {
    throw ConfigError("profile must be 'paper' or 'desk'");
  }
  c.architecture = parse_architecture(get<std::string>(j, "architecture", "unet_cyclegan", "config"));
  const bool desk = c.profile == "desk";
  c.image_size = desk ? 64 : 256;
  c.base_width = desk ? 32 : 64;
  c.train = desk ? desk_train_config(c.architecture) : default_train_config(c.architecture);
  c.synth.phantom.size = 2 * c.image_size;
  c.output_dir = resolve_output_path(get<std::string>(j, "output_dir", "biastransfer_out", "config"));

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"image_size", "base_width", "n_resblocks", "n_down", "patch_grid"});
    c.image_size = get<int>(m, "image_size", c.image_size, "model");
    c.base_width = get<int>(m, "base_width", c.base_width, "model");
    if (m.contains("n_resblocks")) c.n_resblocks = get<int>(m, "n_resblocks", 0, "model");
    if (m.contains("n_down")) c.n_down = get<int>(m, "n_down", 0, "model");
    if (m.contains("patch_grid")) c.patch_grid = get<int>(m, "patch_grid", 0, "model");
    c.synth.phantom.size = 2 * c.image_size;
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train",
               {"epochs", "lr_initial", "lr_steady_epochs", "batch_size", "seeds", "beta1", "beta2",
                "extra", "weights", "ssim", "replay_buffer", "n_critic", "gp_step",
                "collapse_samples", "collapse_threshold", "keep_all_checkpoints"});
    if (t.contains("weights")) {
      check_keys(t.at("weights"), "train.weights",
                 {"lambda_adv", "lambda_cyc", "lambda_id", "lambda_gp", "lambda_domain",
                  "lambda_id_fpg", "lambda_extra"});
    }
    if (t.contains("ssim")) {
      check_keys(t.at("ssim"), "train.ssim", {"window", "sigma", "k1", "k2", "dynamic_range"});
    }
    c.train = train_config_from_json(t, c.train);
  }
  if (j.contains("extra")) {
    c.train.extra.mode = parse_extra_mode(get<std::string>(j, "extra", "none", "config"));
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"root", "source", "target"});
    c.data_root = get<std::string>(d, "root", "", "data");
    c.source_domain = get<std::string>(d, "source", c.source_domain, "data");
    c.target_domain = get<std::string>(d, "target", c.target_domain, "data");
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    check_keys(s, "synth",
               {"n_images", "max_group_size", "phantom", "new_class_weights", "tar_bias", "new_bias",
                "seed"});
    json merged = s;
    if (!merged.contains("phantom")) merged["phantom"] = bt::to_json(c.synth.phantom);
    else if (!merged["phantom"].contains("size")) merged["phantom"]["size"] = c.synth.phantom.size;
    c.synth = benchmark_spec_from_json(merged);
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    check_keys(m, "metrics", {"fid_extractor", "downstream_model"});
    c.fid_extractor = get<std::string>(m, "fid_extractor", c.fid_extractor, "metrics");
    if (m.contains("downstream_model")) {
      c.downstream_model = get<std::string>(m, "downstream_model", "", "metrics");
    }
  }
  if (j.contains("downstream")) {
    const auto& d = j.at("downstream");
    check_keys(d, "downstream",
               {"input_size", "width", "epochs", "lr", "augment", "min_val_accuracy", "seed"});
    auto& o = c.downstream;
    o.input_size = get<int>(d, "input_size", o.input_size, "downstream");
    o.width = get<int>(d, "width", o.width, "downstream");
    o.epochs = get<int>(d, "epochs", o.epochs, "downstream");
    o.lr = get<double>(d, "lr", o.lr, "downstream");
    o.augment = get<bool>(d, "augment", o.augment, "downstream");
    o.min_val_accuracy = get<double>(d, "min_val_accuracy", o.min_val_accuracy, "downstream");
    o.seed = get<std::uint64_t>(d, "seed", o.seed, "downstream");
  }
  c.train.validate();
  c.synth.validate();
  c.bundle_spec(0);  // validates the model section
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

ImageFolder read_image_folder(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("no such folder " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  ImageFolder f;
  for (const auto& p : files) {
    f.ids.push_back(p.stem().string());
    f.paths.push_back(p);
    f.images.push_back(read_image(p));
  }
  return f;
}

std::map<std::string, int> read_labels_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read labels " + path.string());
  std::map<std::string, int> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() < 4) throw DataError("malformed labels line: " + line);
    try {
      out[cols[0]] = std::stoi(cols[3]);
    } catch (const std::exception&) {
      throw DataError("malformed labels line: " + line);
    }
  }
  return out;
}

EvaluationResult evaluate_images(const std::vector<std::string>& ids,
                                 const std::vector<Image>& original,
                                 const std::vector<Image>& transformed,
                                 const std::vector<Image>& target, Split split,
                                 const std::string& extractor, const DownstreamModel* model,
                                 const std::vector<int>* labels) {
  if (split == Split::test) require_test_access("evaluate_images(test)");
  if (original.size() != transformed.size() || ids.size() != original.size()) {
    throw DataError("original and transformed sets differ in size");
  }
  if (original.empty() || target.empty()) throw DataError("evaluation needs non-empty image sets");
  EvaluationResult r;
  r.report.split = split;
  r.report.fid_extractor = extractor;
  int min_side = original.front().height();
  for (const auto& img : original) min_side = std::min({min_side, img.height(), img.width()});
  r.report.ms_ssim_scales = std::min(5, max_ms_ssim_scales(min_side, SsimConfig{}));
  std::vector<double> ms;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (!original[i].same_shape(transformed[i])) {
      throw DimensionError("pair " + ids[i] + " differs in shape");
    }
    PairScore p{ids[i], ssim(original[i], transformed[i]),
                ms_ssim(original[i], transformed[i], SsimConfig{}, r.report.ms_ssim_scales)};
    r.ssim_values.push_back(p.ssim);
    ms.push_back(p.ms_ssim);
    r.report.pairs.push_back(std::move(p));
  }
  std::tie(r.report.ssim_mean, r.report.ssim_std) = mean_std(r.ssim_values);
  r.report.ms_ssim_mean = mean_std(ms).first;
  const FeatureEmbedding tgt = extract_features(target, extractor);
  r.report.fid = frechet_distance(extract_features(transformed, extractor), tgt);
  r.fid_original = frechet_distance(extract_features(original, extractor), tgt);
  if (model && labels) {
    const auto t = evaluate_downstream(*model, transformed, *labels);
    r.report.accuracy = t.accuracy;
    r.report.macro_f1 = t.macro_f1;
    r.downstream_original = evaluate_downstream(*model, original, *labels);
  }
  return r;
}

json to_json(const EvaluationResult& r) {
  json j = to_json(r.report);
  j["fid_original"] = r.fid_original;
  if (r.downstream_original) {
    j["accuracy_original"] = r.downstream_original->accuracy;
    j["macro_f1_original"] = r.downstream_original->macro_f1;
  }
  return j;
}

// ------------------------------------------------------------- commands

fs::path cmd_synth(const ExperimentConfig& cfg) {
  const fs::path root = cfg.data_dir();
  const Benchmark b = make_benchmark(cfg.synth);
  write_benchmark(root, b);

  auto gather = [](const DomainDataset& d, const char* split, std::vector<Image>& im,
                   std::vector<int>& lab) {
    for (const Sample* s : d.in_split(split)) {
      im.push_back(s->phantom.image);
      lab.push_back(s->phantom.label);
    }
  };
  std::vector<Image> ti, vi;
  std::vector<int> tl, vl;
  gather(b.tar, "train", ti, tl);
  gather(b.tar, "val", vi, vl);
  DownstreamModel model = train_downstream(ti, tl, vi, vl, cfg.downstream);
  model.save(root / "downstream.bin");
  return root;
}

namespace {

struct DomainImages {
  std::vector<std::string> ids;
  std::vector<Image> images;
  std::vector<int> labels;
};

DomainImages split_images(const DomainDataset& d, const char* split) {
  DomainImages out;
  for (const Sample* s : d.in_split(split)) {
    out.ids.push_back(s->id);
    out.images.push_back(s->phantom.image);
    out.labels.push_back(s->phantom.label);
  }
  return out;
}

std::vector<Image> transform_all(const ModelBundle& bundle, const std::vector<Image>& images,
                                 int target) {
  const Generator& g = bundle.generators.front();
  const int label = bundle.spec.architecture == Architecture::fpg ? target : -1;
  std::vector<Image> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(transform_full_resolution(g, img, label));
  return out;
}

std::optional<DownstreamModel> maybe_downstream(const ExperimentConfig& cfg) {
  const fs::path p = cfg.downstream_model ? resolve_output_path(*cfg.downstream_model)
                                          : cfg.data_dir() / "downstream.bin";
  if (!fs::exists(p)) return std::nullopt;
  return DownstreamModel::load(p);
}

bool all_labelled(const std::vector<int>& labels) {
  return std::all_of(labels.begin(), labels.end(), [](int l) { return l >= 0; });
}

}  // namespace

TrainSummary cmd_train(const ExperimentConfig& cfg) {
  const fs::path data = cfg.data_dir();
  const DomainDataset src = read_domain_folder(data / cfg.source_domain, cfg.source_domain);
  const DomainDataset tar = read_domain_folder(data / cfg.target_domain, cfg.target_domain);
  const DomainImages src_train = split_images(src, "train"), src_val = split_images(src, "val");
  const DomainImages tar_train = split_images(tar, "train"), tar_val = split_images(tar, "val");

  TrainingData td;
  td.domain_names = {cfg.source_domain, cfg.target_domain};
  td.train = {to_model_inputs(src_train.images, cfg.image_size),
              to_model_inputs(tar_train.images, cfg.image_size)};
  td.val = {to_model_inputs(src_val.images, cfg.image_size),
            to_model_inputs(tar_val.images, cfg.image_size)};

  write_json(cfg.output_dir / "config.json", cfg.to_json());
  TrainSummary summary;
  for (std::uint64_t seed : cfg.train.seeds) {
    const BundleSpec spec = cfg.bundle_spec(seed);
    const fs::path run_dir = cfg.output_dir / "runs" / ("seed_" + std::to_string(seed));
    const fs::path manifest_path = run_dir / "manifest.json";
    const std::string hash = config_hash(run_config_json(spec, cfg.train));
    if (fs::exists(manifest_path)) {
      RunManifest m = load_manifest(manifest_path);
      if (m.status == "completed" && m.config_hash == hash && fs::exists(m.checkpoint)) {
        summary.runs.push_back(std::move(m));
        continue;
      }
    }
    ModelBundle bundle = make_bundle(spec);
    TrainOptions opts;
    opts.run_dir = run_dir;
    try {
      RunManifest m = train(td, bundle, cfg.train, opts);
      save_manifest(manifest_path, m);
      summary.runs.push_back(std::move(m));
    } catch (const TrainingAborted& e) {
      save_manifest(manifest_path, e.manifest());
      throw;
    }
  }

  const int target = 1;
  summary.selection = select_best(summary.runs, [&](const RunManifest& m, int epoch) {
    if (epoch != m.selected_epoch) throw ContractError("selected epoch has no checkpoint");
    const ModelBundle bundle = load_checkpoint(m.checkpoint);
    const auto out = transform_all(bundle, src_val.images, target);
    return evaluate_images(src_val.ids, src_val.images, out, tar_val.images, Split::val,
                           cfg.fid_extractor)
        .report;
  });
  const RunManifest& best = summary.runs[summary.selection.run_index];
  summary.best_checkpoint = cfg.output_dir / "best.ckpt";
  fs::copy_file(best.checkpoint, summary.best_checkpoint, fs::copy_options::overwrite_existing);
  write_json(cfg.output_dir / "selection.json",
             {{"seed", summary.selection.seed},
              {"epoch", summary.selection.epoch},
              {"checkpoint", summary.best_checkpoint.string()},
              {"val_report", to_json(summary.selection.val_report)},
              {"runs", summary.runs.size()}});
  write_json(cfg.output_dir / "reports" / "selection_val.json",
             [&] {
               json j = to_json(summary.selection.val_report);
               j["name"] = "selected_" + to_string(cfg.architecture);
               return j;
             }());

  // Test metrics: computed once, after selection is final.
  const DomainImages src_test = split_images(src, "test"), tar_test = split_images(tar, "test");
  if (!src_test.images.empty() && !tar_test.images.empty()) {
    const ModelBundle bundle = load_checkpoint(summary.best_checkpoint);
    const auto out = transform_all(bundle, src_test.images, target);
    const auto model = maybe_downstream(cfg);
    const bool labelled = model && all_labelled(src_test.labels);
    EvaluationResult r =
        evaluate_images(src_test.ids, src_test.images, out, tar_test.images, Split::test,
                        cfg.fid_extractor, labelled ? &*model : nullptr,
                        labelled ? &src_test.labels : nullptr);
    json j = to_json(r);
    j["name"] = "selected_" + to_string(cfg.architecture);
    write_json(cfg.output_dir / "reports" / "selected_test.json", j);
  }
  return summary;
}

std::size_t cmd_transform(const fs::path& checkpoint, const fs::path& input_dir,
                          const fs::path& output_dir, int target_domain,
                          const ExperimentConfig* cfg) {
  CheckpointInfo info;
  const ModelBundle bundle = load_checkpoint(checkpoint, &info);
  if (cfg) {
    BundleSpec expected = cfg->bundle_spec(info.spec.seed);
    if (!(expected == info.spec)) {
      throw ContractError("checkpoint spec " + to_json(info.spec).dump() +
                          " does not match the configured model " + to_json(expected).dump());
    }
  }
  if (target_domain < 0 || target_domain >= static_cast<int>(info.spec.domain_names.size())) {
    throw ConfigError("target domain index out of range");
  }
  const ImageFolder in = read_image_folder(input_dir);
  if (in.images.empty()) throw DataError("no images in " + input_dir.string());
  const auto out = transform_all(bundle, in.images, target_domain);
  for (std::size_t i = 0; i < out.size(); ++i) {
    write_image(output_dir / (in.ids[i] + ".png"), out[i], BitDepth::sixteen);
  }
  write_json(output_dir / "manifest.json",
             {{"command", "transform"},
              {"checkpoint", fs::absolute(checkpoint).string()},
              {"spec", to_json(info.spec)},
              {"epoch", info.epoch},
              {"input", fs::absolute(input_dir).string()},
              {"target_domain", target_domain},
              {"images", out.size()}});
  return out.size();
}

EvaluationResult cmd_evaluate(const ExperimentConfig& cfg, const EvaluateArgs& args) {
  if (args.split == Split::test) require_test_access("cmd_evaluate(test)");
  const ImageFolder orig = read_image_folder(args.original);
  const ImageFolder trans = read_image_folder(args.transformed);
  const ImageFolder target = read_image_folder(args.target);
  if (orig.ids != trans.ids) {
    throw DataError("filename mismatch between " + args.original.string() + " and " +
                    args.transformed.string());
  }
  std::optional<DownstreamModel> model;
  std::vector<int> labels;
  if (args.labels) {
    // Without an explicit model, fall back to the configured one.
    model = args.downstream_model ? std::optional(DownstreamModel::load(*args.downstream_model))
                                  : maybe_downstream(cfg);
    if (!model) throw IoError("labels given but no downstream model found");
    const auto table = read_labels_csv(*args.labels);
    for (const auto& id : orig.ids) {
      const auto it = table.find(id);
      if (it == table.end()) throw DataError("no label for " + id);
      labels.push_back(it->second);
    }
  }
  EvaluationResult r = evaluate_images(orig.ids, orig.images, trans.images, target.images,
                                       args.split, cfg.fid_extractor, model ? &*model : nullptr,
                                       model ? &labels : nullptr);
  const std::string stem = args.name + "_" + to_string(args.split);
  json j = to_json(r);
  j["name"] = args.name;
  j["original"] = fs::absolute(args.original).string();
  j["transformed"] = fs::absolute(args.transformed).string();
  j["target"] = fs::absolute(args.target).string();
  j["fid_extractor_config"] = cfg.fid_extractor;
  if (args.downstream_model) j["downstream_model"] = fs::absolute(*args.downstream_model).string();
  if (args.labels) j["labels"] = fs::absolute(*args.labels).string();
  write_json(args.output / (stem + ".json"), j);
  write_pairs_csv(args.output / (stem + "_pairs.csv"), r.report);
  render_boxplot(args.output / (stem + "_ssim.png"), "SSIM original vs transformed (" + stem + ")",
                 {{args.name, r.ssim_values}});
  return r;
}

std::string cmd_baseline(const fs::path& input_dir, const fs::path& target_dir,
                         const fs::path& output_dir, std::uint64_t seed) {
  const ImageFolder target = read_image_folder(target_dir);
  if (target.images.empty()) throw DataError("baseline target folder is empty");
  const ColorTransferSpec ref = pick_reference(target.ids, seed);
  const auto pos = std::find(target.ids.begin(), target.ids.end(), ref.reference_image_id);
  const Image& reference = target.images[static_cast<std::size_t>(pos - target.ids.begin())];
  const ImageFolder in = read_image_folder(input_dir);
  for (std::size_t i = 0; i < in.images.size(); ++i) {
    write_image(output_dir / (in.ids[i] + ".png"), color_transfer(in.images[i], reference),
                BitDepth::sixteen);
  }
  write_json(output_dir / "manifest.json",
             {{"command", "baseline"},
              {"input", fs::absolute(input_dir).string()},
              {"target", fs::absolute(target_dir).string()},
              {"seed", seed},
              {"reference_image_id", ref.reference_image_id},
              {"images", in.images.size()}});
  return ref.reference_image_id;
}

fs::path cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("no such folder " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<json> reports;
  for (const auto& f : files) {
    std::ifstream in(f);
    json j = json::parse(in, nullptr, false);
    if (j.is_object() && j.contains("split") && j.contains("ssim_mean") && j.contains("fid")) {
      if (!j.contains("name")) j["name"] = f.stem().string();
      reports.push_back(std::move(j));
    }
  }
  if (reports.empty()) throw DataError("no evaluation reports under " + dir.string());
  const fs::path out = dir / "summary.md";
  std::ofstream md(out);
  if (!md) throw IoError("cannot write " + out.string());
  md << "# Evaluation summary\n\nValidation and test scores are listed separately.\n\n"
     << render_markdown_summary(reports);
  return out;
}

}  // namespace bt
