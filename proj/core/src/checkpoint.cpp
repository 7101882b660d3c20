#include "biastransfer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "biastransfer/errors.hpp"

namespace bt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'B', 'T', 'C', 'K', 'P', 'T', '0', '1'};

struct RawCheckpoint {
  nlohmann::json header;
  std::ifstream stream;
};

RawCheckpoint open_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw;
  raw.stream.open(path, std::ios::binary);
  if (!raw.stream) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  raw.stream.read(magic, 8);
  raw.stream.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!raw.stream || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError(path.string() + " is not a checkpoint");
  }
  if (len > (1u << 28)) throw IoError("corrupt checkpoint header length in " + path.string());
  std::string text(len, '\0');
  raw.stream.read(text.data(), static_cast<std::streamsize>(len));
  if (!raw.stream) throw IoError("truncated checkpoint header in " + path.string());
  try {
    raw.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  return raw;
}

CheckpointInfo info_from_header(const nlohmann::json& h) {
  CheckpointInfo info;
  try {
    info.spec = bundle_spec_from_json(h.at("spec"));
    info.epoch = h.at("epoch").get<int>();
    info.seed = h.at("seed").get<std::uint64_t>();
    info.extra = h.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
  return info;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, ModelBundle& bundle, int epoch,
                     const nlohmann::json& extra) {
  const auto params = bundle.all_parameters();
  nlohmann::json header;
  header["architecture"] = to_string(bundle.spec.architecture);
  header["spec"] = to_json(bundle.spec);
  header["epoch"] = epoch;
  header["seed"] = bundle.spec.seed;
  header["extra"] = extra;
  auto& list = header["parameters"] = nlohmann::json::array();
  for (const auto* p : params) list.push_back({{"name", p->name}, {"shape", p->shape}});
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    const std::uint64_t len = text.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* p : params) {
      out.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  return info_from_header(open_checkpoint(path).header);
}

CheckpointInfo load_checkpoint_into(const std::filesystem::path& path, ModelBundle& bundle) {
  auto raw = open_checkpoint(path);
  CheckpointInfo info = info_from_header(raw.header);
  if (!(info.spec == bundle.spec)) {
    throw ContractError("checkpoint spec does not match model: stored " +
                        to_json(info.spec).dump() + ", model " + to_json(bundle.spec).dump());
  }
  const auto params = bundle.all_parameters();
  const auto& list = raw.header.at("parameters");
  if (list.size() != params.size()) throw ContractError("checkpoint parameter count differs");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (list[i].at("name").get<std::string>() != params[i]->name ||
        list[i].at("shape").get<std::vector<int>>() != params[i]->shape) {
      throw ContractError("checkpoint parameter " + std::to_string(i) + " (" + params[i]->name +
                          ") differs in name or shape");
    }
  }
  for (auto* p : params) {
    raw.stream.read(reinterpret_cast<char*>(p->value.data()),
                    static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!raw.stream) throw IoError("truncated checkpoint payload in " + path.string());
  }
  return info;
}

ModelBundle load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  ModelBundle bundle = make_bundle(read_checkpoint_info(path).spec);
  CheckpointInfo got = load_checkpoint_into(path, bundle);
  if (info) *info = std::move(got);
  return bundle;
}

}  // namespace bt
