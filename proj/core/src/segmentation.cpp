#include "biastransfer/segmentation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>

#include "biastransfer/errors.hpp"

namespace bt {

SegMask::SegMask(int height, int width, std::int32_t fill) : height_(height), width_(width) {
  if (height < 1 || width < 1) throw DimensionError("mask sides must be positive");
  labels_.assign(static_cast<std::size_t>(height) * width, fill);
}

int SegMask::object_count() const {
  std::set<std::int32_t> ids;
  for (auto v : labels_) {
    if (v < 0) throw ContractError("mask labels must be non-negative");
    if (v != 0) ids.insert(v);
  }
  return static_cast<int>(ids.size());
}

SegMask SegMask::binarized() const {
  SegMask out = *this;
  for (auto& v : out.labels_) v = v != 0 ? 1 : 0;
  return out;
}

SegMask label_components(const SegMask& mask) {
  SegMask out(mask.height(), mask.width());
  std::int32_t next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(y, x) == 0 || out.at(y, x) != 0) continue;
      ++next;
      out.at(y, x) = next;
      stack.emplace_back(y, x);
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy;
            const int nx = cx + dx;
            if (ny < 0 || nx < 0 || ny >= mask.height() || nx >= mask.width()) continue;
            if (mask.at(ny, nx) == 0 || out.at(ny, nx) != 0) continue;
            out.at(ny, nx) = next;
            stack.emplace_back(ny, nx);
          }
        }
      }
    }
  }
  return out;
}

double dice_pixel(const SegMask& a, const SegMask& b) {
  if (!a.same_shape(b)) throw DimensionError("dice_pixel: shape mismatch");
  std::size_t na = 0, nb = 0, both = 0;
  auto la = a.labels();
  auto lb = b.labels();
  for (std::size_t i = 0; i < la.size(); ++i) {
    const bool in_a = la[i] != 0;
    const bool in_b = lb[i] != 0;
    na += in_a;
    nb += in_b;
    both += in_a && in_b;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double dice_object(const SegMask& a, const SegMask& b) {
  if (!a.same_shape(b)) throw DimensionError("dice_object: shape mismatch");
  std::unordered_map<std::int32_t, std::size_t> area_a, area_b;
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> overlap;
  auto la = a.labels();
  auto lb = b.labels();
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (la[i] < 0 || lb[i] < 0) throw ContractError("mask labels must be non-negative");
    if (la[i] != 0) ++area_a[la[i]];
    if (lb[i] != 0) ++area_b[lb[i]];
    if (la[i] != 0 && lb[i] != 0) ++overlap[{la[i], lb[i]}];
  }
  const std::size_t objects = area_a.size() + area_b.size();
  if (objects == 0) return 1.0;

  // (iou, label_a, label_b); ties resolved by label order for determinism.
  std::vector<std::tuple<double, std::int32_t, std::int32_t>> pairs;
  for (const auto& [key, inter] : overlap) {
    const double uni = static_cast<double>(area_a[key.first] + area_b[key.second] - inter);
    pairs.emplace_back(static_cast<double>(inter) / uni, key.first, key.second);
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& l, const auto& r) {
    if (std::get<0>(l) != std::get<0>(r)) return std::get<0>(l) > std::get<0>(r);
    return std::tie(std::get<1>(l), std::get<2>(l)) < std::tie(std::get<1>(r), std::get<2>(r));
  });
  std::set<std::int32_t> used_a, used_b;
  std::size_t matches = 0;
  for (const auto& [iou, ia, ib] : pairs) {
    if (iou <= 0.5) break;
    if (used_a.count(ia) || used_b.count(ib)) continue;
    used_a.insert(ia);
    used_b.insert(ib);
    ++matches;
  }
  return 2.0 * static_cast<double>(matches) / static_cast<double>(objects);
}

}  // namespace bt
