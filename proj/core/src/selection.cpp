#include "biastransfer/selection.hpp"

#include "biastransfer/errors.hpp"

namespace bt {

namespace {
thread_local int selection_depth = 0;
}

SelectionScope::SelectionScope() { ++selection_depth; }
SelectionScope::~SelectionScope() { --selection_depth; }
bool SelectionScope::active() { return selection_depth > 0; }

void require_test_access(const char* what) {
  if (SelectionScope::active()) {
    throw ContractError(std::string("test-split access during model selection: ") + what);
  }
}

int argmin_val_epoch(const RunManifest& m) {
  if (m.history.empty()) throw DataError("run manifest has no epochs");
  const EpochRecord* best = &m.history.front();
  for (const auto& e : m.history) {
    if (e.val_loss < best->val_loss) best = &e;
  }
  return best->epoch;
}

Selection select_best(std::span<const RunManifest> manifests, const ValMetricsFn& val_metrics) {
  if (manifests.empty()) throw DataError("select_best: no runs");
  SelectionScope scope;
  Selection best;
  bool have = false;
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const int epoch = argmin_val_epoch(manifests[i]);
    MetricReport r = val_metrics(manifests[i], epoch);
    if (r.split != Split::val) throw ContractError("select_best received a non-validation report");
    const bool better = !have || r.fid < best.val_report.fid ||
                        (r.fid == best.val_report.fid && r.ssim_mean > best.val_report.ssim_mean);
    if (better) {
      best = {i, manifests[i].seed, epoch, std::move(r)};
      have = true;
    }
  }
  return best;
}

}  // namespace bt
