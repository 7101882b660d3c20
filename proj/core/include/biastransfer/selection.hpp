#pragma once

#include <functional>
#include <span>

#include "biastransfer/metrics.hpp"
#include "biastransfer/training.hpp"

namespace bt {

/// While alive, any request for test-split metrics on this thread raises
/// ContractError. Scopes nest.
class SelectionScope {
 public:
  SelectionScope();
  ~SelectionScope();
  SelectionScope(const SelectionScope&) = delete;
  SelectionScope& operator=(const SelectionScope&) = delete;

  static bool active();
};

/// Gate for every code path that produces or reads test-split metrics.
void require_test_access(const char* what);

/// Epoch with the lowest validation loss (first on ties).
int argmin_val_epoch(const RunManifest& m);

struct Selection {
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  int epoch = -1;
  MetricReport val_report;
};

/// Validation metrics of a run at its selected epoch.
using ValMetricsFn = std::function<MetricReport(const RunManifest&, int epoch)>;

/// Per run, the argmin-validation-loss epoch; across runs, the lowest
/// validation FID with higher SSIM breaking exact ties. Runs inside a
/// SelectionScope, so val_metrics cannot reach test metrics.
Selection select_best(std::span<const RunManifest> manifests, const ValMetricsFn& val_metrics);

}  // namespace bt
