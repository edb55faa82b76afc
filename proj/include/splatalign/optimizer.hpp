#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splatalign/geometry.hpp"
#include "splatalign/meta_image.hpp"
#include "splatalign/objective.hpp"
#include "splatalign/scene.hpp"

namespace splatalign {

enum class RobustMode { kLTS, kFixedLTS, kNoTrim, kIRLS };

struct AlignOptions {
  int steps = 2000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LossKind loss = LossKind::kSemanticL1;
  RobustMode robust = RobustMode::kLTS;
  // Stop once every update norm in the trailing window is below tolerance.
  int early_stop_window = 50;
  double early_stop_tolerance = 1e-6;
  std::uint64_t seed = 0;  // the loop draws no random numbers; echoed in manifests
  // Trim the first iteration against losses evaluated at the initial
  // transform instead of using every image.
  bool trim_first_iteration = false;

  void validate() const;
};

/// Standard median; mean of the two central order statistics for even n.
double median(std::vector<double> values);

struct Selection {
  std::vector<bool> active;
  std::vector<double> weights;  // IRLS only, mean 1
};

/// LTS keeps images whose previous loss is <= the median of all previous
/// losses. FixedLTS returns `fixed_mask` when given (the caller freezes it
/// after the first iteration), NoTrim keeps everything and IRLS keeps
/// everything with weights 1 / (loss + 1e-6) normalized to mean 1.
Selection select_active(const LossTable& previous, RobustMode mode,
                        const std::vector<bool>* fixed_mask = nullptr);

struct AdamState {
  Tangent7d m = Tangent7d::Zero();
  Tangent7d v = Tangent7d::Zero();
  long t = 0;
};

/// One bias-corrected Adam step. The returned delta is applied as
/// T <- T * exp(-delta).
Tangent7d adam_step(AdamState& state, const Tangent7d& gradient, const AlignOptions& options);

struct TraceEntry {
  long iteration = 0;
  double total_active_loss = 0.0;
  std::vector<bool> active;
  Tangent7d delta = Tangent7d::Zero();
};

struct AlignmentResult {
  Sim3d transform;
  std::vector<TraceEntry> trace;
  LossTable final_losses;
  bool converged = false;
  bool early_stopped = false;
  long iterations = 0;
  std::vector<std::string> warnings;
};

/// Robust inverse optimization of one meta-image against the reference
/// model, starting from `initial`. Throws NonFiniteGradient, with the
/// iteration, when a gradient or any image loss is not finite.
AlignmentResult align(const GaussianScene& scene, const MetaImage& meta, const Sim3d& initial,
                      const AlignOptions& options);

std::string mask_to_hex(const std::vector<bool>& mask);

/// One line per iteration: iteration, total active loss, active bitmask
/// (hex, bit i = image i), and the 7 components of the applied delta.
std::string format_trace(const AlignmentResult& result);

const char* to_string(RobustMode mode);
const char* to_string(LossKind kind);
std::optional<RobustMode> parse_robust_mode(const std::string& name);
std::optional<LossKind> parse_loss_kind(const std::string& name);

}  // namespace splatalign
