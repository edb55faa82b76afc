#include "splatalign/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace splatalign {

void AlignOptions::validate() const {
  if (steps < 1) throw SpecInvalid("steps must be >= 1");
  if (!(learning_rate > 0.0)) throw SpecInvalid("learning rate must be positive");
  if (early_stop_window < 1) throw SpecInvalid("early-stop window must be >= 1");
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty set");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<long>(mid));
  return 0.5 * (lower + upper);
}

Selection select_active(const LossTable& previous, RobustMode mode, const std::vector<bool>* fixed_mask) {
  const std::size_t n = previous.losses.size();
  if (n == 0) throw Error("cannot select from an empty loss table");
  Selection out;
  switch (mode) {
    case RobustMode::kNoTrim:
      out.active.assign(n, true);
      break;
    case RobustMode::kIRLS: {
      out.active.assign(n, true);
      out.weights.resize(n);
      for (std::size_t i = 0; i < n; ++i) out.weights[i] = 1.0 / (previous.losses[i] + 1e-6);
      const double mean = std::accumulate(out.weights.begin(), out.weights.end(), 0.0) / static_cast<double>(n);
      for (double& w : out.weights) w /= mean;
      break;
    }
    case RobustMode::kFixedLTS:
      if (fixed_mask != nullptr) {
        out.active = *fixed_mask;
        break;
      }
      [[fallthrough]];
    case RobustMode::kLTS: {
      const double m = median(previous.losses);
      out.active.resize(n);
      for (std::size_t i = 0; i < n; ++i) out.active[i] = previous.losses[i] <= m;
      break;
    }
  }
  return out;
}

Tangent7d adam_step(AdamState& state, const Tangent7d& gradient, const AlignOptions& options) {
  if (!gradient.allFinite()) throw NonFiniteGradient();
  state.t += 1;
  state.m = options.beta1 * state.m + (1.0 - options.beta1) * gradient;
  state.v = options.beta2 * state.v + (1.0 - options.beta2) * gradient.cwiseProduct(gradient);
  const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.t));
  const Tangent7d m_hat = state.m / bc1;
  const Tangent7d v_hat = state.v / bc2;
  return options.learning_rate * m_hat.array() / (v_hat.array().sqrt() + options.epsilon);
}

namespace {

double table_mean(const LossTable& table) {
  return std::accumulate(table.losses.begin(), table.losses.end(), 0.0) /
         static_cast<double>(table.losses.size());
}

}  // namespace

AlignmentResult align(const GaussianScene& scene, const MetaImage& meta, const Sim3d& initial,
                      const AlignOptions& options) {
  options.validate();
  if (meta.size() == 0) throw EmptyMetaImage();
  const std::size_t n = meta.size();

  AlignmentResult result;
  if (n < 6) {
    result.warnings.push_back("meta-image " + meta.id + " has " + std::to_string(n) +
                              " images; accuracy typically plateaus only from about 6");
  }

  Sim3d T = initial;
  AdamState adam;
  std::optional<LossTable> previous;
  std::optional<std::vector<bool>> fixed_mask;
  double first_mean = 0.0;

  if (options.trim_first_iteration) {
    LossTable table;
    for (const MetaView& view : meta.views) {
      table.losses.push_back(image_loss(render(scene, view.camera, T, attribute_for(options.loss)),
                                        target_for(view, options.loss), options.loss));
    }
    previous = std::move(table);
  }

  for (long it = 1; it <= options.steps; ++it) {
    Selection sel;
    if (previous) {
      sel = select_active(*previous, options.robust, fixed_mask ? &*fixed_mask : nullptr);
    } else {
      sel.active.assign(n, true);
    }
    if (options.robust == RobustMode::kFixedLTS && !fixed_mask && previous) fixed_mask = sel.active;

    MetaLoss ml = meta_loss(scene, meta, T, options.loss, sel.active, sel.weights);
    ml.table.iteration = it;
    const bool losses_finite = std::all_of(ml.table.losses.begin(), ml.table.losses.end(),
                                           [](double l) { return std::isfinite(l); });
    if (!ml.gradient.allFinite() || !losses_finite) throw NonFiniteGradient(it);
    if (it == 1) first_mean = table_mean(ml.table);

    // FixedLTS freezes the LTS mask computed from the first iteration.
    if (options.robust == RobustMode::kFixedLTS && !fixed_mask) {
      fixed_mask = select_active(ml.table, RobustMode::kLTS).active;
    }

    const Tangent7d delta = adam_step(adam, ml.gradient, options);
    T = compose(T, exp_sim3<double>(-delta));

    TraceEntry entry;
    entry.iteration = it;
    for (std::size_t i = 0; i < n; ++i) {
      if (sel.active[i]) entry.total_active_loss += ml.table.losses[i];
    }
    entry.active = sel.active;
    entry.delta = delta;
    result.trace.push_back(std::move(entry));
    previous = ml.table;
    result.final_losses = std::move(ml.table);
    result.iterations = it;

    const auto window = static_cast<std::size_t>(options.early_stop_window);
    if (result.trace.size() >= window &&
        std::all_of(result.trace.end() - static_cast<long>(window), result.trace.end(),
                    [&](const TraceEntry& e) { return e.delta.norm() < options.early_stop_tolerance; })) {
      result.early_stopped = true;
      break;
    }
  }

  result.transform = T;
  const bool finite = T.rotation.allFinite() && T.translation.allFinite() && std::isfinite(T.log_scale);
  result.converged = finite && (result.early_stopped || table_mean(result.final_losses) <= first_mean);
  return result;
}

std::string mask_to_hex(const std::vector<bool>& mask) {
  if (mask.empty()) return "0";
  std::string hex;
  const std::size_t nibbles = (mask.size() + 3) / 4;
  for (std::size_t k = nibbles; k-- > 0;) {
    int v = 0;
    for (int b = 3; b >= 0; --b) {
      const std::size_t i = k * 4 + static_cast<std::size_t>(b);
      v = (v << 1) | (i < mask.size() && mask[i] ? 1 : 0);
    }
    hex += "0123456789abcdef"[v];
  }
  return hex;
}

std::string format_trace(const AlignmentResult& result) {
  std::ostringstream out;
  out << "# iteration total_active_loss active_mask_hex delta_rho1 delta_rho2 delta_rho3 "
         "delta_omega1 delta_omega2 delta_omega3 delta_lambda\n";
  char buf[40];
  for (const auto& e : result.trace) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.total_active_loss);
    out << e.iteration << " " << buf << " " << mask_to_hex(e.active);
    for (int a = 0; a < 7; ++a) {
      std::snprintf(buf, sizeof(buf), "%.17g", e.delta(a));
      out << " " << buf;
    }
    out << "\n";
  }
  return out.str();
}

const char* to_string(RobustMode mode) {
  switch (mode) {
    case RobustMode::kLTS: return "lts";
    case RobustMode::kFixedLTS: return "fixed-lts";
    case RobustMode::kNoTrim: return "no-trim";
    case RobustMode::kIRLS: return "irls";
  }
  return "?";
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kSemanticL1: return "semantic-l1";
    case LossKind::kSemanticL2: return "semantic-l2";
    case LossKind::kPhotometricL1: return "photometric-l1";
  }
  return "?";
}

std::optional<RobustMode> parse_robust_mode(const std::string& name) {
  for (auto m : {RobustMode::kLTS, RobustMode::kFixedLTS, RobustMode::kNoTrim, RobustMode::kIRLS}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

std::optional<LossKind> parse_loss_kind(const std::string& name) {
  for (auto k : {LossKind::kSemanticL1, LossKind::kSemanticL2, LossKind::kPhotometricL1}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

}  // namespace splatalign
