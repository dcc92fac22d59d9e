#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acid/forward_model.hpp"
#include "acid/grid.hpp"
#include "acid/recon_ops.hpp"

namespace acid {

struct AcidConfig {
  double lambda = 0.76;
  double epsilon = 1e-3;
  int iterations = 50;
  bool normalize = false;
  double mu = 0.0;
  // Stop once residual_norm drops below this value. Off by default.
  std::optional<double> early_exit_tolerance;

  void validate() const;
  // lambda / (1 + lambda + mu), applied to the data residual.
  double residual_weight() const noexcept { return lambda / (1.0 + lambda + mu); }
  // (1 + mu) / lambda, applied to Phi's output.
  double increment_weight() const noexcept { return (1.0 + mu) / lambda; }
  // (1 + mu) / (1 + lambda + mu), the contraction factor M.
  double contraction_weight() const noexcept { return (1.0 + mu) / (1.0 + lambda + mu); }
};

// Affine map of [input_min, input_max] onto [target_min, target_max], applied
// around the centers so symmetric ranges reduce to a pure scale.
struct NormalizationRecord {
  double input_min = -1.0;
  double input_max = 1.0;
  double target_min = -1.0;
  double target_max = 1.0;

  double scale() const noexcept { return (target_max - target_min) / (input_max - input_min); }
  double normalize(double x) const noexcept {
    return (x - 0.5 * (input_min + input_max)) * scale() + 0.5 * (target_min + target_max);
  }
  double denormalize(double y) const noexcept {
    return (y - 0.5 * (target_min + target_max)) / scale() + 0.5 * (input_min + input_max);
  }
  void normalize(std::span<double> v) const noexcept;
  void denormalize(std::span<double> v) const noexcept;
};

// Phi call with the residual rescaled to the operator's training amplitude and
// the output mapped back. A zero input maps to a zero image.
Image normalized_recon(const ReconOperator& op, const Measurement& p);
// sparsify() applied after min-max mapping f onto [0, 1], then mapped back.
Image normalized_sparsify(const Image& f, double epsilon);

struct AcidRecord {
  int iteration = 0;
  double residual_norm = 0.0;   // ||p0 - A f^(k)||
  double increment_norm = 0.0;  // ||p^(k)||, the data step that produced f^(k)
  std::optional<double> psnr;
  std::optional<double> ssim;
};

struct AcidHistory {
  double initial_residual_norm = 0.0;  // ||p0 - A f^(0)||
  std::vector<AcidRecord> records;     // one per completed iteration
  std::vector<std::pair<int, Image>> snapshots;
};

struct AcidStep {
  int iteration;               // k; 0 is the initial image
  const Image& image;          // f^(k)
  const Measurement& data;     // the measurement fed to Phi for this step
  const Image& recon;          // Phi output (after normalization) for this step
};

struct AcidMonitor {
  std::optional<Image> ground_truth;
  double peak = 1.0;
  int snapshot_every = 0;  // 0 disables snapshots
  std::function<void(const AcidStep&)> observer;
};

struct AcidResult {
  Image image;
  AcidHistory history;
};

enum class AcidVariant { full, NI, NDL, NCS };

std::string to_string(AcidVariant v);
AcidVariant parse_variant(const std::string& name);

// Every quantity the backward pass of attack_acid needs. phi_inputs[0] is p0;
// phi_inputs[k] is p^(k). sparsify_inputs[k] is the argument of the k-th
// sparsify call. images[k] is f^(k).
struct AcidTape {
  bool sparsify_enabled = true;
  std::vector<Measurement> phi_inputs;
  std::vector<Image> sparsify_inputs;
  std::vector<Image> images;
};

AcidResult acid_run(const Measurement& p0, const ForwardModel& model, const ReconOperator& op,
                    const AcidConfig& cfg, const AcidMonitor& monitor = {});

AcidResult acid_ablate(AcidVariant variant, const Measurement& p0, const ForwardModel& model,
                       const ReconOperator& op, const AcidConfig& cfg,
                       const AcidMonitor& monitor = {});

// Same iteration as acid_run/acid_ablate, additionally filling `tape`.
AcidResult acid_run_recorded(AcidVariant variant, const Measurement& p0,
                             const ForwardModel& model, const ReconOperator& op,
                             const AcidConfig& cfg, AcidTape& tape,
                             const AcidMonitor& monitor = {});

struct ContractionReport {
  AcidHistory history;
  double sigma = 0.0;
  // ||P(f^(k) - f*)|| for k = 0..K, P the projection onto range(A^T).
  std::vector<double> observable_error;
  // ||P(Phi(p^(k)) - A^+ p^(k))|| for k = 1..K: the operator's own error on
  // the data it was fed.
  std::vector<double> network_observable_error;
  double fitted_rate = 0.0;      // least-squares geometric rate over the transient
  std::size_t fit_window = 0;    // number of points used in the fit
  double predicted_rate = 0.0;   // 1 - M sigma
  std::size_t support = 0;       // gradient entries of f* above epsilon
  double terminal_bound = 0.0;   // (1 - sigma) sqrt(s) eps / (M2 sigma)
};

// Runs ACID with Phi(p) = A^+ p + (1 - sigma) T(A^+ p), where T is a fixed
// cyclic shift, on noise-free data of f_star.
ContractionReport contraction_probe(double sigma, const ForwardModel& model, const Image& f_star,
                                    const AcidConfig& cfg);

// Geometric-rate fit on errors[0..]: uses the prefix until the error first
// falls within 10x of the last value.
std::pair<double, std::size_t> fit_geometric_rate(const std::vector<double>& errors);

struct SweepRow {
  double rate;
  double psnr;
  double ssim;
};

struct SweepSpec {
  Image ground_truth;
  double peak = 1.0;
  AcidConfig cfg;
  // Builds the model for one sweep point (rate or view count).
  std::function<ForwardModel(double)> make_model;
  // Produces p0 for a model.
  std::function<Measurement(const ForwardModel&)> measure;
  std::function<ReconPtr(const ForwardModel&)> make_operator;
};

std::vector<SweepRow> data_sweep(const std::vector<double>& rates, const SweepSpec& spec);

// CSV "iter,residual_norm,psnr,ssim"; empty cells when no ground truth.
void write_history_csv(const std::filesystem::path& path, const AcidHistory& history);
// iter_<k>.f64 for every snapshot.
void write_snapshots(const std::filesystem::path& dir, const AcidHistory& history);

}  // namespace acid
