#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acid/forward_model.hpp"
#include "acid/grid.hpp"

namespace acid {

struct Capabilities {
  bool differentiable = false;
  bool trainable = false;
};

// Reconstruction operator Phi: measurement -> image, tied to one forward model.
// forward() and vjp() validate shapes and capabilities, then dispatch to the
// implementation hooks.
class ReconOperator {
 public:
  explicit ReconOperator(ForwardModel model) : model_(std::move(model)) {}
  virtual ~ReconOperator() = default;

  const ForwardModel& model() const noexcept { return model_; }
  virtual std::string kind() const = 0;
  virtual Capabilities capabilities() const = 0;

  Image forward(const Measurement& p) const;
  // J^T * cotangent with J = d forward / d p evaluated at p.
  Measurement vjp(const Measurement& p, const Image& cotangent) const;

  // Typical max|p| of the data the operator was fitted on; ACID rescales
  // residuals to this amplitude when normalization is on.
  virtual std::optional<double> input_amplitude() const { return std::nullopt; }

 protected:
  virtual Image eval(const Measurement& p) const = 0;
  virtual Measurement eval_vjp(const Measurement& p, const Image& cotangent) const;

 private:
  ForwardModel model_;
};

using ReconPtr = std::shared_ptr<const ReconOperator>;

inline Image recon_forward(const ReconOperator& op, const Measurement& p) { return op.forward(p); }
inline Measurement recon_vjp(const ReconOperator& op, const Measurement& p, const Image& cot) {
  return op.vjp(p, cot);
}

// Zero-filled inverse DFT (Fourier) or ramp-filtered backprojection (Radon).
class AdjointRecon final : public ReconOperator {
 public:
  explicit AdjointRecon(ForwardModel model);
  std::string kind() const override { return "adjoint"; }
  Capabilities capabilities() const override { return {true, false}; }

  // Ram-Lak filtering of every projection row (identity for Fourier models).
  Measurement filter(const Measurement& p) const;
  // Scale applied after the adjoint: pi / num_angles for Radon, 1 for Fourier.
  double scale() const noexcept { return scale_; }

 protected:
  Image eval(const Measurement& p) const override;
  Measurement eval_vjp(const Measurement& p, const Image& cotangent) const override;

 private:
  std::vector<double> kernel_;  // symmetric spatial ramp kernel, index = |offset|
  double scale_ = 1.0;
};

ReconPtr build_adjoint_recon(const ForwardModel& model);

// Plain (unfiltered) backprojection scaled like AdjointRecon; a reference point
// for the filtered variant.
Image unfiltered_backprojection(const ForwardModel& model, const Measurement& p);

// Operator defined by user callbacks; vjp is optional.
class CallbackRecon final : public ReconOperator {
 public:
  using ForwardFn = std::function<Image(const Measurement&)>;
  using VjpFn = std::function<Measurement(const Measurement&, const Image&)>;

  CallbackRecon(ForwardModel model, std::string name, ForwardFn forward, VjpFn vjp = {});
  std::string kind() const override { return name_; }
  Capabilities capabilities() const override { return {bool(vjp_), false}; }

 protected:
  Image eval(const Measurement& p) const override { return forward_(p); }
  Measurement eval_vjp(const Measurement& p, const Image& cot) const override {
    return vjp_(p, cot);
  }

 private:
  std::string name_;
  ForwardFn forward_;
  VjpFn vjp_;
};

// alpha * inner(p).
class ScaledRecon final : public ReconOperator {
 public:
  ScaledRecon(ReconPtr inner, double alpha);
  std::string kind() const override { return "scaled(" + inner_->kind() + ")"; }
  Capabilities capabilities() const override { return {inner_->capabilities().differentiable, false}; }

 protected:
  Image eval(const Measurement& p) const override;
  Measurement eval_vjp(const Measurement& p, const Image& cot) const override;

 private:
  ReconPtr inner_;
  double alpha_;
};

enum class AutomapInit {
  random,   // small Gaussian weights
  adjoint,  // hidden layer starts as a scaled identity, output layer as the adjoint
};

// Two fully connected layers: Phi(p) = W2 tanh(W1 (g * flatten(p)) + b1) + b2,
// with the fixed input gain g = 1 / (4 N). The gain only conditions training;
// it is equivalent to using g * W1 as the first-layer weights.
class AutomapMini final : public ReconOperator {
 public:
  static constexpr std::size_t kMaxPixels = 64 * 64;

  AutomapMini(ForwardModel model, std::size_t hidden, std::uint64_t seed,
              AutomapInit init = AutomapInit::adjoint);

  std::string kind() const override { return "automap"; }
  Capabilities capabilities() const override { return {true, true}; }
  std::optional<double> input_amplitude() const override { return amplitude_; }

  std::size_t input_size() const noexcept { return std::size_t(w1_.cols()); }
  std::size_t hidden() const noexcept { return std::size_t(w1_.rows()); }
  double input_gain() const noexcept { return gain_; }

  const Eigen::MatrixXd& w1() const noexcept { return w1_; }
  const Eigen::VectorXd& b1() const noexcept { return b1_; }
  const Eigen::MatrixXd& w2() const noexcept { return w2_; }
  const Eigen::VectorXd& b2() const noexcept { return b2_; }

  void save(const std::filesystem::path& path) const;
  static AutomapMini load(const std::filesystem::path& path, const ForwardModel& model);

  bool same_parameters(const AutomapMini& other) const;

 protected:
  Image eval(const Measurement& p) const override;
  Measurement eval_vjp(const Measurement& p, const Image& cot) const override;

 private:
  friend struct AutomapTrainer;
  AutomapMini(ForwardModel model, Eigen::MatrixXd w1, Eigen::VectorXd b1, Eigen::MatrixXd w2,
              Eigen::VectorXd b2, double gain, std::optional<double> amplitude);

  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;
  Eigen::VectorXd b2_;
  double gain_;
  std::optional<double> amplitude_;
};

std::shared_ptr<AutomapMini> build_automap_mini(const ForwardModel& model, std::size_t hidden,
                                                std::uint64_t seed,
                                                AutomapInit init = AutomapInit::adjoint);

struct TrainingPair {
  Measurement input;
  Image target;
};

struct TrainingLog {
  std::vector<double> loss;                 // mean squared error per pixel, per epoch
  std::vector<double> consistency_residual;  // mean ||A Phi(p) - p|| / ||p||, per epoch
};

struct TrainResult {
  std::shared_ptr<AutomapMini> op;
  TrainingLog log;
};

// Full-batch gradient descent on the mean squared error. Each parameter group
// uses a fixed step scale derived once from the initial activations, so the
// run is deterministic. loss[e] is measured before update e; one extra entry
// after the last epoch.
TrainResult train_automap_mini(const AutomapMini& op, const std::vector<TrainingPair>& pairs,
                               std::size_t epochs, double step);

struct BrenReport {
  double ratio;
  double numerator;
  double denominator;
};

BrenReport bren_ratio(const ReconOperator& op, const ForwardModel& model, const Image& f_star);

struct LipschitzEstimate {
  double lower = 0.0;
  std::size_t samples = 0;
  double perturbation_scale = 0.0;
  std::vector<double> running_max;  // lower bound after each sample
};

// Ratio ||Phi(A f) - Phi(A f')|| / ||f - f'|| with f' = f + delta, where
// delta is Gaussian rescaled to ||delta|| = scale * ||f|| (or scale when f = 0).
LipschitzEstimate lipschitz_estimate(const ReconOperator& op, const ForwardModel& model,
                                     const std::vector<Image>& probes,
                                     std::size_t perturbations_per_probe, double scale,
                                     std::uint64_t seed);

// Operator blob: header "RECOP1 <kind> <m> <N> <hidden>\n" then little-endian
// doubles. m is the real input length. Adjoint operators carry no payload.
void save_operator(const std::filesystem::path& path, const ReconOperator& op);
ReconPtr load_operator(const std::filesystem::path& path, const ForwardModel& model);

}  // namespace acid
