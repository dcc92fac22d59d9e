#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "acid/acid_engine.hpp"
#include "acid/forward_model.hpp"
#include "acid/grid.hpp"
#include "acid/recon_ops.hpp"

namespace acid {

struct AttackConfig {
  double gamma = 0.1;     // penalty on ||e||^2
  double step = 0.5;      // ascent step
  double momentum = 0.9;  // in [0, 1)
  int max_iters = 100;    // 0 returns the initial perturbation
  std::optional<double> norm_budget;

  void validate() const;
};

struct AttackResult {
  Image perturbation;
  std::vector<double> objective_trace;  // objective after each update
  std::vector<double> norm_trace;       // ||e|| after each update
  double perturbation_norm = 0.0;
  double output_distortion = 0.0;  // ||out(f + e) - out(f)||
  bool budget_reached = false;
};

// Exact vjp of sparsify(). Mean branch (|a - b| <= eps) passes 1/2 to both
// pixels of a pair; clamped branches pass 1 to the center only.
Image sparsify_vjp(const Image& f_half, const Image& cotangent, double epsilon);

// Exact vjps of the ACID normalization wrappers, including the dependence of
// the rescaling on the extreme entries.
Image normalized_sparsify_vjp(const Image& f_half, const Image& cotangent, double epsilon);
Measurement normalized_recon_vjp(const ReconOperator& op, const Measurement& p,
                                 const Image& cotangent);

// 1/2 ||Phi(A f + A e) - Phi(A f)||^2 - gamma/2 ||e||^2
double attack_objective(const ReconOperator& op, const ForwardModel& model, const Image& f,
                        const Image& e, double gamma);
Image attack_gradient(const ReconOperator& op, const ForwardModel& model, const Image& f,
                      const Image& e, double gamma);

// Seeded Gaussian with ||e0|| = 1e-3 ||f|| (1e-3 when f = 0).
Image initial_perturbation(const Image& f, std::uint64_t seed);

AttackResult attack_network(const ReconOperator& op, const ForwardModel& model, const Image& f,
                            const AttackConfig& cfg, std::uint64_t seed);

// Same objective with the whole ACID pipeline in place of Phi.
double acid_attack_objective(const ReconOperator& op, const ForwardModel& model, const Image& f,
                             const Image& e, const AcidConfig& acid_cfg, double gamma,
                             AcidVariant variant = AcidVariant::full);
Image acid_attack_gradient(const ReconOperator& op, const ForwardModel& model, const Image& f,
                           const Image& e, const AcidConfig& acid_cfg, double gamma,
                           AcidVariant variant = AcidVariant::full);

AttackResult attack_acid(const ReconOperator& op, const ForwardModel& model, const Image& f,
                         const AcidConfig& acid_cfg, const AttackConfig& cfg, std::uint64_t seed,
                         AcidVariant variant = AcidVariant::full);

// CSV "iter,objective,norm".
void write_attack_csv(const std::filesystem::path& path, const AttackResult& result);

}  // namespace acid
