#include "acid/adversary.hpp"

#include <cmath>
#include <fstream>
#include <functional>

#include "acid/errors.hpp"
#include "acid/grid_io.hpp"
#include "acid/random.hpp"
#include "acid/sparsity.hpp"

namespace acid {

void AttackConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("gamma must be >= 0");
  if (!(step > 0.0) || !std::isfinite(step)) throw ValidationError("attack step must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  if (max_iters < 0) throw ValidationError("max_iters must be non-negative");
  if (norm_budget && !(*norm_budget > 0.0)) throw ValidationError("norm_budget must be > 0");
}

// ---------------------------------------------------------------------------
// sparsify backward

namespace {

// Accumulates the vjp into `grad` and returns <cotangent, d sparsify / d eps>.
double sparsify_backward(const Image& f, const Image& cot, double eps, Image& grad) {
  const std::size_t w = f.width(), h = f.height();
  double eps_dot = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double g = 0.25 * cot(r, c);
      if (g == 0.0) continue;
      const double v = f(r, c);
      auto pair = [&](bool present, std::size_t nr, std::size_t nc) {
        if (!present) {
          grad(r, c) += g;
          return;
        }
        const double d = v - f(nr, nc);
        if (d > eps) {
          grad(r, c) += g;
          eps_dot -= 0.5 * g;
        } else if (d < -eps) {
          grad(r, c) += g;
          eps_dot += 0.5 * g;
        } else {
          grad(r, c) += 0.5 * g;
          grad(nr, nc) += 0.5 * g;
        }
      };
      pair(c + 1 < w, r, c + 1);
      pair(r + 1 < h, r + 1, c);
      pair(c >= 1, r, c - 1);
      pair(r >= 1, r - 1, c);
    }
  }
  return eps_dot;
}

std::size_t argmin_index(std::span<const double> v) {
  return std::size_t(std::min_element(v.begin(), v.end()) - v.begin());
}

std::size_t argmax_index(std::span<const double> v) {
  return std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Image sparsify_vjp(const Image& f_half, const Image& cotangent, double epsilon) {
  if (!f_half.same_shape(cotangent)) throw ShapeError("sparsify_vjp shape mismatch");
  ThresholdParams params(epsilon);
  Image grad(f_half.width(), f_half.height());
  sparsify_backward(f_half, cotangent, params.epsilon, grad);
  return grad;
}

Image normalized_sparsify_vjp(const Image& f_half, const Image& cotangent, double epsilon) {
  if (!f_half.same_shape(cotangent)) throw ShapeError("sparsify_vjp shape mismatch");
  ThresholdParams params(epsilon);
  const std::size_t imin = argmin_index(f_half.values());
  const std::size_t imax = argmax_index(f_half.values());
  const double lo = f_half[imin], hi = f_half[imax];
  Image grad(f_half.width(), f_half.height());
  if (!(hi > lo)) {
    sparsify_backward(f_half, cotangent, epsilon, grad);
    return grad;
  }
  // Min-max normalized sparsify equals sparsify with threshold eps*(hi - lo),
  // so the branches are read in normalized coordinates and the threshold
  // derivative flows into the two extreme pixels.
  const NormalizationRecord rec{lo, hi, 0.0, 1.0};
  Image g = f_half;
  rec.normalize(g.values());
  const double eps_dot = sparsify_backward(g, cotangent, epsilon, grad);
  grad[imax] += epsilon * eps_dot;
  grad[imin] -= epsilon * eps_dot;
  return grad;
}

Measurement normalized_recon_vjp(const ReconOperator& op, const Measurement& p,
                                 const Image& cotangent) {
  const auto vals = p.values();
  std::size_t jmax = 0;
  double a = 0.0;
  for (std::size_t j = 0; j < vals.size(); ++j) {
    if (std::abs(vals[j]) > a) {
      a = std::abs(vals[j]);
      jmax = j;
    }
  }
  if (a == 0.0) return op.vjp(p, cotangent);
  const double t = op.input_amplitude().value_or(1.0);
  const NormalizationRecord rec{-a, a, -t, t};
  Measurement scaled = p;
  rec.normalize(scaled.values());
  // Phi~(p) = Phi(s p) / s with s = t / a: the fixed-scale part contributes
  // J^T cot; the scale's dependence on a = |p_jmax| contributes
  // (<cot, Phi~(p)> - <J^T cot, p>) / a at jmax.
  Measurement grad = op.vjp(scaled, cotangent);
  Image out = op.forward(scaled);
  rec.denormalize(out.values());
  const double extra = (dot(cotangent, out) - dot(grad, p)) / a;
  grad[jmax] += (vals[jmax] > 0.0 ? 1.0 : -1.0) * extra;
  return grad;
}

// ---------------------------------------------------------------------------
// single-operator attack

double attack_objective(const ReconOperator& op, const ForwardModel& model, const Image& f,
                        const Image& e, double gamma) {
  const Measurement p = model.apply(f);
  const Image ref = op.forward(p);
  const Image out = op.forward(p + model.apply(e));
  const double d = l2_norm(out - ref);
  const double en = l2_norm(e);
  return 0.5 * d * d - 0.5 * gamma * en * en;
}

Image attack_gradient(const ReconOperator& op, const ForwardModel& model, const Image& f,
                      const Image& e, double gamma) {
  const Measurement p = model.apply(f);
  const Image ref = op.forward(p);
  const Measurement u1 = p + model.apply(e);
  const Image out = op.forward(u1);
  Image g = model.adjoint(op.vjp(u1, out - ref));
  g.axpy(-gamma, e);
  return g;
}

Image initial_perturbation(const Image& f, std::uint64_t seed) {
  Rng rng(seed);
  Image e(f.width(), f.height(), gaussian_vector(f.size(), rng));
  const double fn = l2_norm(f);
  e *= 1e-3 * (fn > 0.0 ? fn : 1.0) / l2_norm(e);
  return e;
}

namespace {

struct AttackEval {
  double objective;
  double distortion;
  Image gradient;
};

AttackResult ascend(const Image& e0, const AttackConfig& cfg,
                    const std::function<AttackEval(const Image&)>& evaluate) {
  AttackResult res{e0, {}, {}, l2_norm(e0), 0.0, false};
  AttackEval ev = evaluate(e0);
  res.output_distortion = ev.distortion;
  Image e = e0;
  Image v(e0.width(), e0.height());
  for (int i = 0; i < cfg.max_iters; ++i) {
    v *= cfg.momentum;
    v.axpy(cfg.step, ev.gradient);
    e += v;
    double en = l2_norm(e);
    if (cfg.norm_budget && en > *cfg.norm_budget) {
      e *= *cfg.norm_budget / en;
      en = l2_norm(e);
      res.budget_reached = true;
    }
    if (!e.all_finite()) {
      throw AttackAbortedError("attack produced a non-finite perturbation", res.objective_trace);
    }
    ev = evaluate(e);
    if (!std::isfinite(ev.objective) || !ev.gradient.all_finite()) {
      throw AttackAbortedError("attack objective became non-finite", res.objective_trace);
    }
    res.objective_trace.push_back(ev.objective);
    res.norm_trace.push_back(en);
    res.perturbation = e;
    res.perturbation_norm = en;
    res.output_distortion = ev.distortion;
    if (res.budget_reached) break;
  }
  return res;
}

}  // namespace

AttackResult attack_network(const ReconOperator& op, const ForwardModel& model, const Image& f,
                            const AttackConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  model.check(f);
  if (!op.capabilities().differentiable) {
    throw CapabilityError("attack_network needs a differentiable operator");
  }
  const Measurement p = model.apply(f);
  const Image ref = op.forward(p);
  return ascend(initial_perturbation(f, seed), cfg, [&](const Image& e) {
    const Measurement u1 = p + model.apply(e);
    const Image diff = op.forward(u1) - ref;
    const double d = l2_norm(diff);
    const double en = l2_norm(e);
    Image g = model.adjoint(op.vjp(u1, diff));
    g.axpy(-cfg.gamma, e);
    return AttackEval{0.5 * d * d - 0.5 * cfg.gamma * en * en, d, std::move(g)};
  });
}

// ---------------------------------------------------------------------------
// whole-pipeline attack

namespace {

struct AcidAttackContext {
  const ReconOperator& op_in;
  const ForwardModel& model;
  const AcidConfig& cfg;
  AcidVariant variant;
  Measurement p;
  Image reference;
  ReconPtr adjoint;

  AcidAttackContext(const ReconOperator& op, const ForwardModel& m, const Image& f,
                    const AcidConfig& c, AcidVariant v)
      : op_in(op), model(m), cfg(c), variant(v), p(m.apply(f)), reference(f) {
    if (variant == AcidVariant::NDL) adjoint = build_adjoint_recon(model);
    reference = acid_ablate(variant, p, model, op_in, cfg).image;
  }

  const ReconOperator& phi_op() const { return adjoint ? *adjoint : op_in; }

  Measurement phi_vjp(const Measurement& q, const Image& cot) const {
    return cfg.normalize ? normalized_recon_vjp(phi_op(), q, cot) : phi_op().vjp(q, cot);
  }

  Image shrink_vjp(const Image& h, const Image& cot, bool enabled) const {
    if (!enabled) return cot;
    return cfg.normalize ? normalized_sparsify_vjp(h, cot, cfg.epsilon)
                         : sparsify_vjp(h, cot, cfg.epsilon);
  }

  AttackEval evaluate(const Image& e, double gamma) const {
    const Measurement q = p + model.apply(e);
    AcidTape tape;
    const AcidResult res = acid_run_recorded(variant, q, model, op_in, cfg, tape);
    const Image diff = res.image - reference;
    const double d = l2_norm(diff);
    const double en = l2_norm(e);

    const double m1 = cfg.residual_weight();
    const double m2 = cfg.increment_weight();
    const std::size_t iters = tape.images.size() - 1;
    Measurement gq = model.zero_measurement();
    Image gf = diff;
    for (std::size_t k = iters; k >= 1; --k) {
      const Image gh = shrink_vjp(tape.sparsify_inputs[k], gf, tape.sparsify_enabled);
      Measurement gr = phi_vjp(tape.phi_inputs[k], m2 * gh);
      gr *= m1;
      gq += gr;
      gf = gh;
      gf -= model.adjoint(gr);
    }
    const Image gu0 = shrink_vjp(tape.sparsify_inputs[0], gf, tape.sparsify_enabled);
    gq += phi_vjp(tape.phi_inputs[0], gu0);
    Image g = model.adjoint(gq);
    g.axpy(-gamma, e);
    return {0.5 * d * d - 0.5 * gamma * en * en, d, std::move(g)};
  }
};

void check_acid_attack(const ReconOperator& op, AcidVariant variant) {
  if (variant != AcidVariant::NDL && !op.capabilities().differentiable) {
    throw CapabilityError("attack_acid needs a differentiable operator");
  }
}

}  // namespace

double acid_attack_objective(const ReconOperator& op, const ForwardModel& model, const Image& f,
                             const Image& e, const AcidConfig& acid_cfg, double gamma,
                             AcidVariant variant) {
  model.check(f);
  model.check(e);
  const Measurement p = model.apply(f);
  const Image ref = acid_ablate(variant, p, model, op, acid_cfg).image;
  const Image out = acid_ablate(variant, p + model.apply(e), model, op, acid_cfg).image;
  const double d = l2_norm(out - ref);
  const double en = l2_norm(e);
  return 0.5 * d * d - 0.5 * gamma * en * en;
}

Image acid_attack_gradient(const ReconOperator& op, const ForwardModel& model, const Image& f,
                           const Image& e, const AcidConfig& acid_cfg, double gamma,
                           AcidVariant variant) {
  check_acid_attack(op, variant);
  model.check(f);
  model.check(e);
  AcidAttackContext ctx(op, model, f, acid_cfg, variant);
  return ctx.evaluate(e, gamma).gradient;
}

AttackResult attack_acid(const ReconOperator& op, const ForwardModel& model, const Image& f,
                         const AcidConfig& acid_cfg, const AttackConfig& cfg, std::uint64_t seed,
                         AcidVariant variant) {
  cfg.validate();
  acid_cfg.validate();
  check_acid_attack(op, variant);
  model.check(f);
  AcidAttackContext ctx(op, model, f, acid_cfg, variant);
  return ascend(initial_perturbation(f, seed), cfg,
                [&](const Image& e) { return ctx.evaluate(e, cfg.gamma); });
}

void write_attack_csv(const std::filesystem::path& path, const AttackResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "iter,objective,norm\n";
  for (std::size_t i = 0; i < result.objective_trace.size(); ++i) {
    out << (i + 1) << ',' << format_number(result.objective_trace[i]) << ','
        << format_number(result.norm_trace[i]) << '\n';
  }
}

}  // namespace acid
