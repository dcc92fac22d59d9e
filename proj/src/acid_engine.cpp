#include "acid/acid_engine.hpp"

#include <cmath>
#include <fstream>

#include "acid/errors.hpp"
#include "acid/grid_io.hpp"
#include "acid/metrics.hpp"
#include "acid/sparsity.hpp"

namespace acid {

void AcidConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("epsilon must be positive");
  }
  if (iterations < 1) throw ValidationError("iterations must be at least 1");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ValidationError("mu must be non-negative");
  if (early_exit_tolerance && !(*early_exit_tolerance >= 0.0)) {
    throw ValidationError("early_exit_tolerance must be non-negative");
  }
}

void NormalizationRecord::normalize(std::span<double> v) const noexcept {
  for (double& x : v) x = normalize(x);
}

void NormalizationRecord::denormalize(std::span<double> v) const noexcept {
  for (double& x : v) x = denormalize(x);
}

Image normalized_recon(const ReconOperator& op, const Measurement& p) {
  const double a = max_abs(p);
  if (a == 0.0) return op.model().zero_image();
  const double t = op.input_amplitude().value_or(1.0);
  const NormalizationRecord rec{-a, a, -t, t};
  Measurement scaled = p;
  rec.normalize(scaled.values());
  Image out = op.forward(scaled);
  rec.denormalize(out.values());
  return out;
}

Image normalized_sparsify(const Image& f, double epsilon) {
  const ThresholdParams params(epsilon);
  const double lo = min_value(f), hi = max_value(f);
  if (!(hi > lo)) return sparsify(f, params);
  const NormalizationRecord rec{lo, hi, 0.0, 1.0};
  Image g = f;
  rec.normalize(g.values());
  Image out = sparsify(g, params);
  rec.denormalize(out.values());
  return out;
}

std::string to_string(AcidVariant v) {
  switch (v) {
    case AcidVariant::full: return "full";
    case AcidVariant::NI: return "NI";
    case AcidVariant::NDL: return "NDL";
    case AcidVariant::NCS: return "NCS";
  }
  return "unknown";
}

AcidVariant parse_variant(const std::string& name) {
  if (name == "full") return AcidVariant::full;
  if (name == "NI") return AcidVariant::NI;
  if (name == "NDL") return AcidVariant::NDL;
  if (name == "NCS") return AcidVariant::NCS;
  throw ValidationError("unknown ACID variant '" + name + "'");
}

namespace {

AcidResult run_core(AcidVariant variant, const Measurement& p0, const ForwardModel& model,
                    const ReconOperator& op_in, const AcidConfig& cfg,
                    const AcidMonitor& monitor, AcidTape* tape) {
  cfg.validate();
  model.check(p0);
  if (op_in.model().kind() != model.kind() || op_in.model().real_size() != model.real_size() ||
      op_in.model().col_count() != model.col_count()) {
    throw ShapeError("operator was built for a different forward model");
  }
  if (monitor.ground_truth) model.check(*monitor.ground_truth);

  const int iterations = variant == AcidVariant::NI ? 1 : cfg.iterations;
  ReconPtr adjoint;
  const ReconOperator* op = &op_in;
  if (variant == AcidVariant::NDL) {
    adjoint = build_adjoint_recon(model);
    op = adjoint.get();
  }
  const bool sparsify_on = variant != AcidVariant::NCS;
  const double m1 = cfg.residual_weight();
  const double m2 = cfg.increment_weight();

  auto phi = [&](const Measurement& p, int k) {
    try {
      return cfg.normalize ? normalized_recon(*op, p) : op->forward(p);
    } catch (const ValidationError& e) {
      throw DivergedError(k, std::string("reconstruction operator failed: ") + e.what());
    }
  };
  auto shrink = [&](const Image& f) {
    if (!sparsify_on) return f;
    return cfg.normalize ? normalized_sparsify(f, cfg.epsilon)
                         : sparsify(f, ThresholdParams(cfg.epsilon));
  };

  AcidHistory hist;
  auto emit = [&](int k, const Image& f, const Measurement& p, const Image& u) {
    if (tape) {
      tape->phi_inputs.push_back(p);
      tape->images.push_back(f);
    }
    if (monitor.observer) monitor.observer(AcidStep{k, f, p, u});
    if (monitor.snapshot_every > 0 && k % monitor.snapshot_every == 0) {
      hist.snapshots.emplace_back(k, f);
    }
  };

  if (tape) {
    *tape = AcidTape{};
    tape->sparsify_enabled = sparsify_on;
  }

  Image u = phi(p0, 0);
  if (tape) tape->sparsify_inputs.push_back(u);
  Image f = shrink(u);
  if (!f.all_finite()) throw DivergedError(0, "non-finite initial image");
  emit(0, f, p0, u);
  Measurement r = p0 - model.apply(f);
  hist.initial_residual_norm = l2_norm(r);

  for (int k = 1; k <= iterations; ++k) {
    Measurement p = r;
    p *= m1;
    u = phi(p, k);
    Image h = f;
    h.axpy(m2, u);
    if (tape) tape->sparsify_inputs.push_back(h);
    f = shrink(h);
    if (!f.all_finite()) throw DivergedError(k, "non-finite ACID iterate");
    r = p0 - model.apply(f);

    AcidRecord rec;
    rec.iteration = k;
    rec.residual_norm = l2_norm(r);
    rec.increment_norm = l2_norm(p);
    if (!std::isfinite(rec.residual_norm)) throw DivergedError(k, "non-finite residual");
    if (monitor.ground_truth) {
      const Image& gt = *monitor.ground_truth;
      rec.psnr = psnr(gt, f, monitor.peak);
      if (gt.width() >= std::size_t(kSsimWindow) && gt.height() >= std::size_t(kSsimWindow)) {
        rec.ssim = ssim(gt, f, monitor.peak);
      }
    }
    hist.records.push_back(rec);
    emit(k, f, p, u);
    if (cfg.early_exit_tolerance && rec.residual_norm < *cfg.early_exit_tolerance) break;
  }
  return {std::move(f), std::move(hist)};
}

}  // namespace

AcidResult acid_run(const Measurement& p0, const ForwardModel& model, const ReconOperator& op,
                    const AcidConfig& cfg, const AcidMonitor& monitor) {
  return run_core(AcidVariant::full, p0, model, op, cfg, monitor, nullptr);
}

AcidResult acid_ablate(AcidVariant variant, const Measurement& p0, const ForwardModel& model,
                       const ReconOperator& op, const AcidConfig& cfg,
                       const AcidMonitor& monitor) {
  return run_core(variant, p0, model, op, cfg, monitor, nullptr);
}

AcidResult acid_run_recorded(AcidVariant variant, const Measurement& p0,
                             const ForwardModel& model, const ReconOperator& op,
                             const AcidConfig& cfg, AcidTape& tape, const AcidMonitor& monitor) {
  return run_core(variant, p0, model, op, cfg, monitor, &tape);
}

// ---------------------------------------------------------------------------

std::pair<double, std::size_t> fit_geometric_rate(const std::vector<double>& errors) {
  if (errors.size() < 2) throw ValidationError("rate fit needs at least two points");
  const double floor = errors.back();
  std::size_t end = errors.size();
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (errors[k] <= 10.0 * floor) {
      end = k;
      break;
    }
  }
  end = std::max<std::size_t>(end, 2);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < end; ++k) {
    if (!(errors[k] > 0.0)) continue;
    const double x = double(k), y = std::log(errors[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return {0.0, n};
  const double slope = (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
  return {std::exp(slope), n};
}

namespace {

Image cyclic_shift(const Image& f, std::size_t dr, std::size_t dc) {
  Image out(f.width(), f.height());
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      out((r + dr) % f.height(), (c + dc) % f.width()) = f(r, c);
    }
  }
  return out;
}

}  // namespace

ContractionReport contraction_probe(double sigma, const ForwardModel& model, const Image& f_star,
                                    const AcidConfig& cfg) {
  if (!(sigma > 0.0) || sigma > 1.0) throw ValidationError("sigma must lie in (0, 1]");
  model.check(f_star);
  if (!(l2_norm(f_star) > 0.0)) throw ValidationError("contraction probe needs nonzero f_star");
  cfg.validate();

  const double artifact = 1.0 - sigma;
  CallbackRecon phi(model, "contraction", [&model, artifact](const Measurement& p) {
    Image x = pseudo_inverse(model, p);
    if (artifact != 0.0) x.axpy(artifact, cyclic_shift(x, 5, 3));
    return x;
  });

  ContractionReport rep;
  rep.sigma = sigma;
  AcidMonitor mon;
  mon.observer = [&](const AcidStep& s) {
    rep.observable_error.push_back(l2_norm(observable_projection(model, s.image - f_star)));
    if (s.iteration > 0) {
      const Image net_err = s.recon - pseudo_inverse(model, s.data);
      rep.network_observable_error.push_back(l2_norm(observable_projection(model, net_err)));
    }
  };
  AcidResult res = acid_run(model.apply(f_star), model, phi, cfg, mon);
  rep.history = std::move(res.history);
  std::tie(rep.fitted_rate, rep.fit_window) = fit_geometric_rate(rep.observable_error);
  rep.predicted_rate = 1.0 - cfg.contraction_weight() * sigma;
  rep.support = gradient_support(f_star, cfg.epsilon);
  rep.terminal_bound = artifact * std::sqrt(double(rep.support)) * cfg.epsilon /
                       (cfg.increment_weight() * sigma);
  return rep;
}

std::vector<SweepRow> data_sweep(const std::vector<double>& rates, const SweepSpec& spec) {
  if (rates.empty()) throw ValidationError("data_sweep needs at least one rate");
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (rates[i] < rates[i - 1]) throw ValidationError("sweep rates must be sorted ascending");
  }
  if (!spec.make_model || !spec.measure || !spec.make_operator) {
    throw ValidationError("sweep spec is missing a factory");
  }
  std::vector<SweepRow> rows;
  for (double rate : rates) {
    const ForwardModel model = spec.make_model(rate);
    const Measurement p0 = spec.measure(model);
    const ReconPtr op = spec.make_operator(model);
    const AcidResult res = acid_run(p0, model, *op, spec.cfg);
    rows.push_back({rate, psnr(spec.ground_truth, res.image, spec.peak),
                    ssim(spec.ground_truth, res.image, spec.peak)});
  }
  return rows;
}

void write_history_csv(const std::filesystem::path& path, const AcidHistory& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "iter,residual_norm,psnr,ssim\n";
  for (const auto& r : history.records) {
    out << r.iteration << ',' << format_number(r.residual_norm) << ','
        << (r.psnr ? format_number(*r.psnr) : "") << ','
        << (r.ssim ? format_number(*r.ssim) : "") << '\n';
  }
}

void write_snapshots(const std::filesystem::path& dir, const AcidHistory& history) {
  for (const auto& [k, img] : history.snapshots) {
    write_f64grid(dir / ("iter_" + std::to_string(k) + ".f64"), img);
  }
}

}  // namespace acid
