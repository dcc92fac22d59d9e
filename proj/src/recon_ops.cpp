#include "acid/recon_ops.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "acid/errors.hpp"
#include "acid/random.hpp"

namespace acid {

// ---------------------------------------------------------------------------
// ReconOperator

Image ReconOperator::forward(const Measurement& p) const {
  model_.check(p);
  Image out = eval(p);
  model_.check(out);
  return out;
}

Measurement ReconOperator::vjp(const Measurement& p, const Image& cotangent) const {
  if (!capabilities().differentiable) {
    throw CapabilityError("operator '" + kind() + "' is not differentiable");
  }
  model_.check(p);
  model_.check(cotangent);
  return eval_vjp(p, cotangent);
}

Measurement ReconOperator::eval_vjp(const Measurement&, const Image&) const {
  throw CapabilityError("operator '" + kind() + "' is not differentiable");
}

// ---------------------------------------------------------------------------
// AdjointRecon

AdjointRecon::AdjointRecon(ForwardModel model) : ReconOperator(std::move(model)) {
  if (const auto* g = this->model().radon_geometry()) {
    kernel_.assign(g->num_detectors, 0.0);
    kernel_[0] = 0.25;
    for (std::size_t n = 1; n < kernel_.size(); n += 2) {
      kernel_[n] = -1.0 / (std::numbers::pi * std::numbers::pi * double(n) * double(n));
    }
    scale_ = std::numbers::pi / double(g->angles.size());
  }
}

Measurement AdjointRecon::filter(const Measurement& p) const {
  const auto* g = model().radon_geometry();
  if (!g) return p;
  const std::size_t nd = g->num_detectors;
  Measurement q = model().zero_measurement();
  for (std::size_t a = 0; a < g->angles.size(); ++a) {
    const double* row = p.data() + a * nd;
    double* out = q.data() + a * nd;
    for (std::size_t i = 0; i < nd; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < nd; ++j) s += kernel_[i > j ? i - j : j - i] * row[j];
      out[i] = s;
    }
  }
  return q;
}

Image AdjointRecon::eval(const Measurement& p) const {
  Image f = model().adjoint(filter(p));
  if (scale_ != 1.0) f *= scale_;
  return f;
}

Measurement AdjointRecon::eval_vjp(const Measurement&, const Image& cotangent) const {
  // The ramp kernel is symmetric, so the filter is self-adjoint.
  Measurement q = filter(model().apply(cotangent));
  if (scale_ != 1.0) q *= scale_;
  return q;
}

ReconPtr build_adjoint_recon(const ForwardModel& model) {
  return std::make_shared<AdjointRecon>(model);
}

Image unfiltered_backprojection(const ForwardModel& model, const Measurement& p) {
  Image f = model.adjoint(p);
  if (const auto* g = model.radon_geometry()) f *= std::numbers::pi / double(g->angles.size());
  return f;
}

// ---------------------------------------------------------------------------
// CallbackRecon / ScaledRecon

CallbackRecon::CallbackRecon(ForwardModel model, std::string name, ForwardFn forward, VjpFn vjp)
    : ReconOperator(std::move(model)),
      name_(std::move(name)),
      forward_(std::move(forward)),
      vjp_(std::move(vjp)) {
  if (!forward_) throw ValidationError("CallbackRecon needs a forward function");
}

ScaledRecon::ScaledRecon(ReconPtr inner, double alpha)
    : ReconOperator(inner->model()), inner_(std::move(inner)), alpha_(alpha) {}

Image ScaledRecon::eval(const Measurement& p) const { return alpha_ * inner_->forward(p); }

Measurement ScaledRecon::eval_vjp(const Measurement& p, const Image& cot) const {
  return alpha_ * inner_->vjp(p, cot);
}

// ---------------------------------------------------------------------------
// AutomapMini

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(const Measurement& p) {
  return {p.data(), Eigen::Index(p.real_size())};
}

Eigen::Map<const Eigen::VectorXd> as_vector(const Image& f) {
  return {f.data(), Eigen::Index(f.size())};
}

void check_automap_size(const ForwardModel& model) {
  if (model.col_count() > AutomapMini::kMaxPixels) {
    throw CapabilityError("AutomapMini supports images up to 64x64");
  }
}

}  // namespace

AutomapMini::AutomapMini(ForwardModel model, std::size_t hidden, std::uint64_t seed,
                         AutomapInit init)
    : ReconOperator(std::move(model)) {
  check_automap_size(this->model());
  if (hidden == 0) throw ValidationError("AutomapMini needs at least one hidden unit");
  const auto d = Eigen::Index(this->model().real_size());
  const auto n = Eigen::Index(this->model().col_count());
  const auto h = Eigen::Index(hidden);
  gain_ = 1.0 / (4.0 * double(n));
  const double g = 1.0 / std::sqrt(gain_);

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols, double sd) {
    Eigen::MatrixXd m(rows, cols);
    // Row-major fill so the draw order does not depend on Eigen's storage.
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = sd * normal(rng);
    return m;
  };

  b1_ = Eigen::VectorXd::Zero(h);
  b2_ = Eigen::VectorXd::Zero(n);
  if (init == AutomapInit::random) {
    w1_ = gaussian(h, d, g / std::sqrt(double(d)));
    w2_ = gaussian(n, h, 1.0 / (g * std::sqrt(double(h))));
    return;
  }

  // Near-linear start: tanh(g * gain * p) ~ p / g, so W2 = g * A^dagger gives
  // Phi ~ A^dagger p. Rows beyond the input size become random features whose
  // output weights start at zero.
  const Eigen::Index k = std::min(h, d);
  w1_ = gaussian(h, d, g * 1e-3 / std::sqrt(double(d)));
  for (Eigen::Index i = 0; i < k; ++i) w1_(i, i) += g;
  if (h > d) w1_.bottomRows(h - d) = gaussian(h - d, d, g / std::sqrt(double(d)));

  AdjointRecon adj(this->model());
  w2_ = Eigen::MatrixXd::Zero(n, h);
  Measurement unit = this->model().zero_measurement();
  for (Eigen::Index i = 0; i < k; ++i) {
    unit[std::size_t(i)] = 1.0;
    const Image col = adj.forward(unit);
    w2_.col(i) = g * as_vector(col);
    unit[std::size_t(i)] = 0.0;
  }
}

AutomapMini::AutomapMini(ForwardModel model, Eigen::MatrixXd w1, Eigen::VectorXd b1,
                         Eigen::MatrixXd w2, Eigen::VectorXd b2, double gain,
                         std::optional<double> amplitude)
    : ReconOperator(std::move(model)),
      w1_(std::move(w1)),
      b1_(std::move(b1)),
      w2_(std::move(w2)),
      b2_(std::move(b2)),
      gain_(gain),
      amplitude_(amplitude) {}

Image AutomapMini::eval(const Measurement& p) const {
  const Eigen::VectorXd hid = ((w1_ * (gain_ * as_vector(p))) + b1_).array().tanh().matrix();
  const Eigen::VectorXd y = w2_ * hid + b2_;
  return Image(model().width(), model().height(), std::vector<double>(y.data(), y.data() + y.size()));
}

Measurement AutomapMini::eval_vjp(const Measurement& p, const Image& cot) const {
  const Eigen::VectorXd hid = ((w1_ * (gain_ * as_vector(p))) + b1_).array().tanh().matrix();
  const Eigen::VectorXd ga = w2_.transpose() * as_vector(cot);
  const Eigen::VectorXd gz = (ga.array() * (1.0 - hid.array().square())).matrix();
  const Eigen::VectorXd gp = gain_ * (w1_.transpose() * gz);
  return Measurement(p.kind(), std::vector<double>(gp.data(), gp.data() + gp.size()));
}

bool AutomapMini::same_parameters(const AutomapMini& other) const {
  return w1_ == other.w1_ && b1_ == other.b1_ && w2_ == other.w2_ && b2_ == other.b2_ &&
         gain_ == other.gain_ && amplitude_ == other.amplitude_;
}

std::shared_ptr<AutomapMini> build_automap_mini(const ForwardModel& model, std::size_t hidden,
                                                std::uint64_t seed, AutomapInit init) {
  return std::make_shared<AutomapMini>(model, hidden, seed, init);
}

// ---------------------------------------------------------------------------
// Training

struct AutomapTrainer {
  static TrainResult run(const AutomapMini& op, const std::vector<TrainingPair>& pairs,
                         std::size_t epochs, double step) {
    if (pairs.empty()) throw ValidationError("training needs at least one pair");
    if (!(step > 0.0)) throw ValidationError("training step must be positive");
    const ForwardModel& model = op.model();
    const auto d = Eigen::Index(model.real_size());
    const auto n = Eigen::Index(model.col_count());
    const auto b = Eigen::Index(pairs.size());

    Eigen::MatrixXd x(d, b), y(n, b);
    double amplitude = 0.0;
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto& pr = pairs[std::size_t(j)];
      model.check(pr.input);
      model.check(pr.target);
      x.col(j) = op.gain_ * as_vector(pr.input);
      y.col(j) = as_vector(pr.target);
      amplitude += max_abs(pr.input);
    }
    amplitude /= double(b);

    Eigen::MatrixXd w1 = op.w1_, w2 = op.w2_;
    Eigen::VectorXd b1 = op.b1_, b2 = op.b2_;
    const double g2 = 1.0 / op.gain_;

    auto hidden_of = [&]() -> Eigen::MatrixXd {
      return ((w1 * x).colwise() + b1).array().tanh().matrix();
    };

    Eigen::MatrixXd hid = hidden_of();
    const double mean_h2 = hid.colwise().squaredNorm().mean();
    const double mean_x2 = x.colwise().squaredNorm().mean();
    const double s_w2 = mean_h2 > 0.0 ? 1.0 / mean_h2 : 1.0;
    const double s_w1 = mean_x2 > 0.0 ? 1.0 / (g2 * mean_x2) : 1.0;
    const double s_b1 = 1.0 / g2;
    const double s_b2 = 1.0;

    TrainingLog log;
    auto record = [&](const Eigen::MatrixXd& out) {
      log.loss.push_back((out - y).squaredNorm() / double(b * n));
      double cons = 0.0;
      for (Eigen::Index j = 0; j < b; ++j) {
        const auto& p = pairs[std::size_t(j)].input;
        Image f(model.width(), model.height(),
                std::vector<double>(out.col(j).data(), out.col(j).data() + n));
        const double pn = l2_norm(p);
        cons += pn > 0.0 ? l2_norm(model.apply(f) - p) / pn : 0.0;
      }
      log.consistency_residual.push_back(cons / double(b));
    };

    for (std::size_t e = 0; e <= epochs; ++e) {
      const Eigen::MatrixXd out = (w2 * hid).colwise() + b2;
      record(out);
      if (e == epochs) break;
      const Eigen::MatrixXd r = (out - y) / double(b);
      const Eigen::MatrixXd gw2 = r * hid.transpose();
      const Eigen::VectorXd gb2 = r.rowwise().sum();
      const Eigen::MatrixXd gz =
          ((w2.transpose() * r).array() * (1.0 - hid.array().square())).matrix();
      const Eigen::MatrixXd gw1 = gz * x.transpose();
      const Eigen::VectorXd gb1 = gz.rowwise().sum();
      w2 -= (step * s_w2) * gw2;
      b2 -= (step * s_b2) * gb2;
      w1 -= (step * s_w1) * gw1;
      b1 -= (step * s_b1) * gb1;
      hid = hidden_of();
    }

    auto trained = std::shared_ptr<AutomapMini>(
        new AutomapMini(model, std::move(w1), std::move(b1), std::move(w2), std::move(b2),
                        op.gain_, epochs == 0 ? op.amplitude_ : std::optional<double>(amplitude)));
    return {std::move(trained), std::move(log)};
  }
};

TrainResult train_automap_mini(const AutomapMini& op, const std::vector<TrainingPair>& pairs,
                               std::size_t epochs, double step) {
  return AutomapTrainer::run(op, pairs, epochs, step);
}

// ---------------------------------------------------------------------------
// Diagnostics

BrenReport bren_ratio(const ReconOperator& op, const ForwardModel& model, const Image& f_star) {
  model.check(f_star);
  if (op.model().row_count() != model.row_count() || op.model().kind() != model.kind()) {
    throw ShapeError("operator and model disagree on the measurement shape");
  }
  const double den = l2_norm(f_star);
  if (!(den > 0.0)) throw ValidationError("bren_ratio needs a nonzero ground truth");
  const double num = l2_norm(op.forward(model.apply(f_star)) - f_star);
  return {num / den, num, den};
}

LipschitzEstimate lipschitz_estimate(const ReconOperator& op, const ForwardModel& model,
                                     const std::vector<Image>& probes,
                                     std::size_t perturbations_per_probe, double scale,
                                     std::uint64_t seed) {
  if (probes.empty()) throw ValidationError("lipschitz_estimate needs probes");
  if (!(scale > 0.0)) throw ValidationError("perturbation scale must be positive");
  LipschitzEstimate est;
  est.perturbation_scale = scale;
  Rng rng(seed);
  for (const Image& f : probes) {
    model.check(f);
    const Image base = op.forward(model.apply(f));
    const double fn = l2_norm(f);
    for (std::size_t k = 0; k < perturbations_per_probe; ++k) {
      Image delta(f.width(), f.height(), gaussian_vector(f.size(), rng));
      delta *= (fn > 0.0 ? scale * fn : scale) / l2_norm(delta);
      const Image moved = f + delta;
      const double den = l2_norm(f - moved);
      const double num = l2_norm(base - op.forward(model.apply(moved)));
      if (den > 0.0) est.lower = std::max(est.lower, num / den);
      ++est.samples;
      est.running_max.push_back(est.lower);
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_doubles(std::ofstream& out, const double* v, std::size_t n) {
  static_assert(std::endian::native == std::endian::little, "blob writer assumes little endian");
  out.write(reinterpret_cast<const char*>(v), std::streamsize(n * sizeof(double)));
}

void write_matrix_row_major(std::ofstream& out, const Eigen::MatrixXd& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_doubles(out, rm.data(), std::size_t(rm.size()));
}

void read_doubles(std::ifstream& in, double* v, std::size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(v), std::streamsize(n * sizeof(double)));
  if (in.gcount() != std::streamsize(n * sizeof(double))) {
    throw ValidationError(path + ": truncated operator blob");
  }
}

Eigen::MatrixXd read_matrix_row_major(std::ifstream& in, Eigen::Index rows, Eigen::Index cols,
                                      const std::string& path) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  read_doubles(in, rm.data(), std::size_t(rm.size()), path);
  return rm;
}

}  // namespace

void AutomapMini::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "RECOP1 automap " << input_size() << ' ' << model().col_count() << ' ' << hidden()
      << '\n';
  const double amp = amplitude_.value_or(std::numeric_limits<double>::quiet_NaN());
  write_doubles(out, &gain_, 1);
  write_doubles(out, &amp, 1);
  write_matrix_row_major(out, w1_);
  write_doubles(out, b1_.data(), std::size_t(b1_.size()));
  write_matrix_row_major(out, w2_);
  write_doubles(out, b2_.data(), std::size_t(b2_.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

struct BlobHeader {
  std::string kind;
  std::size_t m = 0, n = 0, hidden = 0;
};

BlobHeader read_header(std::ifstream& in, const std::string& path) {
  std::string line;
  std::getline(in, line);
  std::istringstream hs(line);
  std::string magic;
  BlobHeader h;
  if (!(hs >> magic >> h.kind >> h.m >> h.n >> h.hidden) || magic != "RECOP1") {
    throw ValidationError(path + ": bad operator blob header");
  }
  return h;
}

void check_header(const BlobHeader& h, const ForwardModel& model, const std::string& path) {
  if (h.m != model.real_size() || h.n != model.col_count()) {
    throw ShapeError(path + ": operator blob does not match the forward model");
  }
}

}  // namespace

AutomapMini AutomapMini::load(const std::filesystem::path& path, const ForwardModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const BlobHeader h = read_header(in, path.string());
  if (h.kind != "automap") throw ValidationError(path.string() + ": not an automap blob");
  check_header(h, model, path.string());
  check_automap_size(model);
  double gain = 0.0, amp = 0.0;
  read_doubles(in, &gain, 1, path.string());
  read_doubles(in, &amp, 1, path.string());
  const auto d = Eigen::Index(h.m), n = Eigen::Index(h.n), hid = Eigen::Index(h.hidden);
  Eigen::MatrixXd w1 = read_matrix_row_major(in, hid, d, path.string());
  Eigen::VectorXd b1(hid);
  read_doubles(in, b1.data(), std::size_t(hid), path.string());
  Eigen::MatrixXd w2 = read_matrix_row_major(in, n, hid, path.string());
  Eigen::VectorXd b2(n);
  read_doubles(in, b2.data(), std::size_t(n), path.string());
  return AutomapMini(model, std::move(w1), std::move(b1), std::move(w2), std::move(b2), gain,
                     std::isnan(amp) ? std::nullopt : std::optional<double>(amp));
}

void save_operator(const std::filesystem::path& path, const ReconOperator& op) {
  if (const auto* net = dynamic_cast<const AutomapMini*>(&op)) {
    net->save(path);
    return;
  }
  if (dynamic_cast<const AdjointRecon*>(&op)) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "RECOP1 adjoint " << op.model().real_size() << ' ' << op.model().col_count()
        << " 0\n";
    return;
  }
  throw CapabilityError("operator '" + op.kind() + "' cannot be serialized");
}

ReconPtr load_operator(const std::filesystem::path& path, const ForwardModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const BlobHeader h = read_header(in, path.string());
  check_header(h, model, path.string());
  if (h.kind == "adjoint") return build_adjoint_recon(model);
  if (h.kind == "automap") return std::make_shared<AutomapMini>(AutomapMini::load(path, model));
  throw ValidationError(path.string() + ": unknown operator kind '" + h.kind + "'");
}

}  // namespace acid
