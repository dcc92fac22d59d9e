// Acceptance run over the standard 64x64 benchmark. Prints one PASS/FAIL line
// per criterion and exits non-zero when any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "acid/acid_engine.hpp"
#include "acid/adversary.hpp"
#include "acid/experiment.hpp"
#include "acid/metrics.hpp"
#include "acid/phantom.hpp"
#include "acid/sparsity.hpp"

using namespace acid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Benchmark ACID settings shared by the criteria that use the trained operator.
AcidConfig preset() {
  AcidConfig c;
  c.lambda = 2.0;
  c.epsilon = 0.03;
  c.iterations = 50;
  c.normalize = true;
  return c;
}

constexpr double kNoiseSigma = 15.0 / 255.0;
constexpr double kBudgetRel = 0.05;

struct Bench {
  fs::path cache;
  ForwardModel model = standard_fourier_model();
  ReconPtr trained;

  const ReconOperator& net() {
    if (!trained) {
      LabSettings s;
      fs::create_directories(cache);
      s.operator_blob = (cache / "automap.blob").string();
      std::cout << "  (loading or training the benchmark operator)" << std::endl;
      trained = obtain_operator(s, model, &std::cout);
    }
    return *trained;
  }
};

Image uniform_image(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Image f(n, n);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = u(rng);
  return f;
}

Image gaussian_image(std::size_t n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0, scale);
  Image f(n, n);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = g(rng);
  return f;
}

Outcome adjoint_exactness(Bench&) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  double worst = 0;
  for (const auto& m : {standard_fourier_model(), standard_radon_model()}) {
    for (int t = 0; t < 100; ++t) {
      const Image f = uniform_image(64, rng);
      Measurement p = m.zero_measurement();
      for (std::size_t i = 0; i < p.real_size(); ++i) p[i] = g(rng);
      const Measurement af = m.apply(f);
      worst = std::max(worst, std::abs(dot(af, p) - dot(f, m.adjoint(p))) / (l2_norm(af) * l2_norm(p)));
    }
  }
  return {worst <= 1e-10, "max relative mismatch " + fmt(worst)};
}

double shrink_oracle(double x, double eps) {
  if (x >= eps) return x - eps;
  if (x <= -eps) return x + eps;
  return 0.0;
}

double pinv_oracle(double a, double b, double eps) {
  if (a - b > eps) return a - eps / 2;
  if (b - a > eps) return a + eps / 2;
  return (a + b) / 2;
}

Outcome threshold_oracle(Bench&) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2), e(1e-6, 1.5);
  std::size_t mismatches = 0;
  for (int t = 0; t < 100000; ++t) {
    const double x = u(rng), a = u(rng), b = u(rng), eps = e(rng);
    mismatches += soft_threshold(x, eps) != shrink_oracle(x, eps);
    mismatches += soft_threshold_pinv(a, b, eps) != pinv_oracle(a, b, eps);
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1e5 tuples"};
}

Outcome exact_inverse(Bench&) {
  const auto m = ForwardModel::fourier(make_mask(MaskPattern::full, 1.0, 64, 64, 0));
  const Image f = standard_phantom(0);
  AcidConfig cfg;
  cfg.epsilon = 1e-12;
  cfg.iterations = 1;
  const double v = psnr(f, acid_run(m.apply(f), m, *build_adjoint_recon(m), cfg).image, 1.0);
  return {v >= 120.0, "PSNR after one iteration " + fmt(v) + " dB"};
}

Outcome contraction(Bench& b) {
  const Image f = standard_phantom(0);
  bool ok = true;
  std::string detail;
  for (double sigma : {0.2, 0.5, 0.8}) {
    AcidConfig cfg;
    cfg.lambda = 0.76;
    cfg.mu = 0.0;
    cfg.epsilon = 1e-3;
    cfg.iterations = 100;
    const auto rep = contraction_probe(sigma, b.model, f, cfg);
    const double bound = 1 - sigma / (1 + cfg.lambda) + 0.05;
    // The bound is on the observable part of the operator's own error at the
    // last iterate; the image-space error is reported alongside.
    const double terminal = rep.network_observable_error.back();
    ok = ok && rep.fitted_rate <= bound && terminal <= rep.terminal_bound;
    detail += "sigma " + fmt(sigma) + ": rate " + fmt(rep.fitted_rate) + " <= " + fmt(bound) +
              ", terminal " + fmt(terminal) + " <= " + fmt(rep.terminal_bound) +
              " (image observable error " + fmt(rep.observable_error.back()) + "); ";
  }
  return {ok, detail};
}

Outcome monotone_convergence(Bench& b) {
  const Image f = standard_phantom(0);
  const Measurement p = b.model.apply(f);
  const auto res = acid_run(p, b.model, b.net(), preset());
  const auto& r = res.history.records;
  bool monotone = true;
  for (std::size_t k = 3; k < r.size(); ++k) monotone = monotone && r[k].residual_norm <= r[k - 1].residual_norm;
  const double acid = psnr(f, res.image, 1.0);
  const double zf = psnr(f, build_adjoint_recon(b.model)->forward(p), 1.0);
  return {monotone && acid - zf >= 3.0,
          std::string("residual ") + (monotone ? "non-increasing" : "increases") +
              " from iteration 3; ACID " + fmt(acid) + " dB vs zero-filled " + fmt(zf) +
              " dB (gain " + fmt(acid - zf) + ")"};
}

Outcome ablation(Bench& b) {
  std::vector<double> full, ni, ndl, ncs;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image f = standard_phantom(s);
    const Measurement p = b.model.apply(add_noise(f, kNoiseSigma, 100 + s));
    auto run = [&](AcidVariant v) { return psnr(f, acid_ablate(v, p, b.model, b.net(), preset()).image, 1.0); };
    full.push_back(run(AcidVariant::full));
    ni.push_back(run(AcidVariant::NI));
    ndl.push_back(run(AcidVariant::NDL));
    ncs.push_back(run(AcidVariant::NCS));
  }
  const double mf = median(full), best = std::max({median(ni), median(ndl), median(ncs)});
  return {mf >= best, "median PSNR full " + fmt(mf) + ", NI " + fmt(median(ni)) + ", NDL " +
                          fmt(median(ndl)) + ", NCS " + fmt(median(ncs))};
}

Outcome more_data(Bench&) {
  const Image f = standard_phantom(0);
  SweepSpec spec{f, 1.0, preset(), {}, {}, {}};
  spec.make_model = [](double rate) {
    return ForwardModel::fourier(make_mask(MaskPattern::gaussian2d, rate, 64, 64, 7));
  };
  spec.measure = [&](const ForwardModel& m) { return m.apply(f); };
  spec.make_operator = [](const ForwardModel& m) { return build_adjoint_recon(m); };
  const auto rows = data_sweep({0.1, 0.5}, spec);
  return {rows[1].psnr >= rows[0].psnr,
          "ACID PSNR at 10% " + fmt(rows[0].psnr) + " dB, at 50% " + fmt(rows[1].psnr) + " dB"};
}

std::vector<int> pair_branches(const Image& h, double eps, bool normalize) {
  Image g = h;
  if (normalize) {
    const double lo = min_value(h), hi = max_value(h);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (h[i] - lo) / (hi - lo);
  }
  std::vector<int> sig;
  auto cls = [&](double a, double b) { return a - b > eps ? 1 : (b - a > eps ? -1 : 0); };
  for (std::size_t r = 0; r < g.height(); ++r) {
    for (std::size_t c = 0; c < g.width(); ++c) {
      if (c + 1 < g.width()) sig.push_back(cls(g(r, c), g(r, c + 1)));
      if (r + 1 < g.height()) sig.push_back(cls(g(r, c), g(r + 1, c)));
    }
  }
  if (normalize) {
    const auto v = h.values();
    sig.push_back(int(std::min_element(v.begin(), v.end()) - v.begin()));
    sig.push_back(int(std::max_element(v.begin(), v.end()) - v.begin()));
  }
  return sig;
}

// Every discrete choice of the pipeline: threshold branches and normalization
// extremes. A probe is kept only when the signature is constant across it.
std::vector<int> branch_signature(const ReconOperator& op, const ForwardModel& m, const Image& f,
                                  const Image& e, const AcidConfig& cfg) {
  AcidTape tape;
  acid_run_recorded(AcidVariant::full, m.apply(f + e), m, op, cfg, tape);
  std::vector<int> sig;
  for (const auto& h : tape.sparsify_inputs) {
    const auto s = pair_branches(h, cfg.epsilon, cfg.normalize);
    sig.insert(sig.end(), s.begin(), s.end());
  }
  if (cfg.normalize) {
    for (const auto& q : tape.phi_inputs) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < q.real_size(); ++i) {
        if (std::abs(q[i]) > std::abs(q[best])) best = i;
      }
      sig.push_back(int(best));
    }
  }
  return sig;
}

template <class F>
double central_difference(F&& fn, const Image& x, const Image& d, double h) {
  Image a = x, b = x;
  a.axpy(h, d);
  b.axpy(-h, d);
  return (fn(a) - fn(b)) / (2 * h);
}

Outcome gradient_check(Bench& b) {
  std::mt19937_64 rng(8);
  const Image f = standard_phantom(0);
  double worst_net = 0;
  for (int t = 0; t < 20; ++t) {
    const Image e = gaussian_image(64, rng, 0.01), d = gaussian_image(64, rng, 1.0);
    auto fn = [&](const Image& x) { return attack_objective(b.net(), b.model, f, x, 0.1); };
    const double fd = central_difference(fn, e, d, 1e-5);
    const double an = dot(attack_gradient(b.net(), b.model, f, e, 0.1), d);
    worst_net = std::max(worst_net, std::abs(an - fd) / std::abs(fd));
  }

  const auto small = ForwardModel::fourier(make_mask(MaskPattern::gaussian2d, 0.3, 8, 8, 7));
  const auto op = build_automap_mini(small, 32, 21, AutomapInit::random);
  const Image g = make_phantom(random_phantom_spec(3, 5), 8, 8);
  AcidConfig cfg = preset();
  cfg.iterations = 3;
  double worst_acid = 0;
  int kept = 0, tried = 0;
  for (; kept < 20 && tried < 400; ++tried) {
    const Image e = gaussian_image(8, rng, 0.05), d = gaussian_image(8, rng, 1.0);
    const double h = 1e-6;
    Image ep = e, em = e;
    ep.axpy(h, d);
    em.axpy(-h, d);
    const auto sig = branch_signature(*op, small, g, e, cfg);
    if (sig != branch_signature(*op, small, g, ep, cfg) || sig != branch_signature(*op, small, g, em, cfg)) {
      continue;
    }
    auto fn = [&](const Image& x) { return acid_attack_objective(*op, small, g, x, cfg, 0.1); };
    const double fd = central_difference(fn, e, d, h);
    const double an = dot(acid_attack_gradient(*op, small, g, e, cfg, 0.1), d);
    worst_acid = std::max(worst_acid, std::abs(an - fd) / std::abs(fd));
    ++kept;
  }
  return {worst_net <= 1e-4 && kept == 20 && worst_acid <= 5e-3,
          "network max rel error " + fmt(worst_net) + " over 20 probes; pipeline max rel error " +
              fmt(worst_acid) + " over " + std::to_string(kept) + " kink-free probes"};
}

Outcome stabilization(Bench& b) {
  std::vector<double> dnet, dacid, dwhole;
  const AcidConfig cfg = preset();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Image f = standard_phantom(s);
    const Measurement p = b.model.apply(f);
    AttackConfig ac;
    ac.norm_budget = kBudgetRel * l2_norm(f);
    const auto net_attack = attack_network(b.net(), b.model, f, ac, 500 + s);
    const Measurement pe = p + b.model.apply(net_attack.perturbation);
    const double base_net = psnr(f, b.net().forward(p), 1.0);
    const double base_acid = psnr(f, acid_run(p, b.model, b.net(), cfg).image, 1.0);
    dnet.push_back(base_net - psnr(f, b.net().forward(pe), 1.0));
    dacid.push_back(base_acid - psnr(f, acid_run(pe, b.model, b.net(), cfg).image, 1.0));
    const auto whole = attack_acid(b.net(), b.model, f, cfg, ac, 500 + s);
    dwhole.push_back(base_acid -
                     psnr(f, acid_run(p + b.model.apply(whole.perturbation), b.model, b.net(), cfg).image, 1.0));
    std::cout << "  seed " << s << ": delta_net " << fmt(dnet.back()) << ", delta_acid "
              << fmt(dacid.back()) << ", whole-pipeline attack " << fmt(dwhole.back()) << std::endl;
  }
  const double n = median(dnet), a = median(dacid), w = median(dwhole);
  return {a < n && w < n, "median delta_net " + fmt(n) + " dB, delta_acid " + fmt(a) +
                              " dB, whole-pipeline attack " + fmt(w) + " dB"};
}

Outcome bren(Bench& b) {
  const auto full = ForwardModel::fourier(make_mask(MaskPattern::full, 1.0, 64, 64, 0));
  const Image f = standard_phantom(0);
  const auto exact = build_adjoint_recon(full);
  CallbackRecon zero(full, "zero", [&](const Measurement&) { return full.zero_image(); });
  // Exact inverse plus 0.3 times a cyclic shift of it: the shift preserves the
  // norm, so the relative error is exactly 0.3.
  CallbackRecon artifact(full, "artifact", [&](const Measurement& p) {
    const Image u = exact->forward(p);
    Image out = u;
    for (std::size_t r = 0; r < 64; ++r) {
      for (std::size_t c = 0; c < 64; ++c) out(r, c) += 0.3 * u((r + 5) % 64, (c + 11) % 64);
    }
    return out;
  });
  const double r0 = bren_ratio(*exact, full, f).ratio;
  const double r1 = bren_ratio(zero, full, f).ratio;
  const double r3 = bren_ratio(artifact, full, f).ratio;
  double held = 0;
  for (std::uint64_t i = 0; i < 10; ++i) held += bren_ratio(b.net(), b.model, standard_phantom(90000 + i)).ratio / 10;
  const bool ok = r0 <= 1e-10 && std::abs(r1 - 1) <= 1e-12 && std::abs(r3 - 0.3) <= 1e-10 && held < 1;
  return {ok, "exact " + fmt(r0) + ", zero " + fmt(r1) + ", artifact " + fmt(r3) +
                  ", trained held-out mean " + fmt(held)};
}

std::string small_config(const std::string& protocol) {
  return "protocol = " + protocol +
         "\nseed = 3\nsize = 16\nphantom_count = 4\nmask_rate = 0.4\ntrain_count = 8\n"
         "train_epochs = 5\niterations = 4\nepsilon = 0.02\nmax_iters = 3\nattack_seeds = 2\n"
         "norm_budget_rel = 0.05\nstability_draws = 5\nsweep_values = 0.1, 0.3, 0.5\n"
         "contraction_sigmas = 0.5\n";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome reproducibility(Bench& b) {
  std::size_t csvs = 0;
  std::vector<std::string> bad;
  for (const std::string protocol : {"phantom", "forward", "reconstruct", "ablate", "sweep", "attack-net",
                                     "attack-acid", "contraction", "noise-stability"}) {
    const fs::path first = b.cache / "repro" / (protocol + "_a");
    const fs::path second = b.cache / "repro" / (protocol + "_b");
    fs::remove_all(first);
    fs::remove_all(second);
    const auto settings = LabSettings::from_config(Config::parse(small_config(protocol), {"ellipse", "artifact"}));
    const auto man = run_experiment(settings, first);
    run_experiment(first / "manifest.txt", second);
    for (const auto& a : man.artifacts) {
      if (a.extension() != ".csv") continue;
      ++csvs;
      if (slurp(first / a) != slurp(second / a)) bad.push_back(protocol + "/" + a.string());
    }
  }
  std::string detail = std::to_string(csvs) + " CSVs over 9 protocols, " +
                       std::to_string(bad.size()) + " differ";
  for (const auto& x : bad) detail += " " + x;
  return {bad.empty() && csvs > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria on the standard benchmark"};
  std::string cache = "acceptance_cache";
  std::vector<int> only;
  app.add_option("--cache", cache, "directory for the trained operator and scratch runs");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  Bench bench;
  bench.cache = cache;
  const std::vector<std::pair<std::string, std::function<Outcome(Bench&)>>> criteria{
      {"adjoint exactness", adjoint_exactness},
      {"threshold oracle equivalence", threshold_oracle},
      {"exact-inverse fixed point", exact_inverse},
      {"contraction", contraction},
      {"convergence monotonicity", monotone_convergence},
      {"ablation ordering", ablation},
      {"more-data trend", more_data},
      {"attack-gradient correctness", gradient_check},
      {"stabilization", stabilization},
      {"BREN diagnostics", bren},
      {"reproducibility", reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(bench);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first
              << ": " << o.detail << " [" << fmt(secs) << " s]" << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
