#include "acid/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "acid/errors.hpp"
#include "acid/grid_io.hpp"
#include "acid/metrics.hpp"
#include "acid/random.hpp"

namespace acid {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kProtocols{"phantom",     "forward",     "reconstruct",
                                       "ablate",      "sweep",       "attack-net",
                                       "attack-acid", "contraction", "noise-stability"};

const std::set<std::string> kRepeatable{"ellipse", "artifact"};

std::string num(double v) { return format_number(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }
std::string num(std::size_t v, int) { return std::to_string(v); }

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_number(v[i]);
  return out;
}

std::size_t get_size(const Config& c, const std::string& key, std::size_t fallback) {
  const auto v = c.get_int(key, std::int64_t(fallback));
  if (v < 0) c.fail(key, "must be non-negative");
  return std::size_t(v);
}

void require(bool ok, const Config& c, const std::string& key, const std::string& msg) {
  if (!ok) c.fail(key, msg);
}

}  // namespace

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "protocol", "seed", "size", "ellipse", "phantom_count", "phantom_seed", "phantom_normalize",
      "insert_text", "insert_row", "insert_col", "insert_scale", "insert_intensity", "model",
      "mask_pattern", "mask_rate", "mask_seed", "views", "full_views", "noise_sigma",
      "noise_seed", "peak", "operator", "hidden", "op_seed", "train_count", "train_seed",
      "train_epochs", "train_step", "train_noise_sigma", "operator_blob", "lambda", "epsilon",
      "iterations", "normalize", "mu", "early_exit_tolerance", "snapshot_every", "gamma",
      "attack_step", "momentum", "max_iters", "norm_budget", "norm_budget_rel", "attack_seed",
      "attack_seeds", "attack_acid_iterations", "sweep_values", "sweep_operator",
      "contraction_sigmas", "stability_draws", "stability_sigma", "stability_bins",
      "stability_seed", "experiment_id", "status", "error", "artifact"};
  return keys;
}

LabSettings LabSettings::from_config(const Config& c) {
  c.require_known(known_config_keys());
  LabSettings s;
  s.protocol = c.get_string("protocol", s.protocol);
  require(kProtocols.count(s.protocol) > 0, c, "protocol", "unknown protocol '" + s.protocol + "'");
  s.seed = c.get_uint("seed", s.seed);

  s.size = get_size(c, "size", s.size);
  require(s.size >= 2, c, "size", "must be at least 2");
  for (const auto* e : c.find_all("ellipse")) {
    std::vector<double> v;
    try {
      v = parse_number_list(e->value);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(std::string("key 'ellipse': ") + ex.what(), e->line, e->column);
    }
    if (v.size() != 6) {
      throw ConfigError("key 'ellipse': expected 'cx cy ax ay rotation intensity'", e->line,
                        e->column);
    }
    if (!(v[2] > 0.0) || !(v[3] > 0.0)) {
      throw ConfigError("key 'ellipse': axes must be positive", e->line, e->column);
    }
    s.ellipses.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
  }
  s.phantom_count = get_size(c, "phantom_count", s.phantom_count);
  s.phantom_seed = c.get_uint("phantom_seed", s.phantom_seed);
  s.phantom_normalize = c.get_bool("phantom_normalize", s.phantom_normalize);
  s.insert_text = c.get_string("insert_text", s.insert_text);
  s.insert_row = get_size(c, "insert_row", s.insert_row);
  s.insert_col = get_size(c, "insert_col", s.insert_col);
  s.insert_scale = get_size(c, "insert_scale", s.insert_scale);
  require(s.insert_scale >= 1, c, "insert_scale", "must be at least 1");
  s.insert_intensity = c.get_double("insert_intensity", s.insert_intensity);
  if (!s.insert_text.empty()) {
    Glyph g;
    try {
      g = text_glyph(s.insert_text, s.insert_scale);
    } catch (const ValidationError& e) {
      c.fail("insert_text", e.what());
    }
    require(s.insert_row + g.height <= s.size && s.insert_col + g.width <= s.size, c,
            "insert_text", "insert does not fit inside the image");
  }

  s.model = c.get_string("model", s.model);
  require(s.model == "fourier" || s.model == "radon", c, "model", "must be fourier or radon");
  try {
    s.mask_pattern = parse_mask_pattern(c.get_string("mask_pattern", to_string(s.mask_pattern)));
  } catch (const ValidationError& e) {
    c.fail("mask_pattern", e.what());
  }
  require(s.mask_pattern != MaskPattern::custom, c, "mask_pattern", "custom masks cannot be generated");
  s.mask_rate = c.get_double("mask_rate", s.mask_rate);
  require(s.mask_rate > 0.0 && s.mask_rate <= 1.0, c, "mask_rate", "must lie in (0, 1]");
  s.mask_seed = c.get_uint("mask_seed", s.mask_seed);
  s.views = get_size(c, "views", s.views);
  require(s.views >= 1, c, "views", "must be at least 1");
  s.full_views = get_size(c, "full_views", std::max<std::size_t>(s.views, 1000));
  require(s.full_views >= s.views, c, "full_views", "must be at least views");

  s.noise_sigma = c.get_double("noise_sigma", s.noise_sigma);
  require(s.noise_sigma >= 0.0, c, "noise_sigma", "must be non-negative");
  s.noise_seed = c.get_uint("noise_seed", s.seed);
  s.peak = c.get_double("peak", s.peak);
  require(s.peak > 0.0, c, "peak", "must be positive");

  s.op = c.get_string("operator", s.op);
  require(s.op == "automap" || s.op == "adjoint", c, "operator", "must be automap or adjoint");
  s.hidden = get_size(c, "hidden", s.hidden);
  s.op_seed = c.get_uint("op_seed", s.op_seed);
  s.train_count = get_size(c, "train_count", s.train_count);
  require(s.train_count >= 1, c, "train_count", "must be at least 1");
  s.train_seed = c.get_uint("train_seed", s.train_seed);
  s.train_epochs = get_size(c, "train_epochs", s.train_epochs);
  s.train_step = c.get_double("train_step", s.train_step);
  require(s.train_step > 0.0, c, "train_step", "must be positive");
  s.train_noise_sigma = c.get_double("train_noise_sigma", s.train_noise_sigma);
  require(s.train_noise_sigma >= 0.0, c, "train_noise_sigma", "must be non-negative");
  s.operator_blob = c.get_string("operator_blob", s.operator_blob);

  s.acid.lambda = c.get_double("lambda", s.acid.lambda);
  require(s.acid.lambda > 0.0, c, "lambda", "must be positive");
  s.acid.epsilon = c.get_double("epsilon", s.acid.epsilon);
  require(s.acid.epsilon > 0.0, c, "epsilon", "must be positive");
  s.acid.iterations = int(c.get_int("iterations", s.acid.iterations));
  require(s.acid.iterations >= 1, c, "iterations", "must be at least 1");
  s.acid.normalize = c.get_bool("normalize", s.acid.normalize);
  s.acid.mu = c.get_double("mu", s.acid.mu);
  require(s.acid.mu >= 0.0, c, "mu", "must be non-negative");
  s.acid.early_exit_tolerance = c.get_optional_double("early_exit_tolerance");
  s.snapshot_every = int(c.get_int("snapshot_every", s.snapshot_every));
  require(s.snapshot_every >= 0, c, "snapshot_every", "must be non-negative");

  s.attack.gamma = c.get_double("gamma", s.attack.gamma);
  require(s.attack.gamma >= 0.0, c, "gamma", "must be non-negative");
  s.attack.step = c.get_double("attack_step", s.attack.step);
  require(s.attack.step > 0.0, c, "attack_step", "must be positive");
  s.attack.momentum = c.get_double("momentum", s.attack.momentum);
  require(s.attack.momentum >= 0.0 && s.attack.momentum < 1.0, c, "momentum", "must lie in [0, 1)");
  s.attack.max_iters = int(c.get_int("max_iters", s.attack.max_iters));
  require(s.attack.max_iters >= 0, c, "max_iters", "must be non-negative");
  s.attack.norm_budget = c.get_optional_double("norm_budget");
  if (s.attack.norm_budget) require(*s.attack.norm_budget > 0.0, c, "norm_budget", "must be positive");
  s.norm_budget_rel = c.get_optional_double("norm_budget_rel");
  if (s.norm_budget_rel) require(*s.norm_budget_rel > 0.0, c, "norm_budget_rel", "must be positive");
  s.attack_seed = c.get_uint("attack_seed", s.seed);
  s.attack_seeds = get_size(c, "attack_seeds", s.attack_seeds);
  require(s.attack_seeds >= 1, c, "attack_seeds", "must be at least 1");
  s.attack_acid_iterations = int(c.get_int("attack_acid_iterations", s.attack_acid_iterations));
  require(s.attack_acid_iterations >= 0, c, "attack_acid_iterations", "must be non-negative");

  const std::vector<double> default_sweep =
      s.model == "fourier" ? std::vector<double>{0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5}
                           : std::vector<double>{10, 20, 30, 50, 60, 75, 100, 150, 300};
  s.sweep_values = c.get_list("sweep_values", default_sweep);
  require(std::is_sorted(s.sweep_values.begin(), s.sweep_values.end()), c, "sweep_values",
          "must be sorted ascending");
  s.sweep_operator = c.get_string("sweep_operator", s.sweep_operator);
  require(s.sweep_operator == "automap" || s.sweep_operator == "adjoint", c, "sweep_operator",
          "must be automap or adjoint");

  s.contraction_sigmas = c.get_list("contraction_sigmas", s.contraction_sigmas);
  for (double sg : s.contraction_sigmas) {
    require(sg > 0.0 && sg <= 1.0, c, "contraction_sigmas", "values must lie in (0, 1]");
  }

  s.stability_draws = get_size(c, "stability_draws", s.stability_draws);
  require(s.stability_draws >= 1, c, "stability_draws", "must be at least 1");
  s.stability_sigma = c.get_double("stability_sigma", s.stability_sigma);
  require(s.stability_sigma > 0.0, c, "stability_sigma", "must be positive");
  s.stability_bins = get_size(c, "stability_bins", s.stability_bins);
  require(s.stability_bins >= 1, c, "stability_bins", "must be at least 1");
  s.stability_seed = c.get_uint("stability_seed", s.seed);
  return s;
}

Config LabSettings::to_config() const {
  Config c;
  c.add("protocol", protocol);
  c.add("seed", num(seed));
  c.add("size", num(size, 0));
  for (const auto& e : ellipses) {
    c.add("ellipse", join({e.cx, e.cy, e.ax, e.ay, e.rotation, e.intensity}));
  }
  c.add("phantom_count", num(phantom_count, 0));
  c.add("phantom_seed", num(phantom_seed));
  c.add("phantom_normalize", phantom_normalize ? "true" : "false");
  if (!insert_text.empty()) c.add("insert_text", insert_text);
  c.add("insert_row", num(insert_row, 0));
  c.add("insert_col", num(insert_col, 0));
  c.add("insert_scale", num(insert_scale, 0));
  c.add("insert_intensity", num(insert_intensity));
  c.add("model", model);
  c.add("mask_pattern", to_string(mask_pattern));
  c.add("mask_rate", num(mask_rate));
  c.add("mask_seed", num(mask_seed));
  c.add("views", num(views, 0));
  c.add("full_views", num(full_views, 0));
  c.add("noise_sigma", num(noise_sigma));
  c.add("noise_seed", num(noise_seed));
  c.add("peak", num(peak));
  c.add("operator", op);
  c.add("hidden", num(hidden, 0));
  c.add("op_seed", num(op_seed));
  c.add("train_count", num(train_count, 0));
  c.add("train_seed", num(train_seed));
  c.add("train_epochs", num(train_epochs, 0));
  c.add("train_step", num(train_step));
  c.add("train_noise_sigma", num(train_noise_sigma));
  if (!operator_blob.empty()) c.add("operator_blob", operator_blob);
  c.add("lambda", num(acid.lambda));
  c.add("epsilon", num(acid.epsilon));
  c.add("iterations", std::to_string(acid.iterations));
  c.add("normalize", acid.normalize ? "true" : "false");
  c.add("mu", num(acid.mu));
  if (acid.early_exit_tolerance) c.add("early_exit_tolerance", num(*acid.early_exit_tolerance));
  c.add("snapshot_every", std::to_string(snapshot_every));
  c.add("gamma", num(attack.gamma));
  c.add("attack_step", num(attack.step));
  c.add("momentum", num(attack.momentum));
  c.add("max_iters", std::to_string(attack.max_iters));
  if (attack.norm_budget) c.add("norm_budget", num(*attack.norm_budget));
  if (norm_budget_rel) c.add("norm_budget_rel", num(*norm_budget_rel));
  c.add("attack_seed", num(attack_seed));
  c.add("attack_seeds", num(attack_seeds, 0));
  c.add("attack_acid_iterations", std::to_string(attack_acid_iterations));
  c.add("sweep_values", join(sweep_values));
  c.add("sweep_operator", sweep_operator);
  c.add("contraction_sigmas", join(contraction_sigmas));
  c.add("stability_draws", num(stability_draws, 0));
  c.add("stability_sigma", num(stability_sigma));
  c.add("stability_bins", num(stability_bins, 0));
  c.add("stability_seed", num(stability_seed));
  return c;
}

// ---------------------------------------------------------------------------
// benchmark builders

Image standard_phantom(std::uint64_t seed, std::size_t size) {
  Image f = make_phantom(random_phantom_spec(8, seed), size, size);
  const double m = max_value(f);
  if (m > 0.0) f *= 1.0 / m;
  return f;
}

ForwardModel standard_fourier_model(std::size_t size) {
  return ForwardModel::fourier(make_mask(MaskPattern::gaussian2d, 0.3, size, size, 7));
}

ForwardModel standard_radon_model(std::size_t size) {
  return ForwardModel::radon(RadonGeometry::uniform(size, 40));
}

Image build_phantom(const LabSettings& s) {
  Image f(s.size, s.size);
  if (!s.ellipses.empty()) {
    EllipsePhantomSpec spec;
    spec.ellipses = s.ellipses;
    f = make_phantom(spec, s.size, s.size);
  } else {
    f = make_phantom(random_phantom_spec(s.phantom_count, s.phantom_seed), s.size, s.size);
  }
  if (s.phantom_normalize) {
    const double m = max_value(f);
    if (m > 0.0) f *= 1.0 / m;
  }
  if (!s.insert_text.empty()) {
    f = insert_structure(f, {text_glyph(s.insert_text, s.insert_scale), s.insert_row,
                             s.insert_col, s.insert_intensity});
  }
  return f;
}

ForwardModel build_model(const LabSettings& s) {
  if (s.model == "radon") return ForwardModel::radon(select_views(s.full_views, s.views, s.size));
  return ForwardModel::fourier(make_mask(s.mask_pattern, s.mask_rate, s.size, s.size, s.mask_seed));
}

ForwardModel build_sweep_model(const LabSettings& s, double value) {
  LabSettings t = s;
  if (s.model == "radon") {
    if (value < 1.0 || value != std::floor(value)) {
      throw ValidationError("radon sweep values must be view counts");
    }
    t.views = std::size_t(value);
    t.full_views = std::max(t.full_views, t.views);
  } else {
    t.mask_rate = value;
  }
  return build_model(t);
}

Measurement measure(const LabSettings& s, const ForwardModel& model, const Image& f) {
  return model.apply(add_noise(f, s.noise_sigma, s.noise_seed));
}

std::vector<TrainingPair> make_training_pairs(const ForwardModel& model, std::size_t count,
                                              std::uint64_t seed, double noise_sigma,
                                              std::size_t size) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Image f = standard_phantom(seed + i, size);
    const Image noisy = add_noise(f, noise_sigma, derive_seed(seed, i));
    pairs.push_back({model.apply(noisy), f});
  }
  return pairs;
}

namespace {

std::string operator_signature(const LabSettings& s, const ForwardModel& model,
                               std::size_t hidden) {
  std::ostringstream os;
  os << "model " << model.describe() << '\n'
     << "hidden " << hidden << '\n'
     << "op_seed " << s.op_seed << '\n'
     << "train_count " << s.train_count << '\n'
     << "train_seed " << s.train_seed << '\n'
     << "train_epochs " << s.train_epochs << '\n'
     << "train_step " << format_number(s.train_step) << '\n'
     << "train_noise_sigma " << format_number(s.train_noise_sigma) << '\n';
  return os.str();
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ReconPtr obtain_operator(const LabSettings& s, const ForwardModel& model, std::ostream* log) {
  if (s.op == "adjoint") return build_adjoint_recon(model);
  const std::size_t hidden = s.hidden ? s.hidden : model.real_size();
  const std::string sig = operator_signature(s, model, hidden);
  const fs::path blob = s.operator_blob;
  const fs::path meta = blob.empty() ? fs::path() : fs::path(blob.string() + ".meta");
  if (!blob.empty() && fs::exists(blob) && fs::exists(meta) && read_text(meta) == sig) {
    if (log) *log << "loading operator " << blob.string() << '\n';
    return load_operator(blob, model);
  }
  if (log) {
    *log << "training AutomapMini (hidden " << hidden << ", " << s.train_count << " pairs, "
         << s.train_epochs << " epochs)\n";
  }
  const auto init = build_automap_mini(model, hidden, s.op_seed);
  const auto pairs =
      make_training_pairs(model, s.train_count, s.train_seed, s.train_noise_sigma, s.size);
  TrainResult res = train_automap_mini(*init, pairs, s.train_epochs, s.train_step);
  if (log) {
    *log << "training loss " << res.log.loss.front() << " -> " << res.log.loss.back()
         << ", consistency residual " << res.log.consistency_residual.back() << '\n';
  }
  if (!blob.empty()) {
    if (blob.has_parent_path()) fs::create_directories(blob.parent_path());
    res.op->save(blob);
    std::ofstream(meta, std::ios::trunc) << sig;
  }
  return res.op;
}

// ---------------------------------------------------------------------------
// manifest

void RunManifest::write(const fs::path& path) const {
  Config c = settings.to_config();
  c.add("experiment_id", experiment_id);
  c.add("status", status);
  for (const auto& a : artifacts) c.add("artifact", a.generic_string());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << "# acidlab run manifest; rerun with: acidlab " << protocol << " --config <this file>\n"
      << c.serialize();
}

namespace {

std::string experiment_id(const LabSettings& s) {
  const std::string text = s.to_config().serialize();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return s.protocol + "-" + buf;
}

class Run {
 public:
  Run(const LabSettings& s, fs::path dir, std::ostream* log)
      : s_(s), dir_(std::move(dir)), log_(log) {
    fs::create_directories(dir_);
    manifest_.settings = s;
    manifest_.protocol = s.protocol;
    manifest_.experiment_id = experiment_id(s);
  }

  const LabSettings& s() const { return s_; }
  std::ostream* log() const { return log_; }
  fs::path path(const std::string& name) const { return dir_ / name; }
  void note(const std::string& name) { manifest_.artifacts.emplace_back(name); }

  void image(const std::string& stem, const Image& f, double lo, double hi) {
    write_f64grid(path(stem + ".f64"), f);
    note(stem + ".f64");
    write_pgm(path(stem + ".pgm"), f, lo, hi);
    note(stem + ".pgm");
  }
  void image(const std::string& stem, const Image& f) { image(stem, f, 0.0, s_.peak); }

  // Writes a CSV from a header and rows of preformatted cells.
  void csv(const std::string& name, const std::string& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path(name), std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path(name).string());
    out << header << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << '\n';
    }
    note(name);
  }

  void history(const std::string& name, const AcidHistory& h) {
    write_history_csv(path(name), h);
    note(name);
  }

  RunManifest finish(const std::string& status) {
    manifest_.status = status;
    manifest_.artifacts.emplace_back("manifest.txt");
    manifest_.write(path("manifest.txt"));
    return manifest_;
  }

 private:
  LabSettings s_;
  fs::path dir_;
  std::ostream* log_;
  RunManifest manifest_;
};

std::vector<std::string> metric_row(const std::string& label, const Image& gt, const Image& f,
                                    double peak) {
  const MetricsReport m = compare(gt, f, peak);
  return {label, num(m.psnr), num(m.ssim), num(m.l2_error)};
}

double symmetric_window(const Image& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m > 0.0 ? m : 1.0;
}

void run_phantom(Run& run) {
  run.image("phantom", build_phantom(run.s()));
}

void run_forward(Run& run) {
  const Image f = build_phantom(run.s());
  const ForwardModel model = build_model(run.s());
  const Measurement p = measure(run.s(), model, f);
  std::vector<std::vector<std::string>> rows;
  if (model.kind() == MeasurementKind::fourier) {
    for (std::size_t i = 0; i < p.length(); ++i) {
      rows.push_back({std::to_string(i), num(p[2 * i]), num(p[2 * i + 1])});
    }
    run.csv("measurement.csv", "index,re,im", rows);
    const auto* mask = model.fourier_mask();
    std::vector<double> grid(mask->grid.begin(), mask->grid.end());
    write_f64grid(run.path("mask.f64"), mask->width, mask->height, grid);
    run.note("mask.f64");
  } else {
    const auto* g = model.radon_geometry();
    for (std::size_t a = 0; a < g->angles.size(); ++a) {
      for (std::size_t d = 0; d < g->num_detectors; ++d) {
        rows.push_back({std::to_string(a), std::to_string(d), num(g->angles[a]),
                        num(p[a * g->num_detectors + d])});
      }
    }
    run.csv("measurement.csv", "angle_index,detector,angle,value", rows);
  }
  run.image("phantom", f);
}

void run_reconstruct(Run& run) {
  const LabSettings& s = run.s();
  const Image f = build_phantom(s);
  const ForwardModel model = build_model(s);
  const Measurement p0 = measure(s, model, f);
  const ReconPtr op = obtain_operator(s, model, run.log());
  const Image zf = build_adjoint_recon(model)->forward(p0);
  const Image direct = op->forward(p0);
  AcidMonitor mon;
  mon.ground_truth = f;
  mon.peak = s.peak;
  mon.snapshot_every = s.snapshot_every;
  const AcidResult res = acid_run(p0, model, *op, s.acid, mon);

  run.image("ground_truth", f);
  run.image("zero_filled", zf);
  run.image("operator_output", direct);
  run.image("final", res.image);
  run.history("history.csv", res.history);
  for (const auto& [k, img] : res.history.snapshots) {
    const std::string name = "iter_" + std::to_string(k) + ".f64";
    write_f64grid(run.path(name), img);
    run.note(name);
  }
  run.csv("summary.csv", "method,psnr,ssim,l2_error",
          {metric_row("zero_filled", f, zf, s.peak), metric_row("operator", f, direct, s.peak),
           metric_row("acid", f, res.image, s.peak)});
}

void run_ablate(Run& run) {
  const LabSettings& s = run.s();
  const Image f = build_phantom(s);
  const ForwardModel model = build_model(s);
  const Measurement p0 = measure(s, model, f);
  const ReconPtr op = obtain_operator(s, model, run.log());
  std::vector<std::vector<std::string>> rows;
  rows.push_back(metric_row("zero_filled", f, build_adjoint_recon(model)->forward(p0), s.peak));
  rows.push_back(metric_row("operator", f, op->forward(p0), s.peak));
  AcidMonitor mon;
  mon.ground_truth = f;
  mon.peak = s.peak;
  for (AcidVariant v : {AcidVariant::full, AcidVariant::NI, AcidVariant::NDL, AcidVariant::NCS}) {
    const AcidResult res = acid_ablate(v, p0, model, *op, s.acid, mon);
    run.image("final_" + to_string(v), res.image);
    run.history("history_" + to_string(v) + ".csv", res.history);
    rows.push_back(metric_row(to_string(v), f, res.image, s.peak));
  }
  run.csv("ablation.csv", "variant,psnr,ssim,l2_error", rows);
}

void run_sweep(Run& run) {
  const LabSettings& s = run.s();
  SweepSpec spec{build_phantom(s), s.peak, s.acid, {}, {}, {}};
  spec.make_model = [&](double v) { return build_sweep_model(s, v); };
  spec.measure = [&](const ForwardModel& m) { return measure(s, m, spec.ground_truth); };
  spec.make_operator = [&](const ForwardModel& m) {
    LabSettings t = s;
    t.op = s.sweep_operator;
    t.operator_blob.clear();
    return obtain_operator(t, m, run.log());
  };
  const auto rows = data_sweep(s.sweep_values, spec);
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) cells.push_back({num(r.rate), num(r.psnr), num(r.ssim)});
  run.csv("sweep.csv", s.model == "radon" ? "views,psnr,ssim" : "rate,psnr,ssim", cells);
}

void run_attack(Run& run, bool whole_pipeline) {
  const LabSettings& s = run.s();
  const Image f = build_phantom(s);
  const ForwardModel model = build_model(s);
  const Measurement p = model.apply(f);
  const ReconPtr op = obtain_operator(s, model, run.log());
  AcidConfig attack_acid_cfg = s.acid;
  if (s.attack_acid_iterations > 0) attack_acid_cfg.iterations = s.attack_acid_iterations;

  const double base_net = psnr(f, op->forward(p), s.peak);
  const double base_acid = psnr(f, acid_run(p, model, *op, s.acid).image, s.peak);
  AttackConfig net_cfg = s.attack;
  if (s.norm_budget_rel) net_cfg.norm_budget = *s.norm_budget_rel * l2_norm(f);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < s.attack_seeds; ++k) {
    const std::uint64_t seed = s.attack_seed + k;
    const std::string tag = std::to_string(seed);
    const AttackResult net = attack_network(*op, model, f, net_cfg, seed);
    const Measurement pe = p + model.apply(net.perturbation);
    const double d_net = base_net - psnr(f, op->forward(pe), s.peak);
    const double d_acid = base_acid - psnr(f, acid_run(pe, model, *op, s.acid).image, s.peak);
    std::vector<std::string> row{tag, num(net.perturbation_norm), num(d_net), num(d_acid)};
    if (!whole_pipeline) {
      write_attack_csv(run.path("attack_" + tag + ".csv"), net);
      run.note("attack_" + tag + ".csv");
      run.image("perturbation_" + tag, net.perturbation, -symmetric_window(net.perturbation),
                symmetric_window(net.perturbation));
    } else {
      AttackConfig cfg = s.attack;
      cfg.norm_budget = s.attack.norm_budget ? *s.attack.norm_budget : net.perturbation_norm;
      const AttackResult whole = attack_acid(*op, model, f, attack_acid_cfg, cfg, seed);
      const Measurement pw = p + model.apply(whole.perturbation);
      const double d_whole = base_acid - psnr(f, acid_run(pw, model, *op, s.acid).image, s.peak);
      write_attack_csv(run.path("attack_acid_" + tag + ".csv"), whole);
      run.note("attack_acid_" + tag + ".csv");
      run.image("perturbation_acid_" + tag, whole.perturbation,
                -symmetric_window(whole.perturbation), symmetric_window(whole.perturbation));
      row.push_back(num(whole.perturbation_norm));
      row.push_back(num(d_whole));
    }
    rows.push_back(row);
  }
  run.csv("attack_summary.csv",
          whole_pipeline ? "seed,net_perturbation_norm,delta_net,delta_acid,"
                           "acid_perturbation_norm,delta_acid_whole"
                         : "seed,perturbation_norm,delta_net,delta_acid",
          rows);
  run.csv("attack_baseline.csv", "quantity,value",
          {{"psnr_net", num(base_net)}, {"psnr_acid", num(base_acid)}});
}

void run_contraction(Run& run) {
  const LabSettings& s = run.s();
  const Image f = build_phantom(s);
  const ForwardModel model = build_model(s);
  std::vector<std::vector<std::string>> summary;
  for (double sigma : s.contraction_sigmas) {
    const ContractionReport rep = contraction_probe(sigma, model, f, s.acid);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < rep.observable_error.size(); ++k) {
      rows.push_back({std::to_string(k), num(rep.observable_error[k]),
                      k ? num(rep.network_observable_error[k - 1]) : ""});
    }
    run.csv("contraction_" + num(sigma) + ".csv", "iter,observable_error,network_observable_error",
            rows);
    summary.push_back({num(sigma), num(rep.fitted_rate), num(rep.predicted_rate),
                       num(rep.observable_error.back()), num(rep.network_observable_error.back()),
                       num(rep.terminal_bound), std::to_string(rep.support)});
  }
  run.csv("contraction.csv",
          "sigma,fitted_rate,predicted_rate,terminal_observable_error,"
          "terminal_network_error,terminal_bound,support",
          summary);
}

void run_noise_stability(Run& run) {
  const LabSettings& s = run.s();
  const Image f = build_phantom(s);
  const ForwardModel model = build_model(s);
  const ReconPtr op = obtain_operator(s, model, run.log());
  const Image base = acid_run(model.apply(f), model, *op, s.acid).image;
  std::vector<double> ratios;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t d = 0; d < s.stability_draws; ++d) {
    const Image moved = add_noise(f, s.stability_sigma, derive_seed(s.stability_seed, d));
    const Image out = acid_run(model.apply(moved), model, *op, s.acid).image;
    const double ratio = l2_norm(out - base) / l2_norm(moved - f);
    ratios.push_back(ratio);
    rows.push_back({std::to_string(d), num(ratio)});
  }
  run.csv("stability.csv", "draw,ratio", rows);
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  std::vector<std::size_t> counts(s.stability_bins, 0);
  for (double r : ratios) {
    std::size_t b = hi > lo ? std::size_t((r - lo) / (hi - lo) * double(s.stability_bins)) : 0;
    counts[std::min(b, s.stability_bins - 1)]++;
  }
  std::vector<std::vector<std::string>> hist;
  for (std::size_t b = 0; b < s.stability_bins; ++b) {
    const double w = (hi - lo) / double(s.stability_bins);
    hist.push_back({num(lo + w * double(b)), num(lo + w * double(b + 1)),
                    std::to_string(counts[b])});
  }
  run.csv("stability_histogram.csv", "bin_lo,bin_hi,count", hist);
}

}  // namespace

RunManifest run_experiment(const LabSettings& s, const fs::path& out_dir, std::ostream* log) {
  Run run(s, out_dir, log);
  try {
    if (s.protocol == "phantom") {
      run_phantom(run);
    } else if (s.protocol == "forward") {
      run_forward(run);
    } else if (s.protocol == "reconstruct") {
      run_reconstruct(run);
    } else if (s.protocol == "ablate") {
      run_ablate(run);
    } else if (s.protocol == "sweep") {
      run_sweep(run);
    } else if (s.protocol == "attack-net") {
      run_attack(run, false);
    } else if (s.protocol == "attack-acid") {
      run_attack(run, true);
    } else if (s.protocol == "contraction") {
      run_contraction(run);
    } else if (s.protocol == "noise-stability") {
      run_noise_stability(run);
    } else {
      throw ConfigError("unknown protocol '" + s.protocol + "'");
    }
  } catch (...) {
    run.finish("failed");
    throw;
  }
  return run.finish("ok");
}

RunManifest run_experiment(const fs::path& config_path, const fs::path& out_dir,
                           std::optional<std::uint64_t> seed_override,
                           std::optional<std::string> protocol_override, std::ostream* log) {
  Config cfg = Config::load(config_path, kRepeatable);
  if (protocol_override) cfg.set("protocol", *protocol_override);
  if (seed_override) {
    cfg.set("seed", std::to_string(*seed_override));
    for (const char* k : {"noise_seed", "attack_seed", "stability_seed"}) cfg.erase(k);
  }
  return run_experiment(LabSettings::from_config(cfg), out_dir, log);
}

}  // namespace acid
