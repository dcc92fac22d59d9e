#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "acid/acid_engine.hpp"
#include "acid/adversary.hpp"
#include "acid/config.hpp"
#include "acid/forward_model.hpp"
#include "acid/phantom.hpp"
#include "acid/recon_ops.hpp"

namespace acid {

// Every knob of a run. from_config() fills defaults for missing keys;
// to_config() writes all of them back, so a manifest reproduces the run.
struct LabSettings {
  std::string protocol = "reconstruct";
  std::uint64_t seed = 0;

  // phantom
  std::size_t size = 64;
  std::vector<Ellipse> ellipses;  // explicit ellipses override the random spec
  std::size_t phantom_count = 8;
  std::uint64_t phantom_seed = 0;
  bool phantom_normalize = true;  // scale so the maximum is 1
  std::string insert_text;
  std::size_t insert_row = 0;
  std::size_t insert_col = 0;
  std::size_t insert_scale = 1;
  double insert_intensity = 1.0;

  // forward model
  std::string model = "fourier";  // fourier | radon
  MaskPattern mask_pattern = MaskPattern::gaussian2d;
  double mask_rate = 0.3;
  std::uint64_t mask_seed = 7;
  std::size_t views = 40;
  std::size_t full_views = 40;

  // data
  double noise_sigma = 0.0;  // image-domain Gaussian noise before measuring
  std::uint64_t noise_seed = 0;
  double peak = 1.0;

  // reconstruction operator
  std::string op = "automap";  // automap | adjoint
  std::size_t hidden = 0;      // 0: the real input length
  std::uint64_t op_seed = 0;
  std::size_t train_count = 200;
  std::uint64_t train_seed = 1000;
  std::size_t train_epochs = 300;
  double train_step = 0.5;
  double train_noise_sigma = 0.0;
  std::string operator_blob;  // cache path; empty disables caching

  // ACID
  AcidConfig acid;
  int snapshot_every = 0;

  // attacks
  AttackConfig attack;
  std::optional<double> norm_budget_rel;  // budget as a fraction of ||f||
  std::uint64_t attack_seed = 0;
  std::size_t attack_seeds = 1;
  int attack_acid_iterations = 0;  // ACID K inside attack-acid; 0 uses acid.iterations

  // sweep: sampling rates (fourier) or view counts (radon)
  std::vector<double> sweep_values;
  std::string sweep_operator = "adjoint";

  // contraction
  std::vector<double> contraction_sigmas{0.2, 0.5, 0.8};

  // noise stability
  std::size_t stability_draws = 20;
  double stability_sigma = 15.0 / 255.0;
  std::size_t stability_bins = 10;
  std::uint64_t stability_seed = 0;

  static LabSettings from_config(const Config& cfg);
  Config to_config() const;
};

// Keys accepted in a config file (artifact/experiment bookkeeping included).
const std::set<std::string>& known_config_keys();

// 64x64 phantom of 8 seeded ellipses scaled to peak 1.
Image standard_phantom(std::uint64_t seed, std::size_t size = 64);
// 30% Gaussian mask, seed 7.
ForwardModel standard_fourier_model(std::size_t size = 64);
// 40 equispaced views.
ForwardModel standard_radon_model(std::size_t size = 64);

Image build_phantom(const LabSettings& s);
ForwardModel build_model(const LabSettings& s);
// Model for one sweep point: a sampling rate or a view count.
ForwardModel build_sweep_model(const LabSettings& s, double value);
// A(f + noise) with the settings' image-domain noise.
Measurement measure(const LabSettings& s, const ForwardModel& model, const Image& f);

std::vector<TrainingPair> make_training_pairs(const ForwardModel& model, std::size_t count,
                                              std::uint64_t seed, double noise_sigma,
                                              std::size_t size);

// Loads the cached blob when it matches, otherwise builds (and trains) the
// operator and writes the blob. Progress goes to `log` when given.
ReconPtr obtain_operator(const LabSettings& s, const ForwardModel& model,
                         std::ostream* log = nullptr);

struct RunManifest {
  std::string experiment_id;
  std::string protocol;
  std::string status = "ok";
  LabSettings settings;
  std::vector<std::filesystem::path> artifacts;  // relative to the run directory

  void write(const std::filesystem::path& path) const;
};

// Runs the protocol named in the settings, writing artifacts and
// manifest.txt into out_dir. On failure the manifest lists the artifacts
// completed so far and the error propagates.
RunManifest run_experiment(const LabSettings& s, const std::filesystem::path& out_dir,
                           std::ostream* log = nullptr);
RunManifest run_experiment(const std::filesystem::path& config_path,
                           const std::filesystem::path& out_dir,
                           std::optional<std::uint64_t> seed_override = std::nullopt,
                           std::optional<std::string> protocol_override = std::nullopt,
                           std::ostream* log = nullptr);

}  // namespace acid
