#include "acid/forward_model.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <sstream>
#include <variant>

#include "acid/errors.hpp"
#include "acid/random.hpp"

namespace acid {

// ---------------------------------------------------------------------------
// geometry and masks

std::size_t detector_count(std::size_t side) {
  auto d = static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * double(side)));
  // Outermost 2x2 subpixel sample sits at radius (side/2 - 1/4) * sqrt(2).
  const double reach = (double(side) / 2.0 - 0.25) * std::numbers::sqrt2;
  while ((double(d) - 1.0) / 2.0 < reach + 1e-9) ++d;
  return d;
}

RadonGeometry RadonGeometry::uniform(std::size_t side, std::size_t num_angles) {
  if (side < 2) throw ShapeError("radon geometry needs side >= 2");
  if (num_angles == 0) throw ValidationError("radon geometry needs at least one angle");
  RadonGeometry g;
  g.side = side;
  g.num_detectors = detector_count(side);
  g.angles.resize(num_angles);
  for (std::size_t i = 0; i < num_angles; ++i) {
    g.angles[i] = double(i) * std::numbers::pi / double(num_angles);
  }
  return g;
}

RadonGeometry select_views(std::size_t full_angles, std::size_t kept, std::size_t side) {
  if (kept == 0) throw ValidationError("select_views: kept must be positive");
  if (kept > full_angles) throw ValidationError("select_views: kept exceeds full_angles");
  return RadonGeometry::uniform(side, kept);
}

std::string to_string(MaskPattern p) {
  switch (p) {
    case MaskPattern::gaussian2d: return "gaussian2d";
    case MaskPattern::radial: return "radial";
    case MaskPattern::full: return "full";
    case MaskPattern::custom: return "custom";
  }
  return "unknown";
}

MaskPattern parse_mask_pattern(const std::string& name) {
  if (name == "gaussian2d") return MaskPattern::gaussian2d;
  if (name == "radial") return MaskPattern::radial;
  if (name == "full") return MaskPattern::full;
  if (name == "custom") return MaskPattern::custom;
  throw ValidationError("unknown mask pattern '" + name + "'");
}

std::size_t FourierMask::popcount() const {
  return static_cast<std::size_t>(std::count(grid.begin(), grid.end(), std::uint8_t{1}));
}

namespace {

// Signed frequency index for unshifted DFT position i of an n-point axis.
long wrapped(std::size_t i, std::size_t n) {
  return i < (n + 1) / 2 ? long(i) : long(i) - long(n);
}

std::vector<std::uint8_t> gaussian_grid(double rate, std::size_t w, std::size_t h,
                                        std::uint64_t seed) {
  const std::size_t n = w * h;
  const auto target = static_cast<std::size_t>(std::llround(rate * double(n)));
  const double sx = double(w) / 6.0;
  const double sy = double(h) / 6.0;
  Rng rng(seed);
  // Weighted sampling without replacement: keep the smallest -ln(u)/weight keys.
  std::vector<std::pair<double, std::size_t>> keys(n);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double ky = double(wrapped(r, h)) / sy;
      const double kx = double(wrapped(c, w)) / sx;
      const double weight = std::exp(-0.5 * (ky * ky + kx * kx));
      const double u = uniform_open0(rng);
      keys[r * w + c] = {-std::log(u) / weight, r * w + c};
    }
  }
  keys[0].first = -1.0;  // DC always first
  std::partial_sort(keys.begin(), keys.begin() + std::ptrdiff_t(target), keys.end());
  std::vector<std::uint8_t> grid(n, 0);
  for (std::size_t i = 0; i < target; ++i) grid[keys[i].second] = 1;
  return grid;
}

std::vector<std::uint8_t> spoke_grid(std::size_t spokes, std::size_t w, std::size_t h) {
  std::vector<std::uint8_t> grid(w * h, 0);
  const double reach = std::hypot(double(w), double(h)) / 2.0 + 1.0;
  const long hy = long(h) / 2, hx = long(w) / 2;
  for (std::size_t s = 0; s < spokes; ++s) {
    const double th = double(s) * std::numbers::pi / double(spokes);
    const double cs = std::cos(th), sn = std::sin(th);
    for (double t = -reach; t <= reach; t += 0.25) {
      const long y = std::lround(t * sn);
      const long x = std::lround(t * cs);
      if (y < -hy || y > long(h) - 1 - hy || x < -hx || x > long(w) - 1 - hx) continue;
      const std::size_t r = std::size_t((y + long(h)) % long(h));
      const std::size_t c = std::size_t((x + long(w)) % long(w));
      grid[r * w + c] = 1;
    }
  }
  grid[0] = 1;
  return grid;
}

std::vector<std::uint8_t> radial_grid(double rate, std::size_t w, std::size_t h) {
  const double target = rate * double(w * h);
  std::vector<std::uint8_t> best;
  double best_gap = 1e300;
  for (std::size_t spokes = 1; spokes <= 4 * std::max(w, h); ++spokes) {
    auto g = spoke_grid(spokes, w, h);
    const double count = double(std::count(g.begin(), g.end(), std::uint8_t{1}));
    const double gap = std::abs(count - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = std::move(g);
    }
    if (count > target) break;
  }
  return best;
}

}  // namespace

FourierMask make_mask(MaskPattern pattern, double rate, std::size_t width, std::size_t height,
                      std::uint64_t seed) {
  if (width < 2 || height < 2) throw ShapeError("mask must be at least 2x2");
  if (!(rate > 0.0) || rate > 1.0) throw ValidationError("mask rate must lie in (0, 1]");
  if (rate * double(width * height) < 1.0) {
    throw ValidationError("mask rate too small for the grid (rate * cells < 1)");
  }
  FourierMask m;
  m.width = width;
  m.height = height;
  m.sampling_rate = rate;
  m.pattern = pattern;
  m.seed = seed;
  if (rate == 1.0 || pattern == MaskPattern::full) {
    if (pattern == MaskPattern::full && rate != 1.0) {
      throw ValidationError("full mask pattern requires rate 1");
    }
    m.grid.assign(width * height, 1);
    return m;
  }
  switch (pattern) {
    case MaskPattern::gaussian2d: m.grid = gaussian_grid(rate, width, height, seed); break;
    case MaskPattern::radial: m.grid = radial_grid(rate, width, height); break;
    default: throw ValidationError("make_mask cannot generate pattern " + to_string(pattern));
  }
  return m;
}

FourierMask mask_from_grid(std::size_t width, std::size_t height,
                           const std::vector<double>& values) {
  if (values.size() != width * height) throw ShapeError("mask grid size mismatch");
  FourierMask m;
  m.width = width;
  m.height = height;
  m.pattern = MaskPattern::custom;
  m.grid.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0 && values[i] != 1.0) throw ValidationError("mask values must be 0 or 1");
    m.grid[i] = values[i] == 1.0 ? 1 : 0;
  }
  m.sampling_rate = double(m.popcount()) / double(values.size());
  if (m.popcount() == 0) throw ValidationError("mask samples nothing");
  return m;
}

// ---------------------------------------------------------------------------
// Radon projector: pixel-driven splatting of 2x2 subpixels with linear
// interpolation onto unit-spaced detectors. Apply and adjoint read the same
// weight table, so they are exact transposes.

namespace {

struct RadonTable {
  RadonGeometry geometry;
  // CSR over (angle, pixel): entries [offsets[k], offsets[k+1]).
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> bins;
  std::vector<double> weights;

  explicit RadonTable(RadonGeometry g) : geometry(std::move(g)) {
    const std::size_t n = geometry.side;
    const std::size_t nd = geometry.num_detectors;
    const double half = (double(n) - 1.0) / 2.0;
    const double dmid = (double(nd) - 1.0) / 2.0;
    offsets.reserve(geometry.angles.size() * n * n + 1);
    offsets.push_back(0);
    std::vector<std::pair<std::uint32_t, double>> local;
    for (std::size_t a = 0; a < geometry.angles.size(); ++a) {
      const double cs = std::cos(geometry.angles[a]);
      const double sn = std::sin(geometry.angles[a]);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          local.clear();
          for (int sr = 0; sr < 2; ++sr) {
            for (int sc = 0; sc < 2; ++sc) {
              const double x = double(c) - half + (sc == 0 ? -0.25 : 0.25);
              const double y = half - double(r) + (sr == 0 ? 0.25 : -0.25);
              const double u = x * cs + y * sn + dmid;
              const double fl = std::floor(u);
              const double t = u - fl;
              const auto d0 = static_cast<long>(fl);
              add(local, a * nd, d0, 0.25 * (1.0 - t), nd);
              add(local, a * nd, d0 + 1, 0.25 * t, nd);
            }
          }
          std::sort(local.begin(), local.end());
          for (std::size_t i = 0; i < local.size(); ++i) {
            if (!bins.empty() && offsets.back() < bins.size() && bins.back() == local[i].first) {
              weights.back() += local[i].second;
            } else {
              bins.push_back(local[i].first);
              weights.push_back(local[i].second);
            }
          }
          offsets.push_back(std::uint32_t(bins.size()));
        }
      }
    }
  }

  static void add(std::vector<std::pair<std::uint32_t, double>>& local, std::size_t base, long d,
                  double w, std::size_t nd) {
    if (w == 0.0) return;
    if (d < 0 || std::size_t(d) >= nd) {
      throw std::logic_error("radon subpixel fell outside the detector array");
    }
    local.emplace_back(std::uint32_t(base + std::size_t(d)), w);
  }

  std::size_t rows() const { return geometry.angles.size() * geometry.num_detectors; }

  void apply(const double* f, double* p) const {
    const std::size_t npix = geometry.side * geometry.side;
    std::fill(p, p + rows(), 0.0);
    for (std::size_t a = 0; a < geometry.angles.size(); ++a) {
      for (std::size_t j = 0; j < npix; ++j) {
        const std::size_t k = a * npix + j;
        const double v = f[j];
        if (v == 0.0) continue;
        for (std::uint32_t e = offsets[k]; e < offsets[k + 1]; ++e) p[bins[e]] += weights[e] * v;
      }
    }
  }

  void adjoint(const double* p, double* f) const {
    const std::size_t npix = geometry.side * geometry.side;
    std::fill(f, f + npix, 0.0);
    for (std::size_t a = 0; a < geometry.angles.size(); ++a) {
      for (std::size_t j = 0; j < npix; ++j) {
        const std::size_t k = a * npix + j;
        double s = 0.0;
        for (std::uint32_t e = offsets[k]; e < offsets[k + 1]; ++e) s += weights[e] * p[bins[e]];
        f[j] += s;
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Masked unitary DFT backed by FFTW. Plans are created once under a lock
// (the FFTW planner is not thread-safe); execution on fresh aligned buffers
// is.

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : ptr(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* ptr;
};

struct FourierTable {
  FourierMask mask;
  std::vector<std::size_t> sampled;  // row-major positions of mask-true cells
  fftw_plan forward_plan = nullptr;
  fftw_plan backward_plan = nullptr;
  double scale;

  explicit FourierTable(FourierMask m) : mask(std::move(m)) {
    if (mask.grid.size() != mask.width * mask.height) throw ShapeError("mask grid size mismatch");
    for (std::size_t i = 0; i < mask.grid.size(); ++i) {
      if (mask.grid[i]) sampled.push_back(i);
    }
    if (sampled.empty()) throw ValidationError("mask samples nothing");
    scale = 1.0 / std::sqrt(double(mask.grid.size()));
    FftwBuffer in(mask.grid.size()), out(mask.grid.size());
    std::lock_guard lock(planner_mutex());
    const int h = int(mask.height), w = int(mask.width);
    forward_plan = fftw_plan_dft_2d(h, w, in.ptr, out.ptr, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_plan = fftw_plan_dft_2d(h, w, in.ptr, out.ptr, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!forward_plan || !backward_plan) throw std::runtime_error("FFTW planning failed");
  }

  ~FourierTable() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_plan);
    fftw_destroy_plan(backward_plan);
  }
  FourierTable(const FourierTable&) = delete;
  FourierTable& operator=(const FourierTable&) = delete;

  void apply(const double* f, double* p) const {
    const std::size_t n = mask.grid.size();
    FftwBuffer in(n), out(n);
    for (std::size_t i = 0; i < n; ++i) {
      in.ptr[i][0] = f[i];
      in.ptr[i][1] = 0.0;
    }
    fftw_execute_dft(forward_plan, in.ptr, out.ptr);
    for (std::size_t k = 0; k < sampled.size(); ++k) {
      p[2 * k] = out.ptr[sampled[k]][0] * scale;
      p[2 * k + 1] = out.ptr[sampled[k]][1] * scale;
    }
  }

  void adjoint(const double* p, double* f) const {
    const std::size_t n = mask.grid.size();
    FftwBuffer in(n), out(n);
    for (std::size_t i = 0; i < n; ++i) in.ptr[i][0] = in.ptr[i][1] = 0.0;
    for (std::size_t k = 0; k < sampled.size(); ++k) {
      in.ptr[sampled[k]][0] = p[2 * k];
      in.ptr[sampled[k]][1] = p[2 * k + 1];
    }
    fftw_execute_dft(backward_plan, in.ptr, out.ptr);
    for (std::size_t i = 0; i < n; ++i) f[i] = out.ptr[i][0] * scale;
  }
};

}  // namespace

struct ForwardModel::Impl {
  std::variant<RadonTable, FourierTable> table;
  template <class T>
  explicit Impl(std::in_place_type_t<T> tag, auto&& arg) : table(tag, std::forward<decltype(arg)>(arg)) {}
};

ForwardModel ForwardModel::radon(RadonGeometry geometry) {
  if (geometry.side < 2) throw ShapeError("radon geometry needs side >= 2");
  if (geometry.angles.empty()) throw ValidationError("radon geometry needs at least one angle");
  for (std::size_t i = 1; i < geometry.angles.size(); ++i) {
    if (!(geometry.angles[i] > geometry.angles[i - 1])) {
      throw ValidationError("radon angles must be strictly increasing");
    }
  }
  if (geometry.angles.front() < 0.0 || geometry.angles.back() >= std::numbers::pi) {
    throw ValidationError("radon angles must lie in [0, pi)");
  }
  if (geometry.num_detectors < detector_count(geometry.side)) {
    throw ValidationError("radon detector array does not span the image diagonal");
  }
  return ForwardModel(
      std::make_shared<const Impl>(std::in_place_type<RadonTable>, std::move(geometry)));
}

ForwardModel ForwardModel::fourier(FourierMask mask) {
  if (mask.width < 2 || mask.height < 2) throw ShapeError("mask must be at least 2x2");
  return ForwardModel(
      std::make_shared<const Impl>(std::in_place_type<FourierTable>, std::move(mask)));
}

MeasurementKind ForwardModel::kind() const noexcept {
  return std::holds_alternative<RadonTable>(impl_->table) ? MeasurementKind::radon
                                                          : MeasurementKind::fourier;
}

std::size_t ForwardModel::width() const noexcept {
  if (auto* r = std::get_if<RadonTable>(&impl_->table)) return r->geometry.side;
  return std::get<FourierTable>(impl_->table).mask.width;
}

std::size_t ForwardModel::height() const noexcept {
  if (auto* r = std::get_if<RadonTable>(&impl_->table)) return r->geometry.side;
  return std::get<FourierTable>(impl_->table).mask.height;
}

std::size_t ForwardModel::row_count() const noexcept {
  if (auto* r = std::get_if<RadonTable>(&impl_->table)) return r->rows();
  return std::get<FourierTable>(impl_->table).sampled.size();
}

std::size_t ForwardModel::real_size() const noexcept {
  return kind() == MeasurementKind::fourier ? 2 * row_count() : row_count();
}

Measurement ForwardModel::zero_measurement() const { return Measurement(kind(), row_count()); }
Image ForwardModel::zero_image() const { return Image(width(), height()); }

void ForwardModel::check(const Image& f) const {
  if (f.width() != width() || f.height() != height()) {
    throw ShapeError("image " + std::to_string(f.width()) + "x" + std::to_string(f.height()) +
                     " does not match model " + std::to_string(width()) + "x" +
                     std::to_string(height()));
  }
}

void ForwardModel::check(const Measurement& p) const {
  if (p.kind() != kind() || p.real_size() != real_size()) {
    throw ShapeError("measurement of length " + std::to_string(p.length()) +
                     " does not match model row count " + std::to_string(row_count()));
  }
}

Measurement ForwardModel::apply(const Image& f) const {
  check(f);
  Measurement p = zero_measurement();
  std::visit([&](const auto& t) { t.apply(f.data(), p.data()); }, impl_->table);
  return p;
}

Image ForwardModel::adjoint(const Measurement& p) const {
  check(p);
  Image f = zero_image();
  std::visit([&](const auto& t) { t.adjoint(p.data(), f.data()); }, impl_->table);
  return f;
}

const RadonGeometry* ForwardModel::radon_geometry() const noexcept {
  if (auto* r = std::get_if<RadonTable>(&impl_->table)) return &r->geometry;
  return nullptr;
}

const FourierMask* ForwardModel::fourier_mask() const noexcept {
  if (auto* f = std::get_if<FourierTable>(&impl_->table)) return &f->mask;
  return nullptr;
}

std::string ForwardModel::describe() const {
  std::ostringstream os;
  if (auto* g = radon_geometry()) {
    os << "radon side=" << g->side << " angles=" << g->angles.size()
       << " detectors=" << g->num_detectors;
  } else {
    const auto* m = fourier_mask();
    os << "fourier " << m->width << "x" << m->height << " pattern=" << to_string(m->pattern)
       << " rate=" << m->sampling_rate << " seed=" << m->seed << " samples=" << m->popcount();
  }
  return os.str();
}

// ---------------------------------------------------------------------------

Image pseudo_inverse(const ForwardModel& model, const Measurement& p, double ridge,
                     double rel_tol, int max_iter) {
  model.check(p);
  auto normal = [&](const Measurement& y) {
    Measurement out = model.apply(model.adjoint(y));
    out.axpy(ridge, y);
    return out;
  };
  Measurement x = model.zero_measurement();
  Measurement r = p;
  Measurement d = r;
  double rs = dot(r, r);
  const double stop = rel_tol * rel_tol * rs;
  for (int it = 0; it < max_iter && rs > stop && rs > 0.0; ++it) {
    const Measurement nd = normal(d);
    const double alpha = rs / dot(d, nd);
    x.axpy(alpha, d);
    r.axpy(-alpha, nd);
    const double rs_new = dot(r, r);
    d *= rs_new / rs;
    d += r;
    rs = rs_new;
  }
  return model.adjoint(x);
}

Image observable_projection(const ForwardModel& model, const Image& f, double ridge) {
  return pseudo_inverse(model, model.apply(f), ridge);
}

}  // namespace acid
