#include "semamba/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "semamba/data/png_io.hpp"
#include "semamba/data/transforms.hpp"

namespace semamba::data {

namespace fs = std::filesystem;

namespace {

constexpr uint64_t kManifestStream = 0x5eedf00dULL;

// Uniform in [lo, hi) from the raw 53 high bits, independent of <random>
// distribution implementations.
double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double gaussian(Rng& rng) {
  const double u1 = std::max(static_cast<double>(rng() >> 11) * 0x1.0p-53, 1e-300);
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct Blob {
  double x, y, radius, intensity;
};

struct CaseShape {
  double area_fraction, aspect, angle, cx, cy, drift_x, drift_y;
  double ring_outer, ring_inner, ring_offset;
  double bg, bg_grad_x, bg_grad_y, body, ring, core;
  std::vector<Blob> blobs;
};

CaseShape draw_case(Rng& rng, const SynthOptions& o) {
  const double size = static_cast<double>(o.image_size);
  CaseShape c{};
  c.area_fraction = uniform(rng, 0.12, 0.30);
  c.aspect = uniform(rng, 0.65, 1.0);
  c.angle = uniform(rng, 0.0, std::numbers::pi);
  const double a = std::sqrt(c.area_fraction * size * size / (std::numbers::pi * c.aspect));
  c.drift_x = uniform(rng, -0.03, 0.03) * size;
  c.drift_y = uniform(rng, -0.03, 0.03) * size;
  const double margin = a + 0.02 * size + std::max(std::abs(c.drift_x), std::abs(c.drift_y));
  c.cx = uniform(rng, margin, size - margin);
  c.cy = uniform(rng, margin, size - margin);
  c.ring_outer = uniform(rng, 0.55, 0.75);
  c.ring_inner = uniform(rng, 0.45, 0.65);
  c.ring_offset = uniform(rng, -0.8, 0.8);
  c.bg = uniform(rng, 0.15, 0.25);
  c.bg_grad_x = uniform(rng, -0.1, 0.1);
  c.bg_grad_y = uniform(rng, -0.1, 0.1);
  c.body = uniform(rng, 0.45, 0.55);
  c.ring = uniform(rng, 0.28, 0.36);
  c.core = uniform(rng, 0.75, 0.9);

  const int blobs = 1 + static_cast<int>(rng() % 2);
  for (int i = 0; i < blobs; ++i) {
    const double r = uniform(rng, 0.04, 0.07) * size;
    for (int attempt = 0; attempt < 32; ++attempt) {
      const double x = uniform(rng, r, size - r);
      const double y = uniform(rng, r, size - r);
      // Keep blobs clear of the largest extent the ellipse can reach.
      if (std::hypot(x - c.cx, y - c.cy) > margin + r) {
        c.blobs.push_back({x, y, r, uniform(rng, 0.7, 0.9)});
        break;
      }
    }
  }
  return c;
}

void render_slice(const CaseShape& c, int slice, const SynthOptions& o, Rng& noise_rng,
                  Sample& out) {
  const int64_t n = o.image_size;
  const double size = static_cast<double>(n);
  const double phase = o.slices_per_case > 1
                           ? static_cast<double>(slice) / (o.slices_per_case - 1) - 0.5
                           : 0.0;
  const double scale =
      0.78 + 0.22 * std::sin(std::numbers::pi * (slice + 0.5) / o.slices_per_case);
  const double a = scale * std::sqrt(c.area_fraction * size * size / (std::numbers::pi * c.aspect));
  const double b = c.aspect * a;
  const double cx = c.cx + phase * c.drift_x;
  const double cy = c.cy + phase * c.drift_y;
  const double angle = c.angle + 0.05 * phase;
  const double cos_t = std::cos(angle);
  const double sin_t = std::sin(angle);
  const double rho_out = c.ring_outer * b;
  const double rho_in = c.ring_inner * rho_out;
  const double offset = c.ring_offset * (b - rho_out);

  std::vector<double> values(static_cast<std::size_t>(n * n));
  Mask mask(n, n, 0);
  for (int64_t y = 0; y < n; ++y) {
    for (int64_t x = 0; x < n; ++x) {
      const double px = x + 0.5 - cx;
      const double py = y + 0.5 - cy;
      const double u = px * cos_t + py * sin_t;   // major axis
      const double v = -px * sin_t + py * cos_t;  // minor axis
      double value = c.bg + c.bg_grad_x * (x / size - 0.5) + c.bg_grad_y * (y / size - 0.5);
      for (const auto& blob : c.blobs) {
        if (std::hypot(x + 0.5 - blob.x, y + 0.5 - blob.y) <= blob.radius) value = blob.intensity;
      }
      uint8_t cls = 0;
      if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) {
        cls = 1;
        value = c.body;
        if (o.classes == 4) {
          const double r = std::hypot(u - offset, v);
          if (r <= rho_in) {
            cls = 3;
            value = c.core;
          } else if (r <= rho_out) {
            cls = 2;
            value = c.ring;
          }
        }
      }
      mask(y, x) = cls;
      values[static_cast<std::size_t>(y * n + x)] = value + o.noise * gaussian(noise_rng);
    }
  }

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double range = std::max(*hi_it - lo, 1e-12);
  out.image = Image(n, n);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto q = static_cast<uint16_t>(std::lround((values[i] - lo) / range * 65535.0));
    out.image.data[i] = static_cast<float>(q / 65535.0);
  }
  out.mask = std::move(mask);
}

}  // namespace

void SynthOptions::validate() const {
  if (classes != 2 && classes != 4) {
    throw ConfigError("synth: classes must be 2 or 4, got " + std::to_string(classes));
  }
  if (cases < 3) throw ConfigError("synth: need at least 3 cases");
  if (slices_per_case < 1) throw ConfigError("synth: slices_per_case must be >= 1");
  if (image_size < 16) throw ConfigError("synth: image_size must be >= 16");
  for (double f : {labelled_fraction, validation_fraction, test_fraction}) {
    if (!(f >= 0.0 && f < 1.0)) throw ConfigError("synth: split fractions must lie in [0, 1)");
  }
  if (!(noise >= 0.0)) throw ConfigError("synth: noise must be nonnegative");
}

std::string synth_case_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%03d", index);
  return buf;
}

std::vector<Sample> synth_samples(const SynthOptions& options) {
  options.validate();
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(options.cases * options.slices_per_case));
  for (int c = 0; c < options.cases; ++c) {
    auto shape_rng = sample_rng(options.seed, 2 * static_cast<uint64_t>(c));
    auto noise_rng = sample_rng(options.seed, 2 * static_cast<uint64_t>(c) + 1);
    const auto shape = draw_case(shape_rng, options);
    for (int s = 0; s < options.slices_per_case; ++s) {
      Sample sample;
      sample.case_id = synth_case_id(c);
      sample.slice_index = s;
      render_slice(shape, s, options, noise_rng, sample);
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

SplitManifest synth_manifest(const SynthOptions& options) {
  options.validate();
  const int n = options.cases;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto rng = sample_rng(options.seed, kManifestStream);
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[static_cast<int>(rng() % static_cast<uint64_t>(i + 1))]);
  }
  const int n_test = static_cast<int>(std::lround(options.test_fraction * n));
  const int n_val = std::max(1, static_cast<int>(std::lround(options.validation_fraction * n)));
  const int n_lab = std::max(1, static_cast<int>(std::lround(options.labelled_fraction * n)));
  if (n_test + n_val + n_lab > n) {
    throw ConfigError("synth: split fractions leave no room for the requested subsets");
  }

  SplitManifest m;
  int i = 0;
  auto take = [&](int count, std::vector<std::string>& dst) {
    std::vector<int> picked(order.begin() + i, order.begin() + i + count);
    std::sort(picked.begin(), picked.end());
    for (int id : picked) dst.push_back(synth_case_id(id));
    i += count;
  };
  take(n_test, m.test);
  take(n_val, m.validation);
  take(n_lab, m.labelled);
  take(n - i, m.unlabelled);
  return m;
}

SplitManifest synth_generate(const SynthOptions& options, const fs::path& out_directory) {
  const auto samples = synth_samples(options);
  const auto manifest = synth_manifest(options);
  std::error_code ec;
  fs::create_directories(out_directory, ec);
  if (ec) throw DataError("synth: cannot create " + out_directory.string() + ": " + ec.message());

  for (const auto& s : samples) {
    const auto dir = out_directory / s.case_id;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("synth: cannot create " + dir.string() + ": " + ec.message());
    Grid<uint16_t> raw(s.image.height, s.image.width);
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
      raw.data[i] = static_cast<uint16_t>(std::lround(s.image.data[i] * 65535.0));
    }
    const auto stem = "slice_" + std::to_string(s.slice_index);
    write_png_gray16(dir / (stem + "_img.png"), raw);
    write_png_gray8(dir / (stem + "_mask.png"), *s.mask);
  }
  manifest.save(out_directory / "manifest.json");
  return manifest;
}

}  // namespace semamba::data
