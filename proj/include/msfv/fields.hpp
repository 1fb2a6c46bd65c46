#ifndef MSFV_FIELDS_HPP
#define MSFV_FIELDS_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "msfv/error.hpp"

namespace msfv {

/// Positive cell-centred scalar on an nx x ny grid, row y = 0 first.
struct PermField {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  PermField() = default;
  PermField(int nx_, int ny_, double fill = 1.0)
      : nx(nx_), ny(ny_), values(static_cast<std::size_t>(nx_) * ny_, fill) {}

  int size() const noexcept { return nx * ny; }
  double& operator()(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
  double operator()(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
  double operator[](int c) const { return values[static_cast<std::size_t>(c)]; }
  double min() const { return *std::min_element(values.begin(), values.end()); }
  double max() const { return *std::max_element(values.begin(), values.end()); }

  friend bool operator==(const PermField&, const PermField&) = default;
};

namespace detail {

// Uniform double in [0, 1) taken from the top 53 bits; independent of the
// standard library's distribution implementations so fields are portable.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline void check_positive(const PermField& f, const char* who) {
  for (double v : f.values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw NumericalError(std::string(who) + ": generated a non-positive permeability");
}

} // namespace detail

/// The oscillating two-scale coefficient on the unit square.
inline double periodic_permeability(double x, double y, double eps) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double sx = 2.0 + 1.8 * std::sin(two_pi * x / eps);
  const double sy = 2.0 + 1.8 * std::sin(two_pi * y / eps);
  const double cx = 2.0 + 1.8 * std::cos(two_pi * x / eps);
  return sx / sy + sy / cx;
}

inline PermField periodic_field(int nx, int ny, double eps) {
  if (nx < 1 || ny < 1) throw ConfigError("periodic_field: nx and ny must be >= 1");
  if (!(eps > 0.0)) throw ConfigError("periodic_field: eps must be positive");
  PermField f(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      f(i, j) = periodic_permeability((i + 0.5) / nx, (j + 0.5) / ny, eps);
  return f;
}

/// Zero-mean unit-variance Gaussian field with covariance
/// exp(-|dx|/l1 - |dy|/l2), sampled as a randomized cosine sum. The spectral
/// density of the separable exponential covariance is a product of Cauchy
/// densities, so each wave vector is drawn componentwise by inversion.
/// Cell centres are placed on [0, lx] x [0, ly].
inline std::vector<double> gaussian_field(int nx, int ny, double l1, double l2,
                                          int n_modes, std::uint64_t seed,
                                          double lx = 1.0, double ly = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<double> kx(n_modes), ky(n_modes), phase(n_modes);
  for (int m = 0; m < n_modes; ++m) {
    kx[m] = std::tan(std::numbers::pi * (detail::uniform01(rng) - 0.5)) / l1;
    ky[m] = std::tan(std::numbers::pi * (detail::uniform01(rng) - 0.5)) / l2;
    phase[m] = 2.0 * std::numbers::pi * detail::uniform01(rng);
  }
  const double scale = std::sqrt(2.0 / n_modes);
  std::vector<double> z(static_cast<std::size_t>(nx) * ny, 0.0);
  std::vector<double> row_phase(n_modes);
  for (int j = 0; j < ny; ++j) {
    const double y = (j + 0.5) * ly / ny;
    for (int m = 0; m < n_modes; ++m) row_phase[m] = ky[m] * y + phase[m];
    for (int i = 0; i < nx; ++i) {
      const double x = (i + 0.5) * lx / nx;
      double s = 0.0;
      for (int m = 0; m < n_modes; ++m) s += std::cos(kx[m] * x + row_phase[m]);
      z[static_cast<std::size_t>(j) * nx + i] = scale * s;
    }
  }
  return z;
}

/// k = exp(sigma * Z) with Z from gaussian_field on the unit square.
inline PermField correlated_lognormal(int nx, int ny, double l1, double l2, double sigma,
                                      int n_modes, std::uint64_t seed) {
  if (nx < 1 || ny < 1) throw ConfigError("correlated_lognormal: nx and ny must be >= 1");
  if (!(l1 > 0.0) || !(l2 > 0.0))
    throw ConfigError("correlated_lognormal: correlation lengths must be positive");
  if (n_modes < 1) throw ConfigError("correlated_lognormal: n_modes must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("correlated_lognormal: sigma must be >= 0");
  PermField f(nx, ny);
  if (sigma == 0.0) return f;
  const std::vector<double> z = gaussian_field(nx, ny, l1, l2, n_modes, seed);
  for (std::size_t c = 0; c < z.size(); ++c) f.values[c] = std::exp(sigma * z[c]);
  detail::check_positive(f, "correlated_lognormal");
  return f;
}

struct ChannelOptions {
  int n_streaks = 2;
  double background_sigma = 0.5;
  int n_modes = 400;
};

/// Lognormal background with meandering high-permeability streaks running
/// from the bottom row to the top row. The background is scaled so its
/// minimum is 1; streak cells get contrast times the background maximum.
inline PermField channelized_field(int nx, int ny, double contrast, std::uint64_t seed,
                                   const ChannelOptions& opt = {}) {
  if (nx < 1 || ny < 1) throw ConfigError("channelized_field: nx and ny must be >= 1");
  if (!(contrast >= 1.0)) throw ConfigError("channelized_field: contrast must be >= 1");
  if (opt.n_streaks < 0) throw ConfigError("channelized_field: n_streaks must be >= 0");

  PermField f = opt.background_sigma > 0.0
                    ? correlated_lognormal(nx, ny, 0.2, 0.05, opt.background_sigma,
                                           opt.n_modes, seed)
                    : PermField(nx, ny);
  const double lo = f.min();
  for (double& v : f.values) v /= lo;
  const double streak_value = contrast * f.max();

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const int width = std::max(1, nx / 30);
  for (int s = 0; s < opt.n_streaks; ++s) {
    const double centre = (0.2 + 0.6 * (s + detail::uniform01(rng)) / opt.n_streaks) * nx;
    const double amplitude = (0.04 + 0.08 * detail::uniform01(rng)) * nx;
    const double wavelength = (0.3 + 0.4 * detail::uniform01(rng)) * ny;
    const double phase = 2.0 * std::numbers::pi * detail::uniform01(rng);
    int prev = -1;
    for (int j = 0; j < ny; ++j) {
      const double xc = centre + amplitude * std::sin(2.0 * std::numbers::pi * j / wavelength + phase);
      int left = std::clamp(static_cast<int>(std::lround(xc - 0.5 * width)), 0, nx - width);
      int lo_i = left, hi_i = left + width;
      // Keep consecutive rows face-connected when the meander shifts.
      if (prev >= 0) {
        lo_i = std::min(lo_i, prev);
        hi_i = std::max(hi_i, prev + width);
      }
      for (int i = lo_i; i < hi_i; ++i) f(i, j) = streak_value;
      prev = left;
    }
  }
  detail::check_positive(f, "channelized_field");
  return f;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

} // namespace detail

/// Writes any cell field in the ASCII layout: "<nx> <ny>" then ny rows,
/// shortest round-trip decimal representation.
inline void write_cell_values(const std::string& path, int nx, int ny,
                              std::span<const double> values) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << nx << ' ' << ny << '\n';
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (i) out << ' ';
      out << detail::format_double(values[static_cast<std::size_t>(j) * nx + i]);
    }
    out << '\n';
  }
  if (!out) throw InputError("write to '" + path + "' failed");
}

inline void save_field(const PermField& f, const std::string& path) {
  write_cell_values(path, f.nx, f.ny, f.values);
}

struct CellValues {
  int nx = 0, ny = 0;
  std::vector<double> values;
};

/// Parses the ASCII layout. `require_positive` enforces the permeability
/// invariant; errors name the file, line and column.
inline CellValues read_cell_values(const std::string& path, bool require_positive) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open field file '" + path + "'");
  auto where = [&](int line, int col) {
    return path + ":" + std::to_string(line) + (col > 0 ? ":" + std::to_string(col) : "");
  };

  std::string line;
  if (!std::getline(in, line)) throw InputError(where(1, 0) + ": missing header");
  CellValues out;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> out.nx >> out.ny) || (hs >> extra) || out.nx < 1 || out.ny < 1)
      throw InputError(where(1, 0) + ": malformed header, expected '<nx> <ny>'");
  }
  out.values.reserve(static_cast<std::size_t>(out.nx) * out.ny);

  int lineno = 1;
  for (int j = 0; j < out.ny; ++j) {
    ++lineno;
    if (!std::getline(in, line))
      throw InputError(where(lineno, 0) + ": count mismatch, expected " +
                       std::to_string(out.ny) + " rows, found " + std::to_string(j));
    std::string_view rest(line);
    int col = 0;
    while (true) {
      const auto start = rest.find_first_not_of(" \t\r");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      const auto stop = std::min(rest.find_first_of(" \t\r"), rest.size());
      const std::string_view tok = rest.substr(0, stop);
      rest.remove_prefix(stop);
      ++col;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw InputError(where(lineno, col) + ": malformed value '" + std::string(tok) + "'");
      if (require_positive && !(v > 0.0))
        throw InputError(where(lineno, col) + ": non-positive permeability " + std::string(tok));
      if (col > out.nx)
        throw InputError(where(lineno, col) + ": count mismatch, expected " +
                         std::to_string(out.nx) + " values per row");
      out.values.push_back(v);
    }
    if (col != out.nx)
      throw InputError(where(lineno, col) + ": count mismatch, expected " +
                       std::to_string(out.nx) + " values, found " + std::to_string(col));
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      throw InputError(where(lineno, 0) + ": count mismatch, trailing data after " +
                       std::to_string(out.ny) + " rows");
  }
  return out;
}

inline PermField load_field(const std::string& path) {
  CellValues cv = read_cell_values(path, true);
  PermField f;
  f.nx = cv.nx;
  f.ny = cv.ny;
  f.values = std::move(cv.values);
  return f;
}

} // namespace msfv

#endif // MSFV_FIELDS_HPP
