// msfv: field generation, single-phase pressure solves, IMPES runs and
// run comparison from the command line.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msfv/diagnostics.hpp"
#include "msfv/error.hpp"
#include "msfv/fields.hpp"
#include "msfv/grid.hpp"
#include "msfv/multiscale.hpp"
#include "msfv/parallel.hpp"
#include "msfv/rt0.hpp"
#include "msfv/transport.hpp"
#include "msfv/twophase.hpp"
#include "msfv/version.hpp"

namespace fs = std::filesystem;
using namespace msfv;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input = 2;
constexpr int exit_numerical = 3;

// ---------------------------------------------------------------------------
// key=value configuration

using Config = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Blank lines and lines starting with '#' are ignored.
Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  Config c;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(n) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(n) + ": empty key");
    c[key] = trim(t.substr(eq + 1));
  }
  return c;
}

struct KeySpec {
  const char* key;
  const char* fallback;
};

// Resolved configuration for one command: defaults < file < flags.
class Settings {
public:
  Settings(std::vector<KeySpec> keys, const Config& file, const Config& flags) : keys_(std::move(keys)) {
    for (const auto& [k, v] : file) {
      if (!known(k)) throw ConfigError("unknown config key '" + k + "'");
      values_[k] = v;
    }
    for (const auto& [k, v] : flags) values_[k] = v;
    for (const KeySpec& s : keys_)
      if (!values_.count(s.key)) values_[s.key] = s.fallback;
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  int integer(const std::string& key) const {
    const std::string& v = str(key);
    int out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ConfigError("'" + key + "' must be an integer, got '" + v + "'");
    return out;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const std::string& v = str(key);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ConfigError("'" + key + "' must be a non-negative integer, got '" + v + "'");
    return out;
  }

  double real(const std::string& key) const {
    const std::string& v = str(key);
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
      throw ConfigError("'" + key + "' must be a number, got '" + v + "'");
    return out;
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  // Config echo: the same key=value format, so a manifest can be fed back
  // with --config.
  void write_manifest(const fs::path& path, const std::string& command) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write manifest '" + path.string() + "'");
    out << "# msfv " << msfv::version << "\n";
    out << "# command: " << command << "\n";
    out << "# workers: " << worker_count() << "\n";
    for (const KeySpec& s : keys_) out << s.key << '=' << values_.at(s.key) << '\n';
    if (!out) throw InputError("write to '" + path.string() + "' failed");
  }

private:
  bool known(const std::string& k) const {
    for (const KeySpec& s : keys_)
      if (k == s.key) return true;
    return false;
  }

  std::vector<KeySpec> keys_;
  std::map<std::string, std::string> values_;
};

const std::vector<KeySpec> field_keys = {
    {"nx", "100"},     {"ny", "100"},    {"kind", "periodic"}, {"field", ""},
    {"eps", "0.04"},   {"l1", "0.4"},    {"l2", "0.05"},       {"sigma", "1.5"},
    {"n_modes", "1000"}, {"contrast", "100"}, {"seed", "1"},
};

std::vector<KeySpec> with(std::vector<KeySpec> base, const std::vector<KeySpec>& extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  return base;
}

const std::vector<KeySpec> grid_keys = {
    {"coarse_nx", "5"}, {"coarse_ny", "5"}, {"lx", "1"}, {"ly", "1"},
    {"mu_w", "0.1"},    {"mu_o", "1"},
};

// Flags collected from the command line, keyed like the config file.
struct FlagSet {
  std::map<std::string, std::string> storage;
  std::string config_path;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option(flag, storage[key], help);
  }

  Config collect(CLI::App* app) const {
    Config out;
    for (const auto& [key, value] : storage) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (app->count("--" + flag) > 0) out[key] = value;
    }
    return out;
  }
};

void add_field_flags(CLI::App* app, FlagSet& f) {
  f.add(app, "--nx", "nx", "fine cells along x");
  f.add(app, "--ny", "ny", "fine cells along y");
  f.add(app, "--kind", "kind", "periodic | correlated | channelized | file");
  f.add(app, "--field", "field", "permeability file (implies --kind file)");
  f.add(app, "--eps", "eps", "period of the periodic field");
  f.add(app, "--l1", "l1", "correlation length along x");
  f.add(app, "--l2", "l2", "correlation length along y");
  f.add(app, "--sigma", "sigma", "log-permeability standard deviation");
  f.add(app, "--n-modes", "n_modes", "spectral modes of the Gaussian field");
  f.add(app, "--contrast", "contrast", "streak-to-background contrast");
  f.add(app, "--seed", "seed", "random seed");
}

void add_grid_flags(CLI::App* app, FlagSet& f) {
  f.add(app, "--coarse-nx", "coarse_nx", "coarse cells along x");
  f.add(app, "--coarse-ny", "coarse_ny", "coarse cells along y");
  f.add(app, "--lx", "lx", "domain length along x");
  f.add(app, "--ly", "ly", "domain length along y");
  f.add(app, "--mu-w", "mu_w", "water viscosity");
  f.add(app, "--mu-o", "mu_o", "oil viscosity");
}

// --coarse NX NY is shorthand for the two coarse keys.
void add_coarse_pair(CLI::App* app, std::vector<int>& pair) {
  app->add_option("--coarse", pair, "coarse cells along x and y")->expected(2);
}

Config merged_flags(CLI::App* app, const FlagSet& f, const std::vector<int>& coarse) {
  Config flags = f.collect(app);
  if (coarse.size() == 2) {
    flags["coarse_nx"] = std::to_string(coarse[0]);
    flags["coarse_ny"] = std::to_string(coarse[1]);
  }
  return flags;
}

Settings resolve(const std::vector<KeySpec>& keys, const std::string& config_path, Config flags) {
  const Config file = config_path.empty() ? Config{} : load_config(config_path);
  const bool kind_given = file.count("kind") || flags.count("kind");
  const bool field_given = (file.count("field") && !file.at("field").empty()) || flags.count("field");
  if (field_given && !kind_given) flags["kind"] = "file";
  return Settings(keys, file, flags);
}

// ---------------------------------------------------------------------------
// field construction

PermField make_field(const Settings& s) {
  const std::string kind = s.str("kind");
  const int nx = s.integer("nx"), ny = s.integer("ny");
  if (nx < 1 || ny < 1) throw ConfigError("nx and ny must be >= 1");
  if (kind == "periodic") {
    const double eps = s.real("eps");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    return periodic_field(nx, ny, eps);
  }
  if (kind == "correlated")
    return correlated_lognormal(nx, ny, s.real("l1"), s.real("l2"), s.real("sigma"),
                                s.integer("n_modes"), s.unsigned_integer("seed"));
  if (kind == "channelized") return channelized_field(nx, ny, s.real("contrast"), s.unsigned_integer("seed"));
  if (kind == "file") {
    if (s.str("field").empty()) throw ConfigError("kind=file needs a field path");
    PermField k = load_field(s.str("field"));
    if (k.nx != nx || k.ny != ny)
      throw InputError("field file '" + s.str("field") + "' is " + std::to_string(k.nx) + "x" +
                       std::to_string(k.ny) + " but the grid is " + std::to_string(nx) + "x" +
                       std::to_string(ny));
    return k;
  }
  throw ConfigError("unknown field kind '" + kind + "' (expected periodic, correlated, channelized or file)");
}

// With a field file and no explicit dims the grid follows the file.
Config dims_from_field_file(const std::string& config_path, Config flags) {
  const Config file = config_path.empty() ? Config{} : load_config(config_path);
  std::string path;
  if (flags.count("field")) path = flags["field"];
  else if (file.count("field")) path = file.at("field");
  if (path.empty()) return flags;
  const bool has_nx = flags.count("nx") || file.count("nx");
  const bool has_ny = flags.count("ny") || file.count("ny");
  if (has_nx && has_ny) return flags;
  const PermField k = load_field(path);
  if (!has_nx) flags["nx"] = std::to_string(k.nx);
  if (!has_ny) flags["ny"] = std::to_string(k.ny);
  return flags;
}

FluidModel make_fluid(const Settings& s) {
  FluidModel fm{s.real("mu_w"), s.real("mu_o")};
  fm.validate();
  return fm;
}

GridHierarchy make_hierarchy(const Settings& s) {
  return build_hierarchy(s.integer("nx"), s.integer("ny"), s.integer("coarse_nx"),
                         s.integer("coarse_ny"), s.real("lx"), s.real("ly"));
}

// ---------------------------------------------------------------------------
// output helpers

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw InputError("cannot open '" + p.string() + "' for writing");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw InputError("cannot create output directory '" + dir.string() + "'");
}

std::string snapshot_name(const std::string& method, std::size_t step) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", step + 1);
  return "sat_" + method + "_" + buf + ".txt";
}

// ---------------------------------------------------------------------------
// run loading for compare

struct LoadedRun {
  fs::path dir;
  std::vector<std::string> methods;
  std::vector<double> watercut_pvi;
  std::vector<std::vector<double>> watercut; // per method
  std::vector<double> snapshot_pvi;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw InputError(where + ": malformed number '" + text + "'");
  return v;
}

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.dir = dir;
  const fs::path csv = dir / "watercut.csv";
  std::ifstream in(csv);
  if (!in) throw InputError("cannot open '" + csv.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError(csv.string() + ": empty file");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "pvi")
    throw InputError(csv.string() + ":1: expected header 'pvi,watercut_<method>...'");
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].rfind("watercut_", 0) != 0)
      throw InputError(csv.string() + ":1: unexpected column '" + header[c] + "'");
    run.methods.push_back(header[c].substr(9));
  }
  run.watercut.resize(run.methods.size());
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = csv.string() + ":" + std::to_string(n);
    if (cells.size() != header.size()) throw InputError(where + ": wrong number of columns");
    run.watercut_pvi.push_back(parse_number(cells[0], where));
    for (std::size_t c = 1; c < cells.size(); ++c) run.watercut[c - 1].push_back(parse_number(cells[c], where));
  }

  const fs::path snaps = dir / "snapshots.csv";
  std::ifstream sin(snaps);
  if (!sin) throw InputError("cannot open '" + snaps.string() + "'");
  std::getline(sin, line);
  n = 1;
  while (std::getline(sin, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = snaps.string() + ":" + std::to_string(n);
    if (cells.size() != 2) throw InputError(where + ": expected 'step,pvi'");
    run.snapshot_pvi.push_back(parse_number(cells[1], where));
  }
  return run;
}

SimulationResult result_of(const LoadedRun& run, const std::string& method) {
  const auto it = std::find(run.methods.begin(), run.methods.end(), method);
  if (it == run.methods.end())
    throw InputError("run '" + run.dir.string() + "' has no method '" + method + "'");
  const std::size_t m = static_cast<std::size_t>(it - run.methods.begin());
  SimulationResult r;
  r.method = method;
  r.watercut_pvi = run.watercut_pvi;
  r.watercut = run.watercut[m];
  r.snapshot_pvi = run.snapshot_pvi;
  for (std::size_t i = 0; i < run.snapshot_pvi.size(); ++i) {
    const CellValues v = read_cell_values((run.dir / snapshot_name(method, i)).string(), false);
    if (i == 0) {
      r.nx = v.nx;
      r.ny = v.ny;
    } else if (v.nx != r.nx || v.ny != r.ny) {
      throw InputError("snapshot sizes differ within run '" + run.dir.string() + "'");
    }
    r.snapshots.push_back(v.values);
  }
  return r;
}

void print_comparison(std::ostream& out, const Comparison& c, const std::vector<double>& pvi) {
  out << "avg_sat_error=" << fmt12(c.avg_sat_error) << '\n';
  out << "watercut_error=" << fmt12(c.watercut_error) << '\n';
  out << "pvi,sat_error\n";
  for (std::size_t i = 0; i < c.sat_error_series.size(); ++i)
    out << fmt12(pvi[i]) << ',' << fmt12(c.sat_error_series[i]) << '\n';
}

// ---------------------------------------------------------------------------
// commands

struct GenFieldArgs {
  FlagSet flags;
  std::string out;
};

int cmd_gen_field(CLI::App* app, GenFieldArgs& a) {
  Config flags = a.flags.collect(app);
  const Settings s = resolve(field_keys, a.flags.config_path, flags);
  if (s.str("kind") == "file") throw ConfigError("gen-field needs a generator kind, not a file");
  const PermField k = make_field(s);
  save_field(k, a.out);
  s.write_manifest(a.out + ".manifest", "gen-field");
  std::cout << "wrote " << a.out << " (" << k.nx << "x" << k.ny << ", min " << fmt12(k.min())
            << ", max " << fmt12(k.max()) << ")\n";
  return exit_ok;
}

struct SimulateArgs {
  FlagSet flags;
  std::vector<int> coarse;
};

const std::vector<KeySpec> simulate_keys = with(
    with(field_keys, grid_keys),
    {{"methods", "fine-reference,msfv-local,msfv-global"}, {"dt_pressure", "0.1"},
     {"n_pressure", "10"}, {"n_substeps", "10"}, {"out", "run"}});

int cmd_simulate(CLI::App* app, SimulateArgs& a) {
  Config flags = dims_from_field_file(a.flags.config_path, merged_flags(app, a.flags, a.coarse));
  const Settings s = resolve(simulate_keys, a.flags.config_path, flags);

  // Validate everything before any compute.
  const GridHierarchy h = make_hierarchy(s);
  const FluidModel fm = make_fluid(s);
  Schedule sched{s.real("dt_pressure"), s.integer("n_pressure"), s.integer("n_substeps")};
  sched.validate();
  std::vector<PressureMethod> methods;
  for (const std::string& m : s.list("methods")) methods.push_back(parse_method(m));
  if (methods.empty()) throw ConfigError("methods must name at least one method");
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (methods[i] == methods[j]) throw ConfigError("method '" + to_string(methods[i]) + "' listed twice");
  const PermField k = make_field(s);
  const fs::path dir = s.str("out");
  ensure_dir(dir);
  s.write_manifest(dir / "manifest.txt", "simulate");

  const Wells wells = pvi_wells(h.fine());
  std::vector<SimulationResult> results;
  std::ofstream diag_log = open_out(dir / "diagnostics.log");
  for (PressureMethod m : methods) {
    Diagnostics diag;
    std::cerr << "running " << to_string(m) << "\n";
    results.push_back(run_impes(h, k, fm, wells, m, sched, {}, &diag));
    for (const std::string& e : diag.events()) diag_log << to_string(m) << ": " << e << '\n';
    const SimulationResult& r = results.back();
    const double balance = r.water_injected - r.water_produced - r.water_stored;
    std::cout << to_string(m) << ": final water-cut " << fmt12(r.watercut.back())
              << ", water balance " << fmt12(balance) << ", events " << diag.size() << '\n';
  }

  std::ofstream csv = open_out(dir / "watercut.csv");
  csv << "pvi";
  for (const auto& r : results) csv << ",watercut_" << r.method;
  csv << '\n';
  for (std::size_t i = 0; i < results.front().watercut.size(); ++i) {
    csv << fmt12(results.front().watercut_pvi[i]);
    for (const auto& r : results) csv << ',' << fmt12(r.watercut[i]);
    csv << '\n';
  }
  std::ofstream snaps = open_out(dir / "snapshots.csv");
  snaps << "step,pvi\n";
  for (std::size_t i = 0; i < results.front().snapshot_pvi.size(); ++i)
    snaps << i + 1 << ',' << fmt12(results.front().snapshot_pvi[i]) << '\n';
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.snapshots.size(); ++i)
      write_cell_values((dir / snapshot_name(r.method, i)).string(), r.nx, r.ny, r.snapshots[i]);

  const auto ref = std::find_if(results.begin(), results.end(),
                                [](const SimulationResult& r) { return r.method == "fine-reference"; });
  if (ref != results.end() && results.size() > 1) {
    std::ofstream errs = open_out(dir / "errors.csv");
    std::ofstream series = open_out(dir / "sat_errors.csv");
    errs << "method,avg_sat_error,watercut_error\n";
    series << "pvi";
    std::vector<Comparison> comps;
    for (const auto& r : results) {
      if (&r == &*ref) continue;
      comps.push_back(compare(r, *ref));
      errs << r.method << ',' << fmt12(comps.back().avg_sat_error) << ','
           << fmt12(comps.back().watercut_error) << '\n';
      std::cout << r.method << ": avg saturation error " << fmt12(comps.back().avg_sat_error)
                << ", water-cut error " << fmt12(comps.back().watercut_error) << '\n';
      series << ",sat_error_" << r.method;
    }
    series << '\n';
    for (std::size_t i = 0; i < ref->snapshot_pvi.size(); ++i) {
      series << fmt12(ref->snapshot_pvi[i]);
      for (const auto& c : comps) series << ',' << fmt12(c.sat_error_series[i]);
      series << '\n';
    }
  }
  return exit_ok;
}

struct CompareArgs {
  std::string run_a, run_b, method_a, method_b, out;
};

int cmd_compare(CompareArgs& a) {
  const LoadedRun ra = load_run(a.run_a);
  const LoadedRun rb = load_run(a.run_b);
  const std::string ma = a.method_a.empty() ? ra.methods.front() : a.method_a;
  const std::string mb = a.method_b.empty() ? rb.methods.front() : a.method_b;
  const SimulationResult sa = result_of(ra, ma);
  const SimulationResult sb = result_of(rb, mb);
  const Comparison c = compare(sa, sb);
  print_comparison(std::cout, c, sb.snapshot_pvi);
  if (!a.out.empty()) {
    std::ofstream out = open_out(a.out);
    out << "# " << a.run_a << ':' << ma << " vs " << a.run_b << ':' << mb << '\n';
    print_comparison(out, c, sb.snapshot_pvi);
  }
  return exit_ok;
}

struct SolvePressureArgs {
  FlagSet flags;
  std::vector<int> coarse;
};

const std::vector<KeySpec> pressure_keys =
    with(with(field_keys, grid_keys), {{"method", "fine-reference"}, {"out", "pressure"}});

int cmd_solve_pressure(CLI::App* app, SolvePressureArgs& a) {
  Config flags = dims_from_field_file(a.flags.config_path, merged_flags(app, a.flags, a.coarse));
  const Settings s = resolve(pressure_keys, a.flags.config_path, flags);
  const GridHierarchy h = make_hierarchy(s);
  const PressureMethod method = parse_method(s.str("method"));
  const PermField k = make_field(s);
  const fs::path dir = s.str("out");
  ensure_dir(dir);
  s.write_manifest(dir / "manifest.txt", "solve-pressure");

  const FineGrid& g = h.fine();
  const Wells wells = pvi_wells(g);
  const std::vector<double> source = wells.source_density(g);
  FineVelocity velocity;
  Diagnostics diag;
  if (method == PressureMethod::fine_reference) {
    DarcySolution sol = solve_darcy(g, k, source, LinearSolverKind::direct);
    write_cell_values((dir / "pressure.txt").string(), g.nx, g.ny, sol.pressure);
    velocity = std::move(sol.velocity);
  } else {
    FineVelocity global;
    BasisProfile profile = BasisProfile::constant();
    if (method == PressureMethod::msfv_global) {
      global = single_phase_global(g, k, wells);
      profile = BasisProfile::from_global(global);
    }
    const MultiscaleSolver solver(h, k, profile, &diag);
    MultiscaleSolver::Result r = solver.solve(k.values, source);
    const std::vector<double> p(r.coarse.p.data(), r.coarse.p.data() + r.coarse.p.size());
    write_cell_values((dir / "pressure.txt").string(), h.coarse_nx(), h.coarse_ny(), p);
    velocity = std::move(r.fine.velocity);
  }
  write_cell_values((dir / "vx.txt").string(), g.nx + 1, g.ny, velocity.x_values());
  write_cell_values((dir / "vy.txt").string(), g.nx, g.ny + 1, velocity.y_values());
  std::cout << to_string(method) << ": max cell conservation residual "
            << fmt12(max_conservation_residual(g, velocity, source)) << '\n';
  for (const std::string& e : diag.events()) std::cerr << "note: " << e << '\n';
  return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed multiscale finite volume flow simulator"};
  app.set_version_flag("--version", std::string(msfv::version));
  app.require_subcommand(1);

  GenFieldArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-field", "generate a permeability field file");
  gen_cmd->add_option("--config", gen.flags.config_path, "key=value config file");
  add_field_flags(gen_cmd, gen.flags);
  gen_cmd->add_option("-o,--out", gen.out, "output field file")->required();

  SimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run two-phase IMPES with the chosen pressure methods");
  sim_cmd->add_option("--config", sim.flags.config_path, "key=value config file");
  add_field_flags(sim_cmd, sim.flags);
  add_grid_flags(sim_cmd, sim.flags);
  add_coarse_pair(sim_cmd, sim.coarse);
  sim.flags.add(sim_cmd, "--methods", "methods", "comma-separated: fine-reference,msfv-local,msfv-global");
  sim.flags.add(sim_cmd, "--dt-pressure", "dt_pressure", "pressure step in PVI");
  sim.flags.add(sim_cmd, "--n-pressure", "n_pressure", "number of pressure steps");
  sim.flags.add(sim_cmd, "--n-substeps", "n_substeps", "saturation substeps per pressure step");
  sim.flags.add(sim_cmd, "-o,--out", "out", "output directory");

  CompareArgs cmp;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "error norms of run A against reference run B");
  cmp_cmd->add_option("run_a", cmp.run_a, "result run directory")->required();
  cmp_cmd->add_option("run_b", cmp.run_b, "reference run directory")->required();
  cmp_cmd->add_option("--method-a", cmp.method_a, "method column of run A (default: first)");
  cmp_cmd->add_option("--method-b", cmp.method_b, "method column of run B (default: first)");
  cmp_cmd->add_option("-o,--out", cmp.out, "also write the summary to this file");

  SolvePressureArgs sp;
  CLI::App* sp_cmd = app.add_subcommand("solve-pressure", "single-phase quarter five-spot pressure solve");
  sp_cmd->add_option("--config", sp.flags.config_path, "key=value config file");
  add_field_flags(sp_cmd, sp.flags);
  add_grid_flags(sp_cmd, sp.flags);
  add_coarse_pair(sp_cmd, sp.coarse);
  sp.flags.add(sp_cmd, "--method", "method", "fine-reference | msfv-local | msfv-global");
  sp.flags.add(sp_cmd, "-o,--out", "out", "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_input;
  }

  try {
    if (*gen_cmd) return cmd_gen_field(gen_cmd, gen);
    if (*sim_cmd) return cmd_simulate(sim_cmd, sim);
    if (*cmp_cmd) return cmd_compare(cmp);
    if (*sp_cmd) return cmd_solve_pressure(sp_cmd, sp);
  } catch (const msfv::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.category() == ErrorCategory::input ? exit_input : exit_numerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_numerical;
  }
  return exit_ok;
}
