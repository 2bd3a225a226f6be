#include "pel/run.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pel/diagnostics.hpp"
#include "pel/errors.hpp"
#include "pel/profiles.hpp"

namespace pel {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

[[noreturn]] void bad_config(const std::string& msg) {
  fail(ErrorCode::config, msg);
}

std::string join_key(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

const json* find_key(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    if (!known)
      bad_config("unknown config key \"" + join_key(section, item.key()) +
                 "\"");
  }
}

const json& require_section(const json& v, const std::string& path) {
  if (!v.is_object()) bad_config("\"" + path + "\" must be an object");
  return v;
}

double get_number(const json& obj, const std::string& section, const char* key,
                  double fallback) {
  const json* v = find_key(obj, key);
  if (!v) return fallback;
  if (!v->is_number())
    bad_config("\"" + join_key(section, key) + "\" must be a number");
  return v->get<double>();
}

std::size_t get_count(const json& obj, const std::string& section,
                      const char* key, std::size_t fallback) {
  const json* v = find_key(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<long long>() < 0)
    bad_config("\"" + join_key(section, key) +
               "\" must be a non-negative integer");
  return static_cast<std::size_t>(v->get<long long>());
}

int get_int(const json& obj, const std::string& section, const char* key,
            int fallback) {
  const json* v = find_key(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer())
    bad_config("\"" + join_key(section, key) + "\" must be an integer");
  return v->get<int>();
}

const char* grading_name(Grading g) {
  return g == Grading::uniform ? "uniform" : "geometric";
}

Grading parse_grading(const std::string& s, const std::string& path) {
  if (s == "uniform") return Grading::uniform;
  if (s == "geometric") return Grading::geometric;
  bad_config("\"" + path + "\" must be \"uniform\" or \"geometric\"");
}

const char* damping_name(DampingTreatment d) {
  return d == DampingTreatment::implicit_average ? "implicit_average"
                                                 : "explicit_forward";
}

DampingTreatment parse_damping(const std::string& s, const std::string& path) {
  if (s == "implicit_average") return DampingTreatment::implicit_average;
  if (s == "explicit_forward") return DampingTreatment::explicit_forward;
  bad_config("\"" + path +
             "\" must be \"implicit_average\" or \"explicit_forward\"");
}

const char* family_name(BumpFamily f) {
  switch (f) {
    case BumpFamily::zero:
      return "zero";
    case BumpFamily::rational:
      return "rational";
    case BumpFamily::scaled_generator:
      return "scaled_generator";
    case BumpFamily::random_rational:
      return "random_rational";
  }
  return "rational";
}

BumpFamily parse_family(const std::string& s, const std::string& path) {
  if (s == "zero") return BumpFamily::zero;
  if (s == "rational") return BumpFamily::rational;
  if (s == "scaled_generator") return BumpFamily::scaled_generator;
  if (s == "random_rational") return BumpFamily::random_rational;
  bad_config("\"" + path +
             "\" must be one of \"zero\", \"rational\", \"scaled_generator\", "
             "\"random_rational\"");
}

const char* source_name(LambdaSource s) {
  return s == LambdaSource::orthogonality_rootfind ? "orthogonality_rootfind"
                                                   : "ode63";
}

LambdaSource parse_source(const std::string& s, const std::string& path) {
  if (s == "orthogonality_rootfind") return LambdaSource::orthogonality_rootfind;
  if (s == "ode63") return LambdaSource::ode63;
  bad_config("\"" + path +
             "\" must be \"orthogonality_rootfind\" or \"ode63\"");
}

std::vector<double> get_number_array(const json& obj, const std::string& section,
                                     const char* key) {
  const json* v = find_key(obj, key);
  if (!v) return {};
  if (!v->is_array())
    bad_config("\"" + join_key(section, key) + "\" must be an array");
  std::vector<double> out;
  for (const json& e : *v) {
    if (!e.is_number())
      bad_config("\"" + join_key(section, key) +
                 "\" entries must all be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> get_int_array(const json& obj, const std::string& section,
                               const char* key) {
  const json* v = find_key(obj, key);
  if (!v) return {};
  if (!v->is_array())
    bad_config("\"" + join_key(section, key) + "\" must be an array");
  std::vector<int> out;
  for (const json& e : *v) {
    if (!e.is_number_integer())
      bad_config("\"" + join_key(section, key) +
                 "\" entries must all be integers");
    out.push_back(e.get<int>());
  }
  return out;
}

struct SweepPoint {
  std::size_t index = 0;
  RunConfig cfg;
  std::string dirname;
};

std::vector<SweepPoint> expand_sweep(const RunConfig& base) {
  std::vector<double> eps = base.sweep.epsilon.empty()
                                ? std::vector<double>{base.initial.epsilon}
                                : base.sweep.epsilon;
  std::vector<int> ks = base.sweep.k.empty() ? std::vector<int>{base.initial.k}
                                             : base.sweep.k;
  std::vector<double> amps =
      base.sweep.u0_amplitude.empty()
          ? std::vector<double>{base.initial.u0_amplitude}
          : base.sweep.u0_amplitude;
  std::vector<SweepPoint> points;
  std::size_t idx = 0;
  for (double e : eps) {
    for (int k : ks) {
      for (double a : amps) {
        SweepPoint p;
        p.index = idx;
        p.cfg = base;
        p.cfg.sweep = SweepAxes{};
        p.cfg.initial.epsilon = e;
        p.cfg.initial.k = k;
        p.cfg.initial.u0_amplitude = a;
        char buf[160];
        std::snprintf(buf, sizeof buf, "point_%03zu_eps%g_k%d_amp%g", idx, e,
                      k, a);
        p.dirname = buf;
        points.push_back(std::move(p));
        ++idx;
      }
    }
  }
  return points;
}

void validate_config(const RunConfig& cfg) {
  try {
    (void)RadialGrid::build(cfg.grid);
  } catch (const Error& e) {
    bad_config(std::string("grid: ") + e.what());
  }
  try {
    validate_scheme(cfg.scheme);
  } catch (const Error& e) {
    bad_config(std::string("scheme: ") + e.what());
  }
  try {
    validate(cfg.initial);
  } catch (const Error& e) {
    bad_config(std::string("initial: ") + e.what());
  }
  if (!(cfg.diagnostics.delta > 0.0 && cfg.diagnostics.delta < 1.0))
    bad_config("\"diagnostics.delta\" must lie strictly between 0 and 1");
  if (!(cfg.diagnostics.cone_slope >= 0.0) ||
      !std::isfinite(cfg.diagnostics.cone_slope))
    bad_config("\"diagnostics.cone_slope\" must be a non-negative number");
  if (!(cfg.diagnostics.c0_sq > 1.0 && cfg.diagnostics.c0_sq < 2.0))
    bad_config("\"diagnostics.c0_sq\" must lie strictly between 1 and 2");
  if (cfg.output.stride == 0)
    bad_config("\"output.stride\" must be at least 1");
  if (!(cfg.stop.t_end > 0.0) || !std::isfinite(cfg.stop.t_end))
    bad_config("\"stop.t_end\" must be a positive number");
  if (!(cfg.stop.lambda_stop > 0.0))
    bad_config("\"stop.lambda_stop\" must be positive");
  if (!(cfg.stop.resolution_margin >= 1.0))
    bad_config("\"stop.resolution_margin\" must be at least 1");
  for (const SweepPoint& p : expand_sweep(cfg)) {
    try {
      validate(p.cfg.initial);
    } catch (const Error& e) {
      bad_config("sweep point " + p.dirname + ": " + e.what());
    }
  }
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["schema"] = kConfigSchema;
  j["grid"] = {{"r_max", cfg.grid.r_max},
               {"n", cfg.grid.n},
               {"grading", grading_name(cfg.grid.grading)},
               {"ratio", cfg.grid.ratio}};
  json scheme;
  if (cfg.dt_auto)
    scheme["dt"] = "auto";
  else
    scheme["dt"] = cfg.scheme.dt;
  scheme["theta"] = cfg.scheme.theta;
  scheme["damping"] = damping_name(cfg.scheme.damping);
  scheme["r_min_guard"] = cfg.scheme.r_min_guard;
  scheme["cfl_safety"] = cfg.scheme.cfl_safety;
  j["scheme"] = scheme;
  j["initial"] = {{"epsilon", cfg.initial.epsilon},
                  {"c_small", cfg.initial.c_small},
                  {"k", cfg.initial.k},
                  {"u0_family", family_name(cfg.initial.u0_family)},
                  {"u0_amplitude", cfg.initial.u0_amplitude},
                  {"g0_family", family_name(cfg.initial.g0_family)},
                  {"g0_amplitude", cfg.initial.g0_amplitude},
                  {"seed", cfg.initial.seed}};
  j["output"] = {{"stride", cfg.output.stride},
                 {"snapshot_rows", cfg.output.snapshot_rows},
                 {"checkpoint_rows", cfg.output.checkpoint_rows}};
  j["diagnostics"] = {{"delta", cfg.diagnostics.delta},
                      {"cone_slope", cfg.diagnostics.cone_slope},
                      {"c0_sq", cfg.diagnostics.c0_sq}};
  j["modulation"] = {{"source", source_name(cfg.lambda_source)}};
  j["stop"] = {{"t_end", cfg.stop.t_end},
               {"lambda_stop", cfg.stop.lambda_stop},
               {"resolution_margin", cfg.stop.resolution_margin}};
  json sweep = json::object();
  if (!cfg.sweep.epsilon.empty()) sweep["epsilon"] = cfg.sweep.epsilon;
  if (!cfg.sweep.k.empty()) sweep["k"] = cfg.sweep.k;
  if (!cfg.sweep.u0_amplitude.empty())
    sweep["u0_amplitude"] = cfg.sweep.u0_amplitude;
  if (!sweep.empty()) j["sweep"] = sweep;
  return j;
}

// ---------------------------------------------------------------------------
// Shared run machinery
// ---------------------------------------------------------------------------

ProfileConstants constants_for(int k) {
  static std::mutex mu;
  static std::map<int, ProfileConstants> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;
  GridSpec spec;
  spec.r_max = 2e4;
  spec.n = 262144;
  spec.grading = Grading::geometric;
  spec.ratio = 1.00011;
  RadialGrid oracle = RadialGrid::build(spec);
  ProfileConstants c = profile_constants(k, oracle);
  cache.emplace(k, c);
  return c;
}

double resolve_dt(const RunConfig& cfg, const RadialGrid& g) {
  if (!cfg.dt_auto) return cfg.scheme.dt;
  return 0.98 * cfg.scheme.cfl_safety * cfl_limit(g, cfg.initial.k);
}

constexpr const char kCsvHeader[] =
    "t,lambda,lambda_dot,gamma,focus_monitor,alpha_coeff,key1_residual,"
    "key2_residual,divergence_metric,E,E_excess,bogomolnyi_integrand_norm,"
    "completion_gap,E0,h_quadratic,h_dissipation,h_weighted_rate,weighted,"
    "exterior,e_delta,dissipation_residual,weighted_dissipation_running,"
    "out_of_sector\n";

std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_row(const ModulationTrack& tr, std::size_t j,
                    const EnergyReport& rep, double accumulated) {
  std::string s;
  s.reserve(512);
  auto add = [&s](double v) {
    s += fmt_g17(v);
    s += ',';
  };
  add(tr.times[j]);
  add(tr.lambda[j]);
  add(tr.lambda_dot[j]);
  add(tr.gamma[j]);
  add(tr.focus_monitor[j]);
  add(tr.alpha_coeff[j]);
  add(tr.key1_residual[j]);
  add(tr.key2_residual[j]);
  add(tr.divergence_metric[j]);
  add(rep.E);
  add(rep.E_excess);
  add(rep.bogomolnyi_integrand_norm);
  add(rep.completion_gap);
  add(rep.E0);
  add(rep.h_energy.quadratic);
  add(rep.h_energy.dissipation);
  add(rep.h_energy.weighted_rate);
  add(rep.weighted);
  add(rep.exterior);
  add(rep.e_delta);
  add(rep.dissipation_residual);
  add(accumulated);
  s += rep.out_of_sector ? '1' : '0';
  s += '\n';
  return s;
}

constexpr char kCkptMagic[8] = {'P', 'E', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void put_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorCode::io, "truncated or unreadable checkpoint");
  return v;
}

struct Sample {
  FieldState state;
  double lambda = 0.0;
  double lambda_dot = 0.0;
};

// One trajectory with its ring-buffered report pipeline. Rows are flushed
// one sample late so every interior row sees a centered window for the
// e_delta time derivative and the three-snapshot dissipation balance.
class RunDriver {
 public:
  RunDriver(const RunConfig& cfg, std::string out_dir)
      : cfg_(cfg), dir_(std::move(out_dir)) {
    fs::create_directories(dir_);
    grid_ = std::make_shared<const RadialGrid>(RadialGrid::build(cfg_.grid));
    consts_ = constants_for(cfg_.initial.k);
    dt_ = resolve_dt(cfg_, *grid_);
    scheme_ = cfg_.scheme;
    scheme_.dt = dt_;
    validate_scheme(scheme_);
    InitialBuild build = build_initial(cfg_.initial, grid_);
    state_ = std::move(build.state);
    tracker_ = std::make_unique<ModulationTracker>(
        build.seed.lambda0, cfg_.lambda_source, consts_, grid_);
    const std::string csv_path = dir_ + "/series.csv";
    csv_.open(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv_)
      fail(ErrorCode::io, "cannot open " + csv_path + " for writing");
    csv_ << kCsvHeader;
    csv_.flush();
    csv_offset_ = sizeof kCsvHeader - 1;
    on_sample(state_);
  }

  static RunDriver resume_from(const std::string& checkpoint_path) {
    std::ifstream in(checkpoint_path, std::ios::binary);
    if (!in)
      fail(ErrorCode::io, "cannot open checkpoint " + checkpoint_path);
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCkptMagic, sizeof magic) != 0)
      fail(ErrorCode::io, checkpoint_path + " is not a checkpoint file");
    const auto version = get_raw<std::uint32_t>(in);
    if (version != kCkptVersion)
      fail(ErrorCode::io, "unsupported checkpoint version " +
                              std::to_string(version));
    const auto text_len = get_raw<std::uint64_t>(in);
    std::string text(text_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(text_len));
    if (!in) fail(ErrorCode::io, "truncated or unreadable checkpoint");
    RunConfig cfg = parse_config(text);
    std::string dir = fs::path(checkpoint_path).parent_path().string();
    if (dir.empty()) dir = ".";
    return RunDriver(cfg, std::move(dir), in);
  }

  RunResult drive() {
    const auto wall_start = std::chrono::steady_clock::now();
    StopReason stop = StopReason::t_end;
    const std::size_t n_end =
        static_cast<std::size_t>(std::floor(cfg_.stop.t_end / dt_ + 1e-9));
    bool done = stop_hit(&stop);  // the seed scale may already be out of range
    while (!done) {
      if (step_index_ >= n_end) {
        stop = StopReason::t_end;
        break;
      }
      try {
        state_ = step(state_, scheme_);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::nan_detected) {
          stop = StopReason::nan;
          break;
        }
        throw;  // other failures propagate; the last checkpoint stays on disk
      }
      ++step_index_;
      if (step_index_ % cfg_.output.stride == 0) {
        on_sample(state_);
        done = stop_hit(&stop);
        if (!done && cfg_.output.checkpoint_rows > 0 && rows_written_ > 0 &&
            rows_written_ % cfg_.output.checkpoint_rows == 0)
          write_checkpoint();
      }
    }
    finalize_pending(nullptr);
    save_state_file(state_, dir_ + "/final_state.pelstate");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      wall_start)
            .count();
    RunResult result;
    result.stop = stop;
    result.steps = step_index_;
    result.rows = rows_written_;
    result.t_final = state_.t;
    result.lambda_final = tracker_->track().lambda.back();
    result.manifest_json = write_manifest(stop, wall);
    return result;
  }

 private:
  // Resume body: `in` is positioned just past the embedded config text.
  RunDriver(const RunConfig& cfg, std::string out_dir, std::ifstream& in)
      : cfg_(cfg), dir_(std::move(out_dir)) {
    grid_ = std::make_shared<const RadialGrid>(RadialGrid::build(cfg_.grid));
    consts_ = constants_for(cfg_.initial.k);
    dt_ = get_raw<double>(in);
    scheme_ = cfg_.scheme;
    scheme_.dt = dt_;
    validate_scheme(scheme_);
    step_index_ = get_raw<std::uint64_t>(in);
    rows_written_ = get_raw<std::uint64_t>(in);
    csv_offset_ = get_raw<std::uint64_t>(in);
    const auto have_prev = get_raw<std::uint8_t>(in);
    if (have_prev) {
      Sample s;
      s.state = load_checkpoint_state(in);
      s.lambda = get_raw<double>(in);
      s.lambda_dot = get_raw<double>(in);
      prev_ = std::move(s);
    }
    Sample pend;
    pend.state = load_checkpoint_state(in);
    pend.lambda = get_raw<double>(in);
    pend.lambda_dot = get_raw<double>(in);
    pending_ = std::move(pend);
    state_ = pending_->state;
    tracker_ = std::make_unique<ModulationTracker>(
        ModulationTracker::load(in, consts_, grid_));
    RunningTimeIntegral::Snapshot snap;
    snap.total = get_raw<double>(in);
    snap.t_prev = get_raw<double>(in);
    snap.rate_prev = get_raw<double>(in);
    snap.have_prev = get_raw<std::uint8_t>(in) != 0;
    acc_ = RunningTimeIntegral::restore(snap);
    const std::string csv_path = dir_ + "/series.csv";
    if (!fs::exists(csv_path))
      fail(ErrorCode::io, "series.csv missing next to the checkpoint");
    if (fs::file_size(csv_path) < csv_offset_)
      fail(ErrorCode::io,
           "series.csv is shorter than the checkpointed offset");
    fs::resize_file(csv_path, csv_offset_);
    csv_.open(csv_path, std::ios::binary | std::ios::app);
    if (!csv_)
      fail(ErrorCode::io, "cannot reopen " + csv_path + " for appending");
    checkpoint_written_ = true;  // the file we resumed from stays on disk
  }

  FieldState load_checkpoint_state(std::istream& in) {
    FieldState s = load_state(in);
    if (s.grid && s.grid->size() == grid_->size()) s.grid = grid_;
    return s;
  }

  bool stop_hit(StopReason* stop) const {
    const double lam = pending_->lambda;
    if (lam >= cfg_.stop.lambda_stop) {
      *stop = StopReason::lambda_stop;
      return true;
    }
    if (1.0 / lam < cfg_.stop.resolution_margin * grid_->r_first()) {
      *stop = StopReason::resolution;
      return true;
    }
    return false;
  }

  void on_sample(const FieldState& s) {
    tracker_->push(s);
    const ModulationTrack& tr = tracker_->track();
    const std::size_t j = tr.size() - 1;
    Sample cur{s, tr.lambda[j], tr.lambda_dot[j]};
    if (pending_) {
      finalize_pending(&cur);
      prev_ = std::move(pending_);
    }
    pending_ = std::move(cur);
  }

  void finalize_pending(const Sample* next) {
    if (!pending_) return;
    const std::size_t j = rows_written_;
    EnergyWindow win;
    const EnergyWindow* window = nullptr;
    if (prev_ || next) {
      if (prev_) {
        win.prev = &prev_->state;
        win.lambda_prev = prev_->lambda;
        win.lambda_dot_prev = prev_->lambda_dot;
      }
      if (next) {
        win.next = &next->state;
        win.lambda_next = next->lambda;
        win.lambda_dot_next = next->lambda_dot;
      }
      window = &win;
    }
    EnergyReport rep = energy_report(
        pending_->state, pending_->lambda, pending_->lambda_dot, consts_,
        cfg_.diagnostics.delta, *grid_, window, cfg_.diagnostics.cone_slope);
    if (prev_ && next)
      rep.dissipation_residual =
          dissipation_residual(prev_->state, pending_->state, next->state,
                               std::sqrt(cfg_.diagnostics.c0_sq), *grid_);
    acc_.push(pending_->state.t, rep.h_energy.weighted_rate);
    const std::string row = csv_row(tracker_->track(), j, rep, acc_.value());
    csv_ << row;
    csv_.flush();
    csv_offset_ += row.size();
    ++rows_written_;
    if (cfg_.output.snapshot_rows > 0 && j % cfg_.output.snapshot_rows == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%06zu.pelstate", j);
      save_state_file(pending_->state, dir_ + "/" + name);
    }
  }

  void write_checkpoint() {
    const std::string path = dir_ + "/checkpoint.pelckpt";
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::io, "cannot open " + tmp + " for writing");
      out.write(kCkptMagic, sizeof kCkptMagic);
      put_raw(out, kCkptVersion);
      const std::string text = canonical_config_json(cfg_);
      put_raw(out, static_cast<std::uint64_t>(text.size()));
      out.write(text.data(), static_cast<std::streamsize>(text.size()));
      put_raw(out, dt_);
      put_raw(out, static_cast<std::uint64_t>(step_index_));
      put_raw(out, static_cast<std::uint64_t>(rows_written_));
      put_raw(out, static_cast<std::uint64_t>(csv_offset_));
      put_raw(out, static_cast<std::uint8_t>(prev_ ? 1 : 0));
      if (prev_) {
        save_state(prev_->state, out);
        put_raw(out, prev_->lambda);
        put_raw(out, prev_->lambda_dot);
      }
      save_state(pending_->state, out);
      put_raw(out, pending_->lambda);
      put_raw(out, pending_->lambda_dot);
      tracker_->save(out);
      const RunningTimeIntegral::Snapshot snap = acc_.snapshot();
      put_raw(out, snap.total);
      put_raw(out, snap.t_prev);
      put_raw(out, snap.rate_prev);
      put_raw(out, static_cast<std::uint8_t>(snap.have_prev ? 1 : 0));
      if (!out) fail(ErrorCode::io, "failed writing checkpoint " + tmp);
    }
    fs::rename(tmp, path);
    checkpoint_written_ = true;
  }

  std::string write_manifest(StopReason stop, double wall_seconds) {
    const ModulationTrack& tr = tracker_->track();
    json m;
    m["schema"] = "pel-manifest-v1";
    m["config_hash"] = config_hash(cfg_);
    m["config"] = config_to_json(cfg_);
    m["grid"] = {{"n", grid_->size()},
                 {"r_max", grid_->r_max()},
                 {"r_first", grid_->r_first()},
                 {"min_spacing", grid_->min_spacing()},
                 {"grading", grading_name(cfg_.grid.grading)},
                 {"ratio", cfg_.grid.ratio}};
    m["dt"] = dt_;
    m["stop_reason"] = to_string(stop);
    m["steps"] = step_index_;
    m["rows"] = rows_written_;
    m["t_final"] = state_.t;
    m["lambda_final"] = tr.lambda.back();
    m["lambda_dot_final"] = tr.lambda_dot.back();
    try {
      m["k2_coefficient"] = tracker_->k2_coefficient();
    } catch (const Error&) {
      m["k2_coefficient"] = nullptr;
    }
    try {
      const TStarFit fit = estimate_t_star(tr);
      m["t_star"] = {{"value", fit.t_star},
                     {"r2", fit.r2},
                     {"window_begin", fit.window_begin}};
      const RiccatiReport rr = riccati_monitor(tr, fit.t_star);
      m["riccati"] = {{"n_samples", rr.n_samples},
                      {"lambda_dot_nonpositive", rr.lambda_dot_nonpositive},
                      {"lambda_violations", rr.lambda_violations},
                      {"lambda_flat_or_down", rr.lambda_flat_or_down},
                      {"focus_violations", rr.focus_violations},
                      {"transient_end_index", rr.transient_end_index},
                      {"transient_end_time", rr.transient_end_time},
                      {"t_star", rr.t_star},
                      {"fit_const_coeff", rr.fit_const_coeff},
                      {"fit_const_r2", rr.fit_const_r2},
                      {"fit_log_coeff", rr.fit_log_coeff},
                      {"fit_log_r2", rr.fit_log_r2}};
    } catch (const Error&) {
      m["t_star"] = nullptr;
      m["riccati"] = nullptr;
    }
    json artifacts;
    artifacts["series"] = "series.csv";
    artifacts["final_state"] = "final_state.pelstate";
    artifacts["manifest"] = "manifest.json";
    if (checkpoint_written_)
      artifacts["checkpoint"] = "checkpoint.pelckpt";
    else
      artifacts["checkpoint"] = nullptr;
    std::vector<std::string> snapshot_names;
    for (const auto& entry : fs::directory_iterator(dir_)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("snapshot_", 0) == 0 &&
          entry.path().extension() == ".pelstate")
        snapshot_names.push_back(name);
    }
    std::sort(snapshot_names.begin(), snapshot_names.end());
    artifacts["snapshots"] = snapshot_names;
    m["artifacts"] = artifacts;
    m["wall_seconds"] = wall_seconds;
    std::string text = m.dump(2);
    text += '\n';
    std::ofstream out(dir_ + "/manifest.json",
                      std::ios::binary | std::ios::trunc);
    if (!out)
      fail(ErrorCode::io, "cannot open " + dir_ + "/manifest.json");
    out << text;
    return text;
  }

  RunConfig cfg_;
  std::string dir_;
  std::shared_ptr<const RadialGrid> grid_;
  ProfileConstants consts_;
  double dt_ = 0.0;
  SchemeConfig scheme_;
  std::unique_ptr<ModulationTracker> tracker_;
  RunningTimeIntegral acc_;
  FieldState state_;
  std::optional<Sample> prev_;
  std::optional<Sample> pending_;
  std::size_t rows_written_ = 0;
  std::size_t step_index_ = 0;
  std::ofstream csv_;
  std::uint64_t csv_offset_ = 0;
  bool checkpoint_written_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, /*allow_exceptions=*/true,
                    /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    bad_config("config parse error at line " + std::to_string(line) +
               ", column " + std::to_string(column) + ": " + e.what());
  }
  if (!j.is_object()) bad_config("config root must be a JSON object");
  check_keys(j, "", {"schema", "grid", "scheme", "initial", "output",
                     "diagnostics", "modulation", "stop", "sweep"});

  const json* schema = find_key(j, "schema");
  if (!schema)
    bad_config("missing required key \"schema\" (expected \"" +
               std::string(kConfigSchema) + "\")");
  if (!schema->is_string() || schema->get<std::string>() != kConfigSchema)
    bad_config("\"schema\" must be the string \"" +
               std::string(kConfigSchema) + "\"");

  RunConfig cfg;

  if (const json* g = find_key(j, "grid")) {
    require_section(*g, "grid");
    check_keys(*g, "grid", {"r_max", "n", "grading", "ratio"});
    cfg.grid.r_max = get_number(*g, "grid", "r_max", cfg.grid.r_max);
    cfg.grid.n = get_count(*g, "grid", "n", cfg.grid.n);
    if (const json* v = find_key(*g, "grading")) {
      if (!v->is_string()) bad_config("\"grid.grading\" must be a string");
      cfg.grid.grading = parse_grading(v->get<std::string>(), "grid.grading");
    }
    cfg.grid.ratio = get_number(*g, "grid", "ratio", cfg.grid.ratio);
  }

  const json* scheme = find_key(j, "scheme");
  if (!scheme)
    bad_config(
        "missing required key \"scheme.dt\" (a positive time step, or "
        "\"auto\")");
  require_section(*scheme, "scheme");
  check_keys(*scheme, "scheme",
             {"dt", "theta", "damping", "r_min_guard", "cfl_safety"});
  const json* dt = find_key(*scheme, "dt");
  if (!dt)
    bad_config(
        "missing required key \"scheme.dt\" (a positive time step, or "
        "\"auto\")");
  if (dt->is_string()) {
    if (dt->get<std::string>() != "auto")
      bad_config("\"scheme.dt\" must be a positive number or \"auto\"");
    cfg.dt_auto = true;  // resolved from the stable wave step at run start
  } else if (dt->is_number()) {
    cfg.scheme.dt = dt->get<double>();
    if (!(cfg.scheme.dt > 0.0) || !std::isfinite(cfg.scheme.dt))
      bad_config("\"scheme.dt\" must be a positive number or \"auto\"");
  } else {
    bad_config("\"scheme.dt\" must be a positive number or \"auto\"");
  }
  cfg.scheme.theta = get_number(*scheme, "scheme", "theta", cfg.scheme.theta);
  if (const json* v = find_key(*scheme, "damping")) {
    if (!v->is_string()) bad_config("\"scheme.damping\" must be a string");
    cfg.scheme.damping =
        parse_damping(v->get<std::string>(), "scheme.damping");
  }
  cfg.scheme.r_min_guard =
      get_number(*scheme, "scheme", "r_min_guard", cfg.scheme.r_min_guard);
  cfg.scheme.cfl_safety =
      get_number(*scheme, "scheme", "cfl_safety", cfg.scheme.cfl_safety);

  if (const json* ini = find_key(j, "initial")) {
    require_section(*ini, "initial");
    check_keys(*ini, "initial",
               {"epsilon", "c_small", "k", "u0_family", "u0_amplitude",
                "g0_family", "g0_amplitude", "seed"});
    cfg.initial.epsilon =
        get_number(*ini, "initial", "epsilon", cfg.initial.epsilon);
    cfg.initial.c_small =
        get_number(*ini, "initial", "c_small", cfg.initial.c_small);
    cfg.initial.k = get_int(*ini, "initial", "k", cfg.initial.k);
    if (const json* v = find_key(*ini, "u0_family")) {
      if (!v->is_string())
        bad_config("\"initial.u0_family\" must be a string");
      cfg.initial.u0_family =
          parse_family(v->get<std::string>(), "initial.u0_family");
    }
    cfg.initial.u0_amplitude = get_number(*ini, "initial", "u0_amplitude",
                                          cfg.initial.u0_amplitude);
    if (const json* v = find_key(*ini, "g0_family")) {
      if (!v->is_string())
        bad_config("\"initial.g0_family\" must be a string");
      cfg.initial.g0_family =
          parse_family(v->get<std::string>(), "initial.g0_family");
    }
    cfg.initial.g0_amplitude = get_number(*ini, "initial", "g0_amplitude",
                                          cfg.initial.g0_amplitude);
    cfg.initial.seed = static_cast<std::uint32_t>(
        get_count(*ini, "initial", "seed", cfg.initial.seed));
  }

  if (const json* out = find_key(j, "output")) {
    require_section(*out, "output");
    check_keys(*out, "output", {"stride", "snapshot_rows", "checkpoint_rows"});
    cfg.output.stride =
        get_count(*out, "output", "stride", cfg.output.stride);
    cfg.output.snapshot_rows =
        get_count(*out, "output", "snapshot_rows", cfg.output.snapshot_rows);
    cfg.output.checkpoint_rows = get_count(*out, "output", "checkpoint_rows",
                                           cfg.output.checkpoint_rows);
  }

  if (const json* d = find_key(j, "diagnostics")) {
    require_section(*d, "diagnostics");
    check_keys(*d, "diagnostics", {"delta", "cone_slope", "c0_sq"});
    cfg.diagnostics.delta =
        get_number(*d, "diagnostics", "delta", cfg.diagnostics.delta);
    cfg.diagnostics.cone_slope = get_number(*d, "diagnostics", "cone_slope",
                                            cfg.diagnostics.cone_slope);
    cfg.diagnostics.c0_sq =
        get_number(*d, "diagnostics", "c0_sq", cfg.diagnostics.c0_sq);
  }

  if (const json* mod = find_key(j, "modulation")) {
    require_section(*mod, "modulation");
    check_keys(*mod, "modulation", {"source"});
    if (const json* v = find_key(*mod, "source")) {
      if (!v->is_string())
        bad_config("\"modulation.source\" must be a string");
      cfg.lambda_source =
          parse_source(v->get<std::string>(), "modulation.source");
    }
  }

  if (const json* st = find_key(j, "stop")) {
    require_section(*st, "stop");
    check_keys(*st, "stop", {"t_end", "lambda_stop", "resolution_margin"});
    cfg.stop.t_end = get_number(*st, "stop", "t_end", cfg.stop.t_end);
    cfg.stop.lambda_stop =
        get_number(*st, "stop", "lambda_stop", cfg.stop.lambda_stop);
    cfg.stop.resolution_margin = get_number(*st, "stop", "resolution_margin",
                                            cfg.stop.resolution_margin);
  }

  if (const json* sw = find_key(j, "sweep")) {
    require_section(*sw, "sweep");
    check_keys(*sw, "sweep", {"epsilon", "k", "u0_amplitude"});
    cfg.sweep.epsilon = get_number_array(*sw, "sweep", "epsilon");
    cfg.sweep.k = get_int_array(*sw, "sweep", "k");
    cfg.sweep.u0_amplitude = get_number_array(*sw, "sweep", "u0_amplitude");
  }

  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_config_json(const RunConfig& cfg) {
  return config_to_json(cfg).dump();
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = canonical_config_json(cfg);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::t_end:
      return "t_end";
    case StopReason::lambda_stop:
      return "lambda_stop";
    case StopReason::resolution:
      return "resolution";
    case StopReason::nan:
      return "nan";
  }
  return "t_end";
}

RunResult run_simulation(const RunConfig& cfg, const std::string& out_dir) {
  RunDriver driver(cfg, out_dir);
  return driver.drive();
}

RunResult resume_run(const std::string& checkpoint_path) {
  RunDriver driver = RunDriver::resume_from(checkpoint_path);
  return driver.drive();
}

std::vector<VerifyCheck> verify_suite(const RunConfig& cfg) {
  std::vector<VerifyCheck> checks;
  auto add = [&checks](const std::string& name, double value, double bound) {
    checks.push_back({name, value, bound, value <= bound});
  };

  auto grid = std::make_shared<const RadialGrid>(RadialGrid::build(cfg.grid));
  const RadialGrid& g = *grid;
  const int k = cfg.initial.k;
  const ProfileParams p{k, 1.0};

  // Pointwise generator identity J = k sin I at every node.
  double worst = 0.0;
  for (double r : g.nodes())
    worst = std::max(worst,
                     std::abs(k * std::sin(eval_I(p, r)) - eval_J(p, r)));
  add("profile-identity", worst, 1e-12);

  // Grid quadrature of <J, J> against its closed form 2 pi / sin(pi / k).
  const std::vector<double> J = sample_J(p, g);
  const double jj = g.inner(J, J);
  const double jj_exact = 2.0 * M_PI / std::sin(M_PI / k);
  add("generator-norm", std::abs(jj - jj_exact) / jj_exact, 1e-3);

  // Grid quadrature of <J, r^2 J> against 4 pi / sin(2 pi / k).
  const std::vector<double> r2J = sample_r2J(p, g);
  const double jr2j = g.inner(J, r2J);
  const double jr2j_exact = 4.0 * M_PI / std::sin(2.0 * M_PI / k);
  add("curvature-norm", std::abs(jr2j - jr2j_exact) / jr2j_exact, 1e-3);

  // A harmonic-map profile at rest is a steady state of the full system.
  SchemeConfig scheme = cfg.scheme;
  scheme.dt = std::min(resolve_dt(cfg, g),
                       0.98 * cfg.scheme.cfl_safety * cfl_limit(g, k));
  const std::vector<double> I_samples = sample_I(p, g);
  {
    FieldState s;
    s.k = k;
    s.grid = grid;
    s.phi = I_samples;
    s.phi_t.assign(g.size(), 0.0);
    s.v.assign(g.size(), 0.0);
    s.h.assign(g.size(), 0.0);
    for (int n = 0; n < 40; ++n) s = step(s, scheme);
    double drift = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      drift = std::max(drift, std::abs(s.phi[i] - I_samples[i]));
    add("static-preservation", drift, 1e-3);
  }

  // The primal-velocity and averaged-velocity formulations agree.
  {
    FieldState s;
    s.k = k;
    s.grid = grid;
    s.phi.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = g.nodes()[i];
      s.phi[i] = I_samples[i] + 0.01 * std::pow(r / (1.0 + r * r), k);
    }
    s.phi.back() = I_samples.back();
    s.phi_t.assign(g.size(), 0.0);
    s.v.assign(g.size(), 0.0);
    s.h.assign(g.size(), 0.0);
    FieldState a = s, b = s;
    for (int n = 0; n < 32; ++n) {
      a = step(a, scheme);
      b = step_h_formulation(b, scheme);
    }
    double num = 0.0, den = 0.0;
    std::vector<double> diff(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      diff[i] = a.v[i] - b.v[i];
    num = g.inner(diff, diff);
    den = g.inner(a.v, a.v);
    add("formulation-equivalence",
        std::sqrt(num / std::max(den, 1e-300)), 1e-2);
  }

  // The tracked scale keeps <phi - I_lambda, J_lambda> at numerical zero.
  {
    const InitialBuild build = build_initial(cfg.initial, grid);
    const ProfileConstants consts = constants_for(k);
    ModulationTracker tracker(build.seed.lambda0,
                              LambdaSource::orthogonality_rootfind, consts,
                              grid);
    FieldState s = build.state;
    double gap = 0.0;
    auto push_and_measure = [&](const FieldState& st) {
      tracker.push(st);
      const ProfileParams pj{k, tracker.track().lambda.back()};
      const std::vector<double> Jl = sample_J(pj, g);
      const std::vector<double> Il = sample_I(pj, g);
      std::vector<double> u(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) u[i] = st.phi[i] - Il[i];
      gap = std::max(gap, std::abs(g.inner(u, Jl)) / consts.c0_const);
    };
    push_and_measure(s);
    for (int block = 0; block < 4; ++block) {
      for (int n = 0; n < 12; ++n) s = step(s, scheme);
      push_and_measure(s);
    }
    add("orthogonality-maintenance", gap, 1e-8);
  }

  return checks;
}

std::string verify_table(const std::vector<VerifyCheck>& checks) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-28s  %13s  %13s  %s\n", "check",
                "value", "bound", "status");
  out += line;
  out += std::string(64, '-') + "\n";
  for (const VerifyCheck& c : checks) {
    std::snprintf(line, sizeof line, "%-28s  %13.5e  %13.5e  %s\n",
                  c.name.c_str(), c.value, c.bound,
                  c.pass ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

SweepResult run_sweep(const RunConfig& cfg, const std::string& out_dir,
                      int threads) {
  const std::vector<SweepPoint> points = expand_sweep(cfg);
  fs::create_directories(out_dir);

  struct PointOutcome {
    bool failed = false;
    std::string error;
    RunResult result;
    json manifest;
  };
  std::vector<PointOutcome> outcomes(points.size());
  std::atomic<std::size_t> cursor{0};
  const int workers = std::clamp(threads, 1, static_cast<int>(points.size()));

  auto work = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= points.size()) return;
      try {
        RunResult r =
            run_simulation(points[i].cfg, out_dir + "/" + points[i].dirname);
        outcomes[i].manifest = json::parse(r.manifest_json);
        outcomes[i].result = std::move(r);
      } catch (const std::exception& e) {
        outcomes[i].failed = true;
        outcomes[i].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }

  const double nan_value = std::numeric_limits<double>::quiet_NaN();
  std::string csv =
      "epsilon,k,u0_amplitude,dir,status,stop_reason,steps,rows,t_final,"
      "lambda_final,t_star,t_star_r2,fit_const_coeff,fit_const_r2,"
      "fit_log_coeff,fit_log_r2\n";
  json summary_points = json::array();
  std::size_t failures = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const InitialDataSpec& ini = points[i].cfg.initial;
    const PointOutcome& oc = outcomes[i];
    double t_star = nan_value, t_star_r2 = nan_value;
    double fc = nan_value, fcr2 = nan_value, fl = nan_value,
           flr2 = nan_value;
    json jp;
    jp["epsilon"] = ini.epsilon;
    jp["k"] = ini.k;
    jp["u0_amplitude"] = ini.u0_amplitude;
    jp["dir"] = points[i].dirname;
    if (oc.failed) {
      ++failures;
      jp["status"] = "failed";
      jp["error"] = oc.error;
      csv += fmt_g17(ini.epsilon) + "," + std::to_string(ini.k) + "," +
             fmt_g17(ini.u0_amplitude) + "," + points[i].dirname +
             ",failed,,0,0,nan,nan,nan,nan,nan,nan,nan,nan\n";
      summary_points.push_back(jp);
      continue;
    }
    const json& m = oc.manifest;
    if (m.contains("t_star") && m["t_star"].is_object()) {
      t_star = m["t_star"]["value"].get<double>();
      t_star_r2 = m["t_star"]["r2"].get<double>();
    }
    if (m.contains("riccati") && m["riccati"].is_object()) {
      fc = m["riccati"]["fit_const_coeff"].get<double>();
      fcr2 = m["riccati"]["fit_const_r2"].get<double>();
      fl = m["riccati"]["fit_log_coeff"].get<double>();
      flr2 = m["riccati"]["fit_log_r2"].get<double>();
    }
    jp["status"] = "ok";
    jp["stop_reason"] = to_string(oc.result.stop);
    jp["steps"] = oc.result.steps;
    jp["rows"] = oc.result.rows;
    jp["t_final"] = oc.result.t_final;
    jp["lambda_final"] = oc.result.lambda_final;
    jp["t_star"] = m["t_star"];
    jp["riccati"] = m["riccati"];
    summary_points.push_back(jp);
    csv += fmt_g17(ini.epsilon) + "," + std::to_string(ini.k) + "," +
           fmt_g17(ini.u0_amplitude) + "," + points[i].dirname + ",ok," +
           to_string(oc.result.stop) + "," +
           std::to_string(oc.result.steps) + "," +
           std::to_string(oc.result.rows) + "," +
           fmt_g17(oc.result.t_final) + "," +
           fmt_g17(oc.result.lambda_final) + "," + fmt_g17(t_star) + "," +
           fmt_g17(t_star_r2) + "," + fmt_g17(fc) + "," + fmt_g17(fcr2) +
           "," + fmt_g17(fl) + "," + fmt_g17(flr2) + "\n";
  }

  json summary;
  summary["schema"] = "pel-sweep-v1";
  summary["base_config_hash"] = config_hash(cfg);
  summary["points"] = summary_points;
  summary["failures"] = failures;
  std::string summary_text = summary.dump(2);
  summary_text += '\n';

  {
    std::ofstream out(out_dir + "/sweep_summary.csv",
                      std::ios::binary | std::ios::trunc);
    if (!out)
      fail(ErrorCode::io, "cannot open " + out_dir + "/sweep_summary.csv");
    out << csv;
  }
  {
    std::ofstream out(out_dir + "/sweep_summary.json",
                      std::ios::binary | std::ios::trunc);
    if (!out)
      fail(ErrorCode::io, "cannot open " + out_dir + "/sweep_summary.json");
    out << summary_text;
  }

  SweepResult result;
  result.points = points.size();
  result.failures = failures;
  result.summary_json = std::move(summary_text);
  return result;
}

}  // namespace pel
