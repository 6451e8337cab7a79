#include "app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "wsnm/bench.hpp"
#include "wsnm/denoise.hpp"
#include "wsnm/image.hpp"
#include "wsnm/parallel.hpp"
#include "wsnm/prox.hpp"
#include "wsnm/rpca.hpp"
#include "wsnm/version.hpp"

namespace wsnm::app {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Raised for anything the user got wrong; maps to exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { kString, kInt, kUInt, kDouble, kBool };

struct Param {
  std::string key;
  Kind kind;
  std::string help;
  Json fallback = nullptr;  // null: unset (optional or derived later)
};

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::kString: return "string";
    case Kind::kInt: return "integer";
    case Kind::kUInt: return "unsigned integer";
    case Kind::kDouble: return "number";
    case Kind::kBool: return "boolean";
  }
  return "value";
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

std::vector<Param> common_params() {
  return {
      {"out", Kind::kString, "output directory (denoise also accepts a .pgm file path)"},
      {"seed", Kind::kUInt, "base seed for generated data", 0},
      {"threads", Kind::kInt, "worker threads, 0 = all cores", 0},
      {"timings", Kind::kBool, "record wall-clock timings (false gives byte-stable outputs)", true},
  };
}

std::map<std::string, std::vector<Param>> command_params() {
  std::map<std::string, std::vector<Param>> m;
  m["denoise"] = {
      {"in", Kind::kString, "noisy input image (PGM or WSNMF64)"},
      {"clean", Kind::kString, "clean reference for PSNR"},
      {"sigma", Kind::kDouble, "noise standard deviation"},
      {"add_noise", Kind::kDouble, "treat --in as clean and add noise of this sigma"},
      {"p", Kind::kDouble, "power, chosen from sigma when unset"},
      {"K", Kind::kInt, "outer iterations"},
      {"alpha", Kind::kDouble, "iterative regularization weight", 0.1},
      {"patch_size", Kind::kInt, "patch side"},
      {"group_size", Kind::kInt, "patches per group"},
      {"search_window", Kind::kInt, "search window side", 30},
      {"key_patch_step", Kind::kInt, "stride between key patches", 3},
      {"c", Kind::kDouble, "weight constant, 2 sqrt(2) when unset"},
      {"fidelity_scale", Kind::kDouble, "fidelity weight a, 1 / sigma^2 of the working level when unset"},
      {"gamma", Kind::kDouble, "noise re-estimation factor", 1.0},
      {"reestimate_noise", Kind::kBool, "re-estimate the working noise level", true},
      {"subtract_group_mean", Kind::kBool, "center each group before shrinkage", false},
      {"dump", Kind::kBool, "also write the unclamped float result", false},
  };
  const std::vector<Param> rpca_knobs = {
      {"p", Kind::kDouble, "WSNM power", 0.7},
      {"C", Kind::kDouble, "weight scale, 10^(1/p) when unset (3e4 for --frames)"},
      {"mu0", Kind::kDouble, "initial penalty, 1 / ||Y||_2 when unset"},
      {"rho", Kind::kDouble, "penalty growth", 1.2},
      {"tol", Kind::kDouble, "relative residual tolerance", 1e-7},
      {"step_tol", Kind::kDouble, "squared step tolerance", 1e-10},
      {"max_iters", Kind::kInt, "iteration cap", 500},
      {"weight_mode", Kind::kString, "reweighted, fixed_from_y or uniform", "reweighted"},
  };
  m["rpca"] = {
      {"in", Kind::kString, "observation matrix (WSNMF64 or CSV)"},
      {"synthetic", Kind::kString, "generate input: m=..,pr=..,pe=..[,mag=..]"},
      {"frames", Kind::kString, "directory of PGM frames"},
      {"method", Kind::kString, "wsnm or nnm", "wsnm"},
      {"uniform_weight", Kind::kDouble, "weight for weight_mode uniform", 1.0},
      {"lambda", Kind::kDouble, "NNM sparse weight, 1 / sqrt(max(m, n)) when unset"},
      {"theta", Kind::kDouble, "foreground threshold in robust sigmas", kDefaultForegroundTheta},
  };
  m["rpca"].insert(m["rpca"].end(), rpca_knobs.begin(), rpca_knobs.end());
  m["sweep"] = {
      {"m", Kind::kInt, "matrix side", 150},
      {"pr_min", Kind::kDouble, "first rank fraction", 0.05},
      {"pr_max", Kind::kDouble, "last rank fraction", 0.4},
      {"pr_step", Kind::kDouble, "rank fraction step", 0.05},
      {"pe_min", Kind::kDouble, "first corruption fraction", 0.05},
      {"pe_max", Kind::kDouble, "last corruption fraction", 0.4},
      {"pe_step", Kind::kDouble, "corruption fraction step", 0.05},
      {"repeats", Kind::kInt, "repeats per cell", 3},
      {"methods", Kind::kString, "comma list of nnm, wsnm, wsnm_p<p>", "nnm,wsnm_p0.7"},
      {"full_scale", Kind::kBool, "m 300, 10 repeats, 0.01 grid from 0.01 (unset keys only)", false},
  };
  m["table"] = {
      {"m", Kind::kInt, "matrix side", 300},
      {"ranks", Kind::kString, "comma list of ranks", "15,30,45,60,75,90,105,120,135,150"},
      {"pe", Kind::kDouble, "corruption fraction", 0.05},
      {"repeats", Kind::kInt, "repeats per rank", 3},
      {"methods", Kind::kString, "comma list of nnm, wsnm, wsnm_p<p>", "nnm,wsnm_p0.7"},
  };
  for (const char* cmd : {"sweep", "table"}) {
    for (const auto& k : rpca_knobs) {
      if (k.key != "p") m[cmd].push_back(k);
    }
  }
  m["prox"] = {
      {"in", Kind::kString, "matrix (WSNMF64 or CSV)"},
      {"p", Kind::kDouble, "power", 1.0},
      {"a", Kind::kDouble, "fidelity scale", 0.5},
      {"weights", Kind::kString, "comma list of weights"},
      {"uniform_weight", Kind::kDouble, "weight for every singular value when --weights is unset", 1.0},
      {"allow_uncertified", Kind::kBool, "accept weights that are not non-descending", false},
  };
  m["metrics"] = {
      {"a", Kind::kString, "image A for PSNR / MSE"},
      {"b", Kind::kString, "image B"},
      {"mask_a", Kind::kString, "mask A (PGM, nonzero = on) for similarity"},
      {"mask_b", Kind::kString, "mask B"},
      {"x_hat", Kind::kString, "estimated matrix for relative error"},
      {"x", Kind::kString, "ground-truth matrix"},
  };
  for (auto& [name, params] : m) {
    const auto common = common_params();
    params.insert(params.begin(), common.begin(), common.end());
  }
  return m;
}

const Param* find_param(const std::vector<Param>& params, const std::string& key) {
  for (const auto& p : params) {
    if (p.key == key) return &p;
  }
  return nullptr;
}

Json parse_flag_value(const Param& p, const std::string& text) {
  auto bad = [&] {
    return UsageError("invalid value for '" + p.key + "': expected " + kind_name(p.kind) + ", got '" + text + "'");
  };
  try {
    std::size_t used = 0;
    switch (p.kind) {
      case Kind::kString: return text;
      case Kind::kInt: {
        const long long v = std::stoll(text, &used);
        if (used != text.size()) throw bad();
        return v;
      }
      case Kind::kUInt: {
        if (!text.empty() && text[0] == '-') throw bad();
        const unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) throw bad();
        return v;
      }
      case Kind::kDouble: {
        const double v = std::stod(text, &used);
        if (used != text.size()) throw bad();
        return v;
      }
      case Kind::kBool:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw bad();
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw bad();
  }
  throw bad();
}

void check_json_type(const Param& p, const Json& v) {
  bool ok = false;
  switch (p.kind) {
    case Kind::kString: ok = v.is_string(); break;
    case Kind::kInt: ok = v.is_number_integer(); break;
    case Kind::kUInt: ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); break;
    case Kind::kDouble: ok = v.is_number(); break;
    case Kind::kBool: ok = v.is_boolean(); break;
  }
  if (!ok && !v.is_null()) {
    throw UsageError("type mismatch for '" + p.key + "': expected " + kind_name(p.kind) + ", got " + v.dump());
  }
}

// Resolved parameter set: defaults < config file < flags.
class Settings {
 public:
  Settings(std::string command, std::vector<Param> params) : command_(std::move(command)), params_(std::move(params)) {
    for (const auto& p : params_) values_[p.key] = p.fallback;
  }

  void apply_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const std::exception& e) {
      throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config file " + path.string() + " must hold a JSON object");
    // a manifest can be fed back in; its echoed config is used
    if (doc.contains("config") && doc.contains("command")) {
      if (doc["command"] != command_) {
        throw UsageError("config file " + path.string() + " is a manifest for '" + doc["command"].get<std::string>() +
                         "', not '" + command_ + "'");
      }
      doc = doc["config"];
    }
    for (const auto& [key, value] : doc.items()) {
      const Param* p = find_param(params_, key);
      if (!p) throw UsageError("unknown key '" + key + "' in config file for command " + command_);
      check_json_type(*p, value);
      values_[key] = value;
      explicit_.insert(key);
    }
  }

  void apply_flag(const std::string& key, const std::string& text) {
    const Param* p = find_param(params_, key);
    values_[key] = parse_flag_value(*p, text);
    explicit_.insert(key);
  }

  bool has(const std::string& key) const {
    const auto it = values_.find(key);
    return it != values_.end() && !it->second.is_null();
  }
  bool is_explicit(const std::string& key) const { return explicit_.count(key) > 0; }
  void set(const std::string& key, Json v) { values_[key] = std::move(v); }

  std::string str(const std::string& key) const { return get(key).get<std::string>(); }
  double num(const std::string& key) const { return get(key).get<double>(); }
  long long integer(const std::string& key) const { return get(key).get<long long>(); }
  std::uint64_t u64(const std::string& key) const { return get(key).get<std::uint64_t>(); }
  bool flag(const std::string& key) const { return get(key).get<bool>(); }
  std::optional<double> opt_num(const std::string& key) const {
    return has(key) ? std::optional<double>(num(key)) : std::nullopt;
  }

  /// Every parameter in declaration order; unset optional ones are null.
  Json echo() const {
    Json out = Json::object();
    for (const auto& p : params_) out[p.key] = values_.at(p.key);
    return out;
  }

 private:
  const Json& get(const std::string& key) const {
    const Json& v = values_.at(key);
    if (v.is_null()) throw UsageError("missing required value '" + key + "' for command " + command_);
    return v;
  }

  std::string command_;
  std::vector<Param> params_;
  std::map<std::string, Json> values_;
  std::set<std::string> explicit_;
};

// ---- file helpers ----

void write_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

bool has_magic(const fs::path& path, const char* magic, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string head(n, '\0');
  in.read(head.data(), static_cast<std::streamsize>(n));
  return in && head == std::string(magic, n);
}

GrayImage load_image(const fs::path& path) {
  if (has_magic(path, kFloatDumpMagic, 8)) return read_float_dump(path);
  return read_pgm(path);
}

DenseMatrix read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("non-numeric CSV cell '" + cell + "' in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw IoError("ragged CSV rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty CSV matrix " + path.string());
  DenseMatrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return M;
}

DenseMatrix load_matrix(const fs::path& path) {
  if (has_magic(path, kFloatDumpMagic, 8)) return read_matrix_dump(path);
  return read_csv_matrix(path);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// ---- run context ----

class Stopwatch {
 public:
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    stages_[stage] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  Json json() const {
    Json out = Json::object();
    for (const auto& [k, v] : stages_) out[k] = v;
    return out;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::map<std::string, double> stages_;
};

struct Run {
  std::string command;
  Settings settings;
  fs::path out_dir;
  Json outputs = Json::array();
  Json metrics = Json::object();
  Stopwatch clock;
  bool solver_failed = false;

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return out_dir / name;
  }

  void write_manifest() {
    Json m = Json::object();
    m["command"] = command;
    m["version"] = kVersion;
    m["status"] = solver_failed ? "solver_failure" : "ok";
    m["config"] = settings.echo();
    m["outputs"] = outputs;
    m["metrics"] = metrics;
    if (settings.flag("timings")) m["timings"] = clock.json();
    write_atomic(out_dir / "manifest.json", m.dump(2) + "\n");
  }
};

RpcaConfig rpca_config_from(const Settings& s) {
  RpcaConfig cfg;
  if (s.has("p")) cfg.p = s.num("p");
  cfg.C = s.opt_num("C");
  cfg.mu0 = s.opt_num("mu0");
  cfg.rho = s.num("rho");
  cfg.tol = s.num("tol");
  cfg.step_tol = s.num("step_tol");
  cfg.max_iters = static_cast<int>(s.integer("max_iters"));
  cfg.weight_mode = weight_mode_from_string(s.str("weight_mode"));
  cfg.validate();
  return cfg;
}

std::vector<MethodSpec> methods_from(const Settings& s, const RpcaConfig& base) {
  std::vector<MethodSpec> methods;
  for (const auto& name : split(s.str("methods"), ',')) methods.push_back(parse_method(name, base));
  if (methods.empty()) throw UsageError("no methods given");
  return methods;
}

// ---- commands ----

void cmd_denoise(Run& run) {
  auto& s = run.settings;
  const fs::path in = s.str("in");
  const bool add_noise = s.has("add_noise");
  if (!s.has("sigma")) {
    if (!add_noise) throw UsageError("missing required value 'sigma' for command denoise");
    s.set("sigma", s.num("add_noise"));
  }
  const double sigma = s.num("sigma");
  if (!(sigma >= 0.0)) throw UsageError("sigma must be non-negative");
  DenoiseConfig cfg = DenoiseConfig::for_noise_level(sigma);
  // derived defaults are written back so the echoed config is complete
  if (!s.has("p")) s.set("p", cfg.p);
  if (!s.has("K")) s.set("K", cfg.K);
  if (!s.has("patch_size")) s.set("patch_size", cfg.patch_size);
  if (!s.has("group_size")) s.set("group_size", cfg.group_size);
  cfg.p = s.num("p");
  cfg.K = static_cast<int>(s.integer("K"));
  cfg.alpha = s.num("alpha");
  cfg.patch_size = static_cast<int>(s.integer("patch_size"));
  cfg.group_size = static_cast<int>(s.integer("group_size"));
  cfg.search_window = static_cast<int>(s.integer("search_window"));
  cfg.key_patch_step = static_cast<int>(s.integer("key_patch_step"));
  cfg.c = s.opt_num("c");
  cfg.fidelity_scale = s.opt_num("fidelity_scale");
  cfg.gamma = s.num("gamma");
  cfg.reestimate_noise = s.flag("reestimate_noise");
  cfg.subtract_group_mean = s.flag("subtract_group_mean");
  cfg.threads = static_cast<int>(s.integer("threads"));
  cfg.validate();

  // --out may name the result image directly
  fs::path result_name = "denoised.pgm";
  if (fs::path(s.str("out")).extension() == ".pgm") {
    run.out_dir = fs::path(s.str("out")).parent_path();
    if (run.out_dir.empty()) run.out_dir = ".";
    result_name = fs::path(s.str("out")).filename();
  }
  fs::create_directories(run.out_dir);

  GrayImage input = load_image(in);
  GrayImage noisy = input;
  std::optional<GrayImage> clean;
  if (add_noise) {
    clean = input;
    noisy = add_gaussian_noise(input, {s.num("add_noise"), s.u64("seed")});
    write_float_dump(run.output("noisy.f64"), noisy);
    write_pgm(run.output("noisy.pgm"), noisy);
  } else if (s.has("clean")) {
    clean = load_image(s.str("clean"));
  }
  run.clock.lap("load");

  DenoiseTrace trace;
  const GrayImage result = denoise_image(noisy, cfg, &trace);
  run.clock.lap("denoise");

  write_pgm(run.output(result_name.string()), result);
  if (s.flag("dump")) write_float_dump(run.output("denoised.f64"), result);
  run.metrics["working_sigma"] = trace.working_sigma;
  if (clean) {
    run.metrics["psnr_noisy"] = number_or_null(psnr(noisy, *clean));
    run.metrics["psnr"] = number_or_null(psnr(result, *clean));
    // the written PGM is what a user sees; report its PSNR as well
    run.metrics["psnr_written"] = number_or_null(psnr(read_pgm(run.out_dir / result_name), *clean));
  }
  run.clock.lap("write");
}

std::map<std::string, double> parse_synthetic(const std::string& text) {
  std::map<std::string, double> kv;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("synthetic: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    if (key != "m" && key != "pr" && key != "pe" && key != "mag") {
      throw UsageError("synthetic: unknown key '" + key + "' (expected m, pr, pe, mag)");
    }
    try {
      kv[key] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("synthetic: bad number for '" + key + "'");
    }
  }
  for (const char* k : {"m", "pr", "pe"}) {
    if (!kv.count(k)) throw UsageError(std::string("synthetic: missing '") + k + "'");
  }
  return kv;
}

std::vector<GrayImage> load_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("frame directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .pgm frames in " + dir.string());
  std::vector<GrayImage> frames;
  for (const auto& f : files) frames.push_back(read_pgm(f));
  return frames;
}

void cmd_rpca(Run& run) {
  auto& s = run.settings;
  const int sources = (s.has("in") ? 1 : 0) + (s.has("synthetic") ? 1 : 0) + (s.has("frames") ? 1 : 0);
  if (sources != 1) throw UsageError("rpca needs exactly one of --in, --synthetic, --frames");
  if (s.has("frames") && !s.has("C")) s.set("C", kBackgroundWeightScale);
  RpcaConfig cfg = rpca_config_from(s);
  cfg.uniform_weight = s.num("uniform_weight");
  cfg.validate();
  const std::string method = s.str("method");
  if (method != "wsnm" && method != "nnm") throw UsageError("method must be wsnm or nnm");
  const std::optional<double> lambda = s.opt_num("lambda");
  if (s.has("frames") && !(s.num("theta") > 0.0)) throw UsageError("theta must be positive");
  fs::create_directories(run.out_dir);

  DenseMatrix Y;
  std::optional<SyntheticData> truth;
  std::vector<GrayImage> frames;
  if (s.has("synthetic")) {
    const auto kv = parse_synthetic(s.str("synthetic"));
    SyntheticSpec spec;
    spec.m = static_cast<int>(kv.at("m"));
    spec.rank_fraction = kv.at("pr");
    spec.corruption_fraction = kv.at("pe");
    if (kv.count("mag")) spec.corruption_magnitude = kv.at("mag");
    spec.seed = s.u64("seed");
    try {
      spec.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    truth = gen_lowrank_sparse(spec);
    Y = truth->Y;
  } else if (s.has("frames")) {
    frames = load_frames(s.str("frames"));
    Y = video_to_matrix(frames);
  } else {
    Y = load_matrix(s.str("in"));
  }
  run.clock.lap("load");

  const RpcaResult res = method == "nnm" ? nnm_rpca(Y, cfg, lambda) : wsnm_rpca(Y, cfg);
  run.clock.lap("solve");

  write_matrix_dump(run.output("X.f64"), res.X);
  write_matrix_dump(run.output("E.f64"), res.E);
  {
    std::string csv = "iter,residual,step,multiplier_norm\n";
    for (std::size_t k = 0; k < res.residual_history.size(); ++k) {
      csv += std::to_string(k + 1) + "," + fmt9(res.residual_history[k]) + "," + fmt9(res.step_history[k]) + "," +
             fmt9(res.multiplier_norm_history[k]) + "\n";
    }
    write_atomic(run.output("history.csv"), csv);
  }
  run.metrics["iterations"] = res.iterations;
  run.metrics["converged"] = res.converged;
  run.metrics["estimated_rank"] = res.estimated_rank;
  run.metrics["final_residual"] = res.residual_history.back();
  run.metrics["final_step"] = res.step_history.back();
  if (truth) {
    const RelativeError err = log_relative_error(res.X, truth->X);
    run.metrics["rel_err"] = err.linear;
    run.metrics["log_rel_err"] = number_or_null(err.log);
  }
  if (!frames.empty()) {
    const int w = frames.front().width();
    const int h = frames.front().height();
    fs::create_directories(run.out_dir / "background");
    fs::create_directories(run.out_dir / "masks");
    const auto masks = binarize_foreground(res.E, w, h, s.num("theta"));
    for (std::size_t j = 0; j < frames.size(); ++j) {
      char name[64];
      std::snprintf(name, sizeof name, "%04zu.pgm", j);
      write_pgm(run.output((fs::path("background") / name).string()),
                matrix_column_to_image(res.X, static_cast<Eigen::Index>(j), w, h));
      write_pgm(run.output((fs::path("masks") / name).string()), masks[j].to_image());
    }
  }
  if (!res.converged) {
    run.solver_failed = true;
    std::cerr << "rpca: iteration cap reached without convergence\n";
  }
  run.clock.lap("write");
}

void finish_report(Run& run, const SweepReport& report, const std::vector<MethodSpec>& methods,
                   const std::string& csv_name) {
  std::ostringstream csv;
  report.write_csv(csv, run.settings.flag("timings"));
  write_atomic(run.output(csv_name), csv.str());
  std::ostringstream diag;
  report.write_diagnostics_csv(diag);
  write_atomic(run.output("diagnostics.csv"), diag.str());
  Json counts = Json::object();
  for (const auto& m : methods) counts[m.name()] = report.success_count(m.name());
  run.metrics["success_cells"] = counts;
  Json cells = Json::array();
  int failures = 0;
  for (const auto& c : report.cells) {
    cells.push_back({{"p_r", c.p_r},
                     {"p_e", c.p_e},
                     {"method", c.method},
                     {"mean_rel_err", number_or_null(c.mean_rel_err)},
                     {"mean_log_rel_err", number_or_null(c.mean_log_rel_err)},
                     {"mean_rank", number_or_null(c.mean_rank)},
                     {"success", c.success},
                     {"failures", c.failures}});
    failures += c.failures;
  }
  run.metrics["cells"] = cells;
  run.metrics["failed_runs"] = failures;
  if (failures > 0) {
    run.solver_failed = true;
    for (const auto& r : report.runs) {
      if (!r.failure.empty()) std::cerr << r.method << " at (" << r.p_r << ", " << r.p_e << "): " << r.failure << "\n";
    }
  }
}

void cmd_sweep(Run& run) {
  auto& s = run.settings;
  if (s.flag("full_scale")) {
    const std::pair<const char*, Json> full[] = {{"m", 300},        {"repeats", 10},  {"pr_min", 0.01},
                                                 {"pr_step", 0.01}, {"pe_min", 0.01}, {"pe_step", 0.01}};
    for (const auto& [k, v] : full) {
      if (!s.is_explicit(k)) s.set(k, v);
    }
  }
  const RpcaConfig base = rpca_config_from(s);
  SweepOptions opts;
  opts.m = static_cast<int>(s.integer("m"));
  try {
    opts.rank_fractions = fraction_grid(s.num("pr_min"), s.num("pr_max"), s.num("pr_step"));
    opts.corruption_fractions = fraction_grid(s.num("pe_min"), s.num("pe_max"), s.num("pe_step"));
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  opts.repeats = static_cast<int>(s.integer("repeats"));
  if (opts.repeats < 1) throw UsageError("repeats must be at least 1");
  opts.methods = methods_from(s, base);
  opts.base_seed = s.u64("seed");
  opts.threads = static_cast<int>(s.integer("threads"));
  for (double pr : opts.rank_fractions) {
    SyntheticSpec probe{opts.m, pr, 0.0, 50.0, 0};
    try {
      probe.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
  }
  fs::create_directories(run.out_dir);
  run.clock.lap("setup");
  const SweepReport report = run_phase_sweep(opts);
  run.clock.lap("sweep");
  finish_report(run, report, opts.methods, "sweep.csv");
  run.clock.lap("write");
}

void cmd_table(Run& run) {
  auto& s = run.settings;
  const RpcaConfig base = rpca_config_from(s);
  const int m = static_cast<int>(s.integer("m"));
  std::vector<int> ranks;
  for (const auto& r : split(s.str("ranks"), ',')) {
    try {
      ranks.push_back(std::stoi(r));
    } catch (const std::exception&) {
      throw UsageError("invalid value for 'ranks': '" + r + "'");
    }
    if (ranks.back() < 1 || ranks.back() >= m) throw UsageError("rank " + r + " out of range for m = " + std::to_string(m));
  }
  const int repeats = static_cast<int>(s.integer("repeats"));
  if (repeats < 1) throw UsageError("repeats must be at least 1");
  const double pe = s.num("pe");
  if (!(pe >= 0.0 && pe < 1.0)) throw UsageError("pe must lie in [0, 1)");
  const auto methods = methods_from(s, base);
  fs::create_directories(run.out_dir);
  run.clock.lap("setup");
  const SweepReport report =
      run_table(m, ranks, pe, repeats, methods, s.u64("seed"), static_cast<int>(s.integer("threads")));
  run.clock.lap("table");
  finish_report(run, report, methods, "table.csv");
  run.clock.lap("write");
}

void cmd_prox(Run& run) {
  auto& s = run.settings;
  const double p = s.num("p");
  const double a = s.num("a");
  if (!(p > 0.0 && p <= 1.0)) throw UsageError("p must lie in (0, 1]");
  if (!(a > 0.0)) throw UsageError("a must be positive");
  const DenseMatrix Y = load_matrix(s.str("in"));
  const Eigen::Index r = std::min(Y.rows(), Y.cols());
  DenseVector wv;
  bool uniform = true;
  if (s.has("weights")) {
    const auto items = split(s.str("weights"), ',');
    if (static_cast<Eigen::Index>(items.size()) != r) {
      throw UsageError("weights: expected " + std::to_string(r) + " values, got " + std::to_string(items.size()));
    }
    wv.resize(r);
    for (Eigen::Index i = 0; i < r; ++i) {
      try {
        wv(i) = std::stod(items[static_cast<std::size_t>(i)]);
      } catch (const std::exception&) {
        throw UsageError("invalid value for 'weights'");
      }
    }
    uniform = (wv.array() == wv(0)).all();
  } else {
    wv = DenseVector::Constant(r, s.num("uniform_weight"));
  }
  WeightVector<double> w;
  try {
    w = WeightVector<double>(wv);
  } catch (const DomainError& e) {
    throw UsageError(std::string("weights: ") + e.what());
  }
  const WeightOrder order =
      s.flag("allow_uncertified") ? WeightOrder::kAllowUncertified : WeightOrder::kRequireNonDescending;
  if (order == WeightOrder::kRequireNonDescending && !w.certified()) {
    throw UsageError("weights are not non-descending; pass --allow-uncertified true to accept them");
  }
  fs::create_directories(run.out_dir);
  run.clock.lap("load");

  const ProxResult<double> res = wsnm_prox_full(Y, w, p, a, order);
  run.clock.lap("prox");

  write_matrix_dump(run.output("prox.f64"), res.X);
  std::string csv = "index,weight,sigma_in,sigma_out\n";
  for (Eigen::Index i = 0; i < r; ++i) {
    csv += std::to_string(i) + "," + fmt9(w(i)) + "," + fmt9(res.sigma_in(i)) + "," + fmt9(res.sigma_out(i)) + "\n";
  }
  write_atomic(run.output("singular_values.csv"), csv);
  run.metrics["certified"] = w.certified();
  run.metrics["zeroed_singular_values"] = static_cast<long long>((res.sigma_out.array() == 0.0).count());
  if (p == 1.0 && uniform) {
    // closed form: soft thresholding of the singular values at w / (2a)
    const auto f = svd(Y);
    const DenseVector shrunk = (f.singular_values.array() - wv(0) / (2.0 * a)).max(0.0).matrix();
    const DenseMatrix closed = f.U * shrunk.asDiagonal() * f.V.transpose();
    run.metrics["closed_form_max_abs_diff"] = (closed - res.X).cwiseAbs().maxCoeff();
  }
  run.clock.lap("write");
}

ForegroundMask load_mask(const fs::path& path) {
  const GrayImage img = read_pgm(path);
  ForegroundMask m(img.width(), img.height());
  m.pixels = (img.pixels() != 0.0).cast<std::uint8_t>();
  return m;
}

void cmd_metrics(Run& run) {
  auto& s = run.settings;
  const bool images = s.has("a") || s.has("b");
  const bool masks = s.has("mask_a") || s.has("mask_b");
  const bool matrices = s.has("x_hat") || s.has("x");
  if (!images && !masks && !matrices) throw UsageError("metrics needs --a/--b, --mask-a/--mask-b or --x-hat/--x");
  fs::create_directories(run.out_dir);
  if (images) {
    const GrayImage a = load_image(s.str("a"));
    const GrayImage b = load_image(s.str("b"));
    run.metrics["mse"] = mse(a, b);
    run.metrics["psnr"] = number_or_null(psnr(a, b));
    run.metrics["psnr_identical"] = std::isinf(psnr(a, b));
  }
  if (masks) run.metrics["similarity"] = foreground_similarity(load_mask(s.str("mask_a")), load_mask(s.str("mask_b")));
  if (matrices) {
    const RelativeError e = log_relative_error(load_matrix(s.str("x_hat")), load_matrix(s.str("x")));
    run.metrics["rel_err"] = e.linear;
    run.metrics["log_rel_err"] = number_or_null(e.log);
  }
  run.clock.lap("metrics");
  std::cout << run.metrics.dump(2) << "\n";
}

const std::map<std::string, std::string>& command_help() {
  static const std::map<std::string, std::string> help = {
      {"denoise", "denoise a grayscale image by patch-group WSNM"},
      {"rpca", "low-rank plus sparse decomposition of a matrix, synthetic case or frame sequence"},
      {"sweep", "phase-diagram sweep over rank and corruption fractions"},
      {"table", "recovery table over ranks at one corruption level"},
      {"prox", "apply the WSNM proximal operator to a matrix"},
      {"metrics", "PSNR, mask similarity or relative error between files"},
  };
  return help;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  const auto all_params = command_params();
  CLI::App cli{"Weighted Schatten p-norm toolkit", "wsnm"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", kVersion);

  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::map<std::string, CLI::Option*>> opts;
  std::map<std::string, std::string> config_path;
  std::map<std::string, bool> no_timings;
  for (const auto& [name, params] : all_params) {
    CLI::App* sub = cli.add_subcommand(name, command_help().at(name));
    sub->add_option("--config", config_path[name], "JSON config file (flat keys, or a manifest to replay)");
    sub->add_flag("--no-timings", no_timings[name], "same as --timings false");
    for (const auto& p : params) {
      std::string help = p.help;
      if (!p.fallback.is_null()) help += " [default " + (p.fallback.is_string() ? p.fallback.get<std::string>() : p.fallback.dump()) + "]";
      opts[name][p.key] = sub->add_option(flag_name(p.key), raw[name][p.key], help);
    }
  }

  if (args.empty()) {
    std::cerr << cli.help();
    return 2;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    cli.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return 2;
  }

  CLI::App* sub = cli.get_subcommands().front();
  const std::string command = sub->get_name();
  std::optional<Run> run;
  try {
    Settings settings(command, all_params.at(command));
    if (!config_path[command].empty()) settings.apply_file(config_path[command]);
    for (const auto& [key, opt] : opts[command]) {
      if (opt->count() > 0) settings.apply_flag(key, raw[command][key]);
    }
    if (no_timings[command]) settings.set("timings", false);
    run.emplace(Run{command, std::move(settings), {}, Json::array(), Json::object(), {}, false});
    run->out_dir = run->settings.str("out");
    if (run->settings.integer("threads") < 0) throw UsageError("threads must be non-negative");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (command == "denoise") cmd_denoise(*run);
    if (command == "rpca") cmd_rpca(*run);
    if (command == "sweep") cmd_sweep(*run);
    if (command == "table") cmd_table(*run);
    if (command == "prox") cmd_prox(*run);
    if (command == "metrics") cmd_metrics(*run);
    run->write_manifest();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return run->solver_failed ? 1 : 0;
}

}  // namespace wsnm::app
