#include "flowseek/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowseek/bases.hpp"
#include "flowseek/estimator.hpp"
#include "flowseek/flow_io.hpp"
#include "flowseek/flowops.hpp"
#include "flowseek/oracles.hpp"
#include "flowseek/parallel.hpp"
#include "flowseek/png.hpp"
#include "flowseek/subspace.hpp"
#include "flowseek/supervision.hpp"
#include "flowseek/synth.hpp"

namespace flowseek::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct GlobalOptions {
  int threads = 0;  // 0: keep FLOWSEEK_THREADS / default
  std::uint64_t seed = 20240607;
  bool json_output = false;
  std::string config;
};

struct CameraOptions {
  double fx = kUnset, fy = kUnset, cx = kUnset, cy = kUnset;

  void add_to(CLI::App* sub) {
    sub->add_option("--fx", fx, "Focal length x (px); omit for the focal-free basis set");
    sub->add_option("--fy", fy, "Focal length y (px), defaults to --fx");
    sub->add_option("--cx", cx, "Principal point x (px), defaults to the image centre");
    sub->add_option("--cy", cy, "Principal point y (px), defaults to the image centre");
  }

  double centre_x(int width) const { return std::isnan(cx) ? (width - 1) / 2.0 : cx; }
  double centre_y(int height) const { return std::isnan(cy) ? (height - 1) / 2.0 : cy; }

  std::optional<Intrinsicsd> intrinsics(int width, int height) const {
    if (std::isnan(fx)) {
      if (!std::isnan(fy)) throw UsageError("--fy requires --fx");
      return std::nullopt;
    }
    Intrinsicsd intr{fx, std::isnan(fy) ? fx : fy, centre_x(width), centre_y(height)};
    intr.validate();
    return intr;
  }

  MotionBasisSet<double> bases(const InverseDepthMapd& depth) const {
    if (const auto intr = intrinsics(depth.width(), depth.height())) return build_six_bases(depth, *intr);
    return build_eight_bases(depth, centre_x(depth.width()), centre_y(depth.height()));
  }
};

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw UsageError("config values must be scalars or arrays of scalars");
}

/// Fills options that were not given on the command line from a JSON object.
void merge_config(CLI::App& app, CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("malformed config file " + path + ": " + e.what());
  }
  if (!cfg.is_object()) throw FormatError("config file " + path + " must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = nullptr;
    if (key != "config" && key != "help") {
      for (CLI::App* a : {&sub, &app}) {
        opt = a->get_option_no_throw("--" + key);
        if (!opt) opt = a->get_option_no_throw(key);
        if (opt) break;
      }
    }
    if (!opt) throw UsageError("unknown config key: " + key);
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(scalar_text(v));
    } else {
      opt->add_result(scalar_text(value));
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("bad config value for " + key + ": " + e.what());
    }
  }
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

/// Human-readable rendering of a report: one `key: value` line per leaf,
/// numeric arrays inline.
void print_text(std::ostream& out, const json& j, const std::string& prefix = "") {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) print_text(out, v, prefix.empty() ? k : prefix + "." + k);
    return;
  }
  if (j.is_array()) {
    const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
    if (!flat) {
      for (std::size_t n = 0; n < j.size(); ++n) print_text(out, j[n], prefix + "[" + std::to_string(n) + "]");
      return;
    }
  }
  out << prefix << ": " << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
}

void emit(std::ostream& out, const json& report, bool as_json) {
  if (as_json)
    out << report.dump(2) << '\n';
  else
    print_text(out, report);
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json metrics_json(const FlowMetrics& m) {
  return {{"epe", m.epe},
          {"1px", m.npx.at(1)},
          {"3px", m.npx.at(3)},
          {"5px", m.npx.at(5)},
          {"fl_all", m.fl_all},
          {"fl_mode", m.fl_mode == FlMode::and_mode ? "and" : "or"},
          {"valid_pixels", m.valid_pixels}};
}

void write_color_png(const std::string& path, const FlowFieldd& flow, std::optional<double> max_mag = {}) {
  write_png(path, flow_to_color(flow, max_mag).raw());
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string spec, out;
};

json do_synth(const SynthOptions& o) {
  require(o.out, "--out");
  std::vector<SceneSpec> specs;
  if (o.spec.empty()) {
    specs = standard_suite();
  } else {
    std::ifstream in(o.spec);
    if (!in) throw IoError("cannot open scene spec file: " + o.spec);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw FormatError("malformed scene spec file " + o.spec + ": " + e.what());
    }
    specs = scene_list_from_json(j);
  }
  const json manifest = emit_dataset(specs, o.out);
  json scenes = json::array();
  for (const auto& s : manifest["scenes"])
    scenes.push_back({{"index", s["index"]}, {"valid_pixels", s["valid_pixels"]}});
  return {{"out", o.out}, {"count", manifest["count"]}, {"manifest", (fs::path(o.out) / "manifest.json").string()},
          {"scenes", scenes}};
}

// ---------------------------------------------------------------- bases

struct BasesOptions {
  std::string depth, out;
  double depth_scale = kInverseDepthPngScale;
  bool normalize = false;
  CameraOptions camera;
};

json do_bases(const BasesOptions& o) {
  require(o.depth, "--depth");
  require(o.out, "--out");
  const auto depth = inverse_depth_from_png(o.depth, o.depth_scale);
  auto set = o.camera.bases(depth);
  if (o.normalize) set = normalize_bases(std::move(set));
  fs::create_directories(o.out);
  const auto& names = basis_names(set.kind);
  json fields = json::array();
  for (int k = 0; k < set.size(); ++k) {
    FlowFieldd f(set.height(), set.width());
    f.u = set[k].u;
    f.v = set[k].v;
    const std::string stem = (fs::path(o.out) / ("basis_" + names[k])).string();
    write_flo(stem + ".flo", f);
    write_color_png(stem + ".png", f);
    fields.push_back({{"name", names[k]},
                      {"flo", stem + ".flo"},
                      {"png", stem + ".png"},
                      {"norm", std::sqrt(set[k].squared_norm())},
                      {"scale", set.scales.empty() ? 1.0 : set.scales[k]}});
  }
  return {{"kind", set.focal_free() ? "eight" : "six"}, {"normalized", o.normalize}, {"bases", fields}};
}

// ---------------------------------------------------------------- fit

struct FitOptions {
  std::string flow, depth;
  double depth_scale = kInverseDepthPngScale;
  CameraOptions camera;
};

json do_fit(const FitOptions& o) {
  require(o.flow, "--flow");
  require(o.depth, "--depth");
  const auto flow = read_flow(o.flow);
  const auto depth = inverse_depth_from_png(o.depth, o.depth_scale);
  if (!flow.same_shape(depth.height(), depth.width()))
    throw DimensionError("flow " + o.flow + " and depth " + o.depth + " differ in size");
  const auto set = o.camera.bases(depth);
  const auto c = fit_coefficients(flow, set);
  const auto& names = basis_names(set.kind);
  json coeffs = json::object();
  for (int k = 0; k < set.size(); ++k) coeffs[names[k]] = c.values[k];
  return {{"kind", set.focal_free() ? "eight" : "six"},
          {"coefficients", coeffs},
          {"effective_rank", c.effective_rank},
          {"residual_rms", c.residual_rms},
          {"used_pixels", c.used_pixels},
          {"singular_values", vector_json(c.singular_values)}};
}

// ---------------------------------------------------------------- estimate

struct EstimateOptions {
  std::string img0, img1, depth, out, viz, gt;
  double depth_scale = kInverseDepthPngScale;
  std::string cost = "photometric";
  std::string warm_start = "auto";
  int iters = 4;
  int radius = 4;
  double lambda = 1e-3;
  std::vector<int> strides = default_strides();
  CameraOptions camera;
};

WarmStart warm_start_from_string(const std::string& s) {
  if (s == "auto") return WarmStart::automatic;
  if (s == "off") return WarmStart::off;
  if (s == "on") return WarmStart::on;
  throw UsageError("--warm-start must be auto, off or on");
}

json do_estimate(const EstimateOptions& o) {
  require(o.img0, "--img0");
  require(o.img1, "--img1");
  require(o.depth, "--depth");
  require(o.out, "--out");
  EstimatorConfig cfg;
  cfg.n_iters = o.iters;
  cfg.radius = o.radius;
  cfg.lambda = o.lambda;
  cfg.strides = o.strides;
  try {
    cfg.cost = cost_kind_from_string(o.cost);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  cfg.warm_start = warm_start_from_string(o.warm_start);

  const Imaged img0 = image_from_png(o.img0);
  const Imaged img1 = image_from_png(o.img1);
  const auto depth = inverse_depth_from_png(o.depth, o.depth_scale);
  const auto intr = o.camera.intrinsics(depth.width(), depth.height());
  EstimateResult r;
  if (intr) {
    r = estimate_rigid_flow(img0, img1, depth, intr, cfg);
  } else {
    r = estimate_rigid_flow(img0, img1, build_eight_bases(depth, o.camera.centre_x(depth.width()),
                                                          o.camera.centre_y(depth.height())),
                            cfg);
  }
  write_flow(o.out, r.flow);
  if (!o.viz.empty()) write_color_png(o.viz, r.flow);

  const auto& names = basis_names(r.bases.kind);
  json coeffs = json::object();
  for (int k = 0; k < r.bases.size(); ++k) coeffs[names[k]] = r.coefficients.values[k];
  json iterations = json::array();
  for (const auto& it : r.iterations)
    iterations.push_back({{"cost", it.cost},
                          {"lambda", it.lambda},
                          {"step_norm", it.step_norm},
                          {"rejected_steps", it.rejected_steps},
                          {"accepted", it.accepted}});
  json report = {{"out", o.out},
                 {"cost_kind", to_string(cfg.cost)},
                 {"kind", r.bases.focal_free() ? "eight" : "six"},
                 {"coefficients", coeffs},
                 {"cost_trace", r.cost_trace},
                 {"iterations", iterations},
                 {"normal_rank", r.normal_rank},
                 {"warm_started", r.warm_started},
                 {"pyramid_built", r.pyramid_built}};
  if (r.pyramid_built) report["final_correlation"] = r.final_correlation;
  if (!o.gt.empty()) {
    const auto gt = read_flow(o.gt);
    if (!gt.same_shape(r.flow.height(), r.flow.width()))
      throw DimensionError("ground truth " + o.gt + " differs in size from the estimate");
    report["metrics"] = metrics_json(compute_metrics(r.flow, gt));
    report["zero_flow_epe"] = compute_metrics(FlowFieldd::Zero(gt.height(), gt.width()), gt).epe;
    report["gt_span_residual_rms"] = fit_coefficients(gt, r.bases).residual_rms;
  }
  return report;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string est, gt, mask;
  std::string fl_mode = "and";
};

json do_eval(const EvalOptions& o) {
  require(o.est, "estimate path");
  require(o.gt, "ground-truth path");
  FlMode mode;
  if (o.fl_mode == "and")
    mode = FlMode::and_mode;
  else if (o.fl_mode == "or")
    mode = FlMode::or_mode;
  else
    throw UsageError("--fl-mode must be and or or");
  const auto est = read_flow(o.est);
  const auto gt = read_flow(o.gt);
  if (!est.same_shape(gt.height(), gt.width()))
    throw DimensionError("flows " + o.est + " and " + o.gt + " differ in size");
  Mask valid = gt.valid && est.valid;
  if (!o.mask.empty()) {
    const RawImage m = read_png(o.mask);
    if (m.width != gt.width() || m.height != gt.height())
      throw DimensionError("mask " + o.mask + " differs in size from the flows");
    for (int i = 0; i < m.height; ++i)
      for (int j = 0; j < m.width; ++j) valid(i, j) = valid(i, j) && m.at(i, j, 0) != 0;
  }
  return metrics_json(compute_metrics(est, gt, valid, mode));
}

// ---------------------------------------------------------------- viz

struct VizOptions {
  std::string flow, out;
  double max_mag = kUnset;
};

json do_viz(const VizOptions& o) {
  require(o.flow, "flow path");
  const auto flow = read_flow(o.flow);
  std::string out = o.out;
  if (out.empty()) {
    fs::path p(o.flow);
    out = (p.parent_path() / (p.stem().string() + "_viz.png")).string();
  }
  std::optional<double> max_mag;
  if (!std::isnan(o.max_mag)) {
    if (!(o.max_mag > 0) || !std::isfinite(o.max_mag)) throw UsageError("--max-mag must be positive");
    max_mag = o.max_mag;
  }
  write_color_png(out, flow, max_mag);
  return {{"flow", o.flow}, {"out", out}, {"width", flow.width()}, {"height", flow.height()}};
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  int draws = 1000;
  double step = 1e-5;
  double tolerance = 1e-5;
};

json do_gradcheck(const GradcheckOptions& o, std::uint64_t seed, bool& pass) {
  if (o.draws < 1) throw UsageError("--draws must be at least 1");
  if (!(o.step > 0)) throw UsageError("--step must be positive");
  std::mt19937_64 rng(seed);
  const auto rep = gradient_check(rng, o.draws, o.step);
  pass = rep.max_rel_err < o.tolerance && rep.mode_nll_error <= 1e-12;
  return {{"draws", rep.draws},
          {"step", rep.step},
          {"seed", seed},
          {"max_rel_err", rep.max_rel_err},
          {"max_rel_err_mu", rep.max_rel_err_mu},
          {"max_rel_err_alpha", rep.max_rel_err_alpha},
          {"max_rel_err_beta2", rep.max_rel_err_beta2},
          {"mode_nll_error", rep.mode_nll_error},
          {"tolerance", o.tolerance},
          {"pass", pass}};
}

// ---------------------------------------------------------------- corr-oracle

json do_corr_oracle(double tolerance, std::uint64_t seed, bool& pass, std::ostream& out, bool as_json) {
  const auto cases = oracle::run_correlation_suite(seed, tolerance);
  pass = true;
  json list = json::array();
  for (const auto& c : cases) {
    pass = pass && c.pass;
    list.push_back({{"name", c.name}, {"max_rel_err", c.max_rel_err}, {"pass", c.pass}});
    if (!as_json) out << (c.pass ? "PASS " : "FAIL ") << c.name << "  max_rel_err=" << c.max_rel_err << '\n';
  }
  return {{"instances", list.size()}, {"tolerance", tolerance}, {"seed", seed}, {"pass", pass}, {"cases", list}};
}

int run_impl(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rigid-motion flow bases, correlation volumes and a classical basis-coefficient flow estimator",
               "flowseek"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--threads", g.threads, "Worker threads (fallback: FLOWSEEK_THREADS)")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed for randomized checks");
  app.add_flag("--json", g.json_output, "Print the report as JSON");
  app.add_option("--config", g.config, "JSON object of option values; explicit flags take precedence");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic rigid scenes with ground truth");
  synth_cmd->add_option("--spec", synth.spec, "JSON scene list (default: the standard 10-scene suite)");
  synth_cmd->add_option("--out", synth.out, "Output directory");

  BasesOptions bases;
  auto* bases_cmd = app.add_subcommand("bases", "Write each motion basis field as .flo and colour PNG");
  bases_cmd->add_option("--depth", bases.depth, "16-bit inverse-depth PNG");
  bases_cmd->add_option("--depth-scale", bases.depth_scale, "Stored value per unit inverse depth");
  bases_cmd->add_option("--out", bases.out, "Output directory");
  bases_cmd->add_flag("--normalize", bases.normalize, "Scale each field to unit norm");
  bases.camera.add_to(bases_cmd);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Least-squares basis coefficients of a flow field (JSON)");
  fit_cmd->add_option("--flow", fit.flow, "Flow file (.flo or KITTI .png)");
  fit_cmd->add_option("--depth", fit.depth, "16-bit inverse-depth PNG");
  fit_cmd->add_option("--depth-scale", fit.depth_scale, "Stored value per unit inverse depth");
  fit.camera.add_to(fit_cmd);

  EstimateOptions est;
  auto* est_cmd = app.add_subcommand("estimate", "Estimate rigid flow between two images");
  est_cmd->add_option("--img0", est.img0, "First image (PNG)");
  est_cmd->add_option("--img1", est.img1, "Second image (PNG)");
  est_cmd->add_option("--depth", est.depth, "16-bit inverse-depth PNG for the first image");
  est_cmd->add_option("--depth-scale", est.depth_scale, "Stored value per unit inverse depth");
  est_cmd->add_option("--out", est.out, "Output flow file (.flo or KITTI .png)");
  est_cmd->add_option("--viz", est.viz, "Optional colour visualization PNG");
  est_cmd->add_option("--gt", est.gt, "Optional ground-truth flow for metrics");
  est_cmd->add_option("--cost", est.cost, "photometric or correlation");
  est_cmd->add_option("--warm-start", est.warm_start, "auto, off or on");
  est_cmd->add_option("--iters", est.iters, "Gauss-Newton iterations");
  est_cmd->add_option("--radius", est.radius, "Correlation lookup radius");
  est_cmd->add_option("--lambda", est.lambda, "Initial damping");
  est_cmd->add_option("--strides", est.strides, "Correlation pyramid strides")->delimiter(',');
  est.camera.add_to(est_cmd);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Flow metrics of an estimate against ground truth (JSON)");
  eval_cmd->add_option("est", eval.est, "Estimated flow file");
  eval_cmd->add_option("gt", eval.gt, "Ground-truth flow file");
  eval_cmd->add_option("--mask", eval.mask, "PNG mask, nonzero pixels are evaluated");
  eval_cmd->add_option("--fl-mode", eval.fl_mode, "Fl outlier rule: and or or");

  VizOptions viz;
  auto* viz_cmd = app.add_subcommand("viz", "Render a flow file with the colour wheel");
  viz_cmd->add_option("flow", viz.flow, "Flow file");
  viz_cmd->add_option("--out", viz.out, "Output PNG (default: <stem>_viz.png)");
  viz_cmd->add_option("--max-mag", viz.max_mag, "Magnitude mapped to full saturation");

  GradcheckOptions grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of mixture NLL gradients");
  grad_cmd->add_option("--draws", grad.draws, "Random draws");
  grad_cmd->add_option("--step", grad.step, "Central-difference step");
  grad_cmd->add_option("--tolerance", grad.tolerance, "Maximum relative error");

  double oracle_tol = 1e-12;
  auto* oracle_cmd = app.add_subcommand("corr-oracle", "Compare correlation operators with brute-force oracles");
  oracle_cmd->add_option("--tolerance", oracle_tol, "Maximum relative error");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!g.config.empty()) merge_config(app, *sub, g.config);
    if (g.threads > 0) set_num_threads(g.threads);

    json report;
    bool pass = true;
    if (sub == synth_cmd) {
      report = do_synth(synth);
    } else if (sub == bases_cmd) {
      report = do_bases(bases);
    } else if (sub == fit_cmd) {
      emit(out, do_fit(fit), true);
      return kExitOk;
    } else if (sub == est_cmd) {
      report = do_estimate(est);
    } else if (sub == eval_cmd) {
      emit(out, do_eval(eval), true);
      return kExitOk;
    } else if (sub == viz_cmd) {
      report = do_viz(viz);
    } else if (sub == grad_cmd) {
      report = do_gradcheck(grad, g.seed, pass);
    } else if (sub == oracle_cmd) {
      report = do_corr_oracle(oracle_tol, g.seed, pass, out, g.json_output);
      if (!g.json_output) {
        out << (pass ? "all instances passed" : "some instances failed") << '\n';
        return pass ? kExitOk : kExitDomain;
      }
    }
    emit(out, report, g.json_output);
    return pass ? kExitOk : kExitDomain;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return run_impl(args, out, err);
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run_impl(std::move(args), std::cout, std::cerr);
}

}  // namespace flowseek::cli
