#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "splatalign/distill.hpp"
#include "splatalign/eval.hpp"
#include "splatalign/io.hpp"
#include "splatalign/optimizer.hpp"
#include "splatalign/renderer.hpp"
#include "splatalign/scene.hpp"

namespace splatalign::cli {
namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_manifest(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(read_file(path));
  std::string hash, name;
  while (in >> hash >> name) out.emplace_back(hash, name);
  return out;
}

namespace {

// Missing or unreadable input; maps to exit code 3.
class MissingInput : public Error {
 public:
  using Error::Error;
};

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

void write_manifest(const fs::path& dir, std::vector<std::string> files, const std::string& name = "manifest.txt") {
  std::sort(files.begin(), files.end());
  std::ostringstream out;
  for (const auto& rel : files) out << sha256_hex(read_file(dir / rel)) << "  " << rel << "\n";
  write_file(dir / name, out.str());
}

Benchmark load_bench_or_throw(const fs::path& dir) {
  if (!fs::exists(dir / "scene.ply") || !fs::exists(dir / "init.txt")) {
    throw MissingInput("benchmark directory " + dir.string() + " is incomplete");
  }
  try {
    return load_benchmark(dir);
  } catch (const Error& e) {
    throw MissingInput(std::string("cannot load benchmark: ") + e.what());
  }
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

class Stopwatch {
 public:
  void stage(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    stages_.emplace_back(name, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }
  std::string report() const {
    std::string out;
    for (const auto& [name, seconds] : stages_) out += "wall_clock." + name + " = " + fmt(seconds, "%.3f") + "\n";
    return out;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, double>> stages_;
};

// ---------------------------------------------------------------------------
// Alignment result files

struct StoredResult {
  std::string id;
  Sim3d transform;
  bool converged = false;
  bool early_stopped = false;
  long iterations = 0;
  std::vector<double> final_losses;
};

std::string format_result(const std::string& id, const AlignmentResult& r) {
  std::ostringstream out;
  const Eigen::Vector4d q = rotation_to_quaternion(r.transform.rotation);
  out << "id " << id << "\n"
      << "converged " << (r.converged ? 1 : 0) << "\n"
      << "early_stopped " << (r.early_stopped ? 1 : 0) << "\n"
      << "iterations " << r.iterations << "\n"
      << "transform";
  for (int a = 0; a < 4; ++a) out << " " << fmt(q(a));
  for (int a = 0; a < 3; ++a) out << " " << fmt(r.transform.translation(a));
  out << " " << fmt(r.transform.log_scale) << "\n";
  out << "final_losses";
  for (double l : r.final_losses.losses) out << " " << fmt(l);
  out << "\n";
  return out.str();
}

StoredResult parse_result(const std::string& text) {
  StoredResult r;
  std::istringstream in(text);
  std::string line;
  bool has_transform = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "id") {
      ls >> r.id;
    } else if (key == "converged") {
      int v = 0;
      if (!(ls >> v)) throw MissingInput("malformed converged flag");
      r.converged = v != 0;
    } else if (key == "early_stopped") {
      int v = 0;
      ls >> v;
      r.early_stopped = v != 0;
    } else if (key == "iterations") {
      ls >> r.iterations;
    } else if (key == "transform") {
      Eigen::Vector4d q;
      for (int a = 0; a < 4; ++a) {
        if (!(ls >> q(a))) throw MissingInput("malformed transform");
      }
      for (int a = 0; a < 3; ++a) {
        if (!(ls >> r.transform.translation(a))) throw MissingInput("malformed transform");
      }
      if (!(ls >> r.transform.log_scale)) throw MissingInput("malformed transform");
      r.transform.rotation = quaternion_to_rotation(q);
      has_transform = true;
    } else if (key == "final_losses") {
      double v;
      while (ls >> v) r.final_losses.push_back(v);
    } else {
      throw MissingInput("unknown result key '" + key + "'");
    }
  }
  if (r.id.empty() || !has_transform) throw MissingInput("result file lacks id or transform");
  return r;
}

// ---------------------------------------------------------------------------
// PCA preview

std::string pca_preview_ppm(const FeatureImage& image) {
  const Eigen::Index P = image.pixel_count();
  Eigen::MatrixXd rgb = Eigen::MatrixXd::Zero(3, P);
  if (P > 0 && image.channels > 0) {
    const Eigen::VectorXd mean = image.data.rowwise().mean();
    const Eigen::MatrixXd centered = image.data.colwise() - mean;
    const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(P);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const int k = std::min<int>(3, image.channels);
    for (int c = 0; c < k; ++c) {
      const Eigen::VectorXd axis = solver.eigenvectors().col(image.channels - 1 - c);
      rgb.row(c) = axis.transpose() * centered;
    }
    for (int c = 0; c < 3; ++c) {
      const double lo = rgb.row(c).minCoeff();
      const double hi = rgb.row(c).maxCoeff();
      if (hi > lo) rgb.row(c) = (rgb.row(c).array() - lo) / (hi - lo);
      else rgb.row(c).setZero();
    }
  }
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  for (Eigen::Index p = 0; p < P; ++p) {
    for (int c = 0; c < 3; ++c) out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * rgb(c, p))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Shared {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
};

void add_shared(CLI::App* sub, Shared& shared, bool out_required) {
  sub->set_config("--config", "", "key = value file; command-line flags win");
  sub->add_option("--seed", shared.seed, "random seed");
  sub->add_option("--jobs", shared.jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* out = sub->add_option("--out", shared.out, "output path");
  if (out_required) out->required();
}

int cmd_synth(const SyntheticBenchSpec& base, const Shared& shared) {
  SyntheticBenchSpec spec = base;
  spec.seed = shared.seed;
  spec.validate();
  const SyntheticBench synth = generate_synthetic_bench(spec);
  Benchmark bench{synth.scene, synth.metas, synth.inits, synth.outliers};
  const fs::path dir(shared.out);
  const auto files = save_benchmark(bench, dir);
  write_manifest(dir, files);
  std::cout << "wrote " << files.size() << " files to " << dir.string() << "\n";
  return kOk;
}

struct AlignArgs {
  std::string bench;
  int steps = 2000;
  double lr = 1e-3;
  std::string loss = "semantic-l1";
  std::string robust = "lts";
  int window = 50;
  double tolerance = 1e-6;
  bool trim_first = false;
};

AlignOptions make_options(const AlignArgs& a, std::uint64_t seed) {
  AlignOptions o;
  o.steps = a.steps;
  o.learning_rate = a.lr;
  o.early_stop_window = a.window;
  o.early_stop_tolerance = a.tolerance;
  o.trim_first_iteration = a.trim_first;
  o.seed = seed;
  const auto loss = parse_loss_kind(a.loss);
  const auto robust = parse_robust_mode(a.robust);
  if (!loss) throw SpecInvalid("unknown loss '" + a.loss + "'");
  if (!robust) throw SpecInvalid("unknown robust mode '" + a.robust + "'");
  o.loss = *loss;
  o.robust = *robust;
  o.validate();
  return o;
}

int cmd_align(const AlignArgs& args, const Shared& shared) {
  Stopwatch clock;
  const AlignOptions options = make_options(args, shared.seed);
  const Benchmark bench = load_bench_or_throw(args.bench);
  clock.stage("load");

  const fs::path dir(shared.out);
  fs::create_directories(dir);
  std::vector<std::string> files(bench.metas.size() * 2);
  std::mutex log_mutex;
  parallel_for(bench.metas.size(), shared.jobs, [&](std::size_t m) {
    const MetaImage& meta = bench.metas[m];
    const AlignmentResult result = align(bench.scene, meta, bench.inits[m], options);
    files[2 * m] = meta.id + ".result.txt";
    files[2 * m + 1] = meta.id + ".trace.txt";
    write_file(dir / files[2 * m], format_result(meta.id, result));
    write_file(dir / files[2 * m + 1], format_trace(result));
    std::lock_guard<std::mutex> lock(log_mutex);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  });
  clock.stage("align");
  write_manifest(dir, files);

  std::ostringstream run;
  run << "benchmark = " << fs::absolute(args.bench).string() << "\n"
      << "scene = " << (fs::absolute(args.bench) / "scene.ply").string() << "\n"
      << "steps = " << options.steps << "\nlearning_rate = " << fmt(options.learning_rate) << "\n"
      << "loss = " << to_string(options.loss) << "\nrobust = " << to_string(options.robust) << "\n"
      << "early_stop_window = " << options.early_stop_window << "\n"
      << "early_stop_tolerance = " << fmt(options.early_stop_tolerance) << "\n"
      << "trim_first_iteration = " << (options.trim_first_iteration ? "true" : "false") << "\n"
      << "seed = " << options.seed << "\njobs = " << shared.jobs << "\n";
  for (const auto& f : files) run << "output = " << f << "\n";
  clock.stage("write");
  run << clock.report();
  // Written last, via rename, so a partial manifest never appears.
  write_file(dir / "run_manifest.txt.tmp", run.str());
  fs::rename(dir / "run_manifest.txt.tmp", dir / "run_manifest.txt");
  std::cout << "aligned " << bench.metas.size() << " meta-images into " << dir.string() << "\n";
  return kOk;
}

struct EvalArgs {
  std::string bench;
  std::string results;
  double mta_r = 5.0, mta_t = 0.2, out_r = 10.0, out_t = 0.5;
  bool sweep = false;
};

std::string format_report(const std::vector<std::string>& ids, const MetricsReport& report, const Thresholds& th,
                          std::string* tsv) {
  std::ostringstream human;
  std::ostringstream machine;
  machine << "id\tdR\tdT\taccurate\toutlier\n";
  human << "meta-image      dR(deg)      dT   accurate outlier\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& e = report.entries[i];
    if (!e) {
      human << ids[i] << "  failed\n";
      machine << ids[i] << "\tnan\tnan\t0\t0\n";
      continue;
    }
    const Classification c = classify(*e, th);
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %10.4f %9.5f   %-8s %s\n", ids[i].c_str(), e->dR, e->dT,
                  c.accurate ? "yes" : "no", c.outlier ? "yes" : "no");
    human << line;
    machine << ids[i] << "\t" << fmt(e->dR) << "\t" << fmt(e->dT) << "\t" << (c.accurate ? 1 : 0) << "\t"
            << (c.outlier ? 1 : 0) << "\n";
  }
  human << "\nmean dR: " << (report.mean_dR ? fmt(*report.mean_dR, "%.4f") : std::string("n/a"))
        << "  mean dT: " << (report.mean_dT ? fmt(*report.mean_dT, "%.5f") : std::string("n/a"))
        << "  MTA: " << report.mta_rounded() << "%  O%: " << report.outlier_rounded()
        << "%  failures: " << report.failures << "\n";
  *tsv = machine.str();
  return human.str();
}

int cmd_eval(const EvalArgs& args, const Shared& shared) {
  if (!fs::is_directory(args.results)) throw MissingInput("results directory " + args.results + " not found");
  const Benchmark bench = load_bench_or_throw(args.bench);
  Thresholds th;
  th.mta = {args.mta_r, args.mta_t};
  th.outlier = {args.out_r, args.out_t};

  std::vector<std::string> ids;
  std::vector<std::optional<MetaImageErrors>> entries;
  for (std::size_t m = 0; m < bench.metas.size(); ++m) {
    const MetaImage& meta = bench.metas[m];
    const fs::path file = fs::path(args.results) / (meta.id + ".result.txt");
    if (!fs::exists(file)) continue;
    const StoredResult r = parse_result(read_file(file));
    if (r.id != meta.id) throw MissingInput("result id mismatch in " + file.string());
    ids.push_back(meta.id);
    if (!r.converged || !meta.ground_truth) {
      entries.emplace_back(std::nullopt);
    } else {
      entries.emplace_back(meta_errors(r.transform, *meta.ground_truth, meta, bench.scene.scene_unit));
    }
  }

  const MetricsReport report = aggregate(entries, th);
  std::string tsv;
  const std::string human = format_report(ids, report, th, &tsv);
  const fs::path dir(shared.out.empty() ? args.results : shared.out);
  fs::create_directories(dir);
  write_file(dir / "report.txt", human);
  write_file(dir / "report.tsv", tsv);
  std::vector<std::string> files{"report.txt", "report.tsv"};
  if (args.sweep) {
    const auto rows = threshold_sweep(entries, {1, 2, 5, 10, 20}, {0.05, 0.1, 0.2, 0.5, 1.0});
    std::ostringstream out;
    out << "metric\tr_deg\tt\tpercent\n";
    for (const auto& row : rows) {
      out << row.metric << "\t" << fmt(row.threshold.r_deg) << "\t" << fmt(row.threshold.t) << "\t"
          << fmt(row.percent) << "\n";
    }
    write_file(dir / "sweep.tsv", out.str());
    files.push_back("sweep.tsv");
  }
  write_manifest(dir, files, "eval_manifest.txt");
  std::cout << human;
  return kOk;
}

double median_of(std::vector<double> v) { return v.empty() ? std::nan("") : median(std::move(v)); }

int cmd_ablate(const AlignArgs& args, const Shared& shared) {
  const Benchmark bench = load_bench_or_throw(args.bench);
  struct Variant {
    RobustMode robust;
    LossKind loss;
  };
  std::vector<Variant> variants;
  for (auto loss : {LossKind::kSemanticL1, LossKind::kSemanticL2, LossKind::kPhotometricL1}) {
    for (auto robust : {RobustMode::kLTS, RobustMode::kFixedLTS, RobustMode::kNoTrim, RobustMode::kIRLS}) {
      variants.push_back({robust, loss});
    }
  }
  const std::size_t n_meta = bench.metas.size();
  std::vector<std::optional<MetaImageErrors>> errors(variants.size() * n_meta);
  parallel_for(errors.size(), shared.jobs, [&](std::size_t task) {
    const Variant& v = variants[task / n_meta];
    const std::size_t m = task % n_meta;
    AlignArgs a = args;
    a.loss = to_string(v.loss);
    a.robust = to_string(v.robust);
    const AlignOptions options = make_options(a, shared.seed);
    const MetaImage& meta = bench.metas[m];
    const AlignmentResult r = align(bench.scene, meta, bench.inits[m], options);
    if (r.converged && meta.ground_truth) {
      errors[task] = meta_errors(r.transform, *meta.ground_truth, meta, bench.scene.scene_unit);
    }
  });

  std::ostringstream out;
  out << "loss\trobust\tmedian_dR\tmedian_dT\tmean_dR\tmean_dT\tMTA\tO%\tfailures\n";
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<std::optional<MetaImageErrors>> entries(errors.begin() + static_cast<long>(v * n_meta),
                                                        errors.begin() + static_cast<long>((v + 1) * n_meta));
    const MetricsReport report = aggregate(entries, Thresholds{});
    std::vector<double> dr, dt;
    for (const auto& e : entries) {
      if (e) {
        dr.push_back(e->dR);
        dt.push_back(e->dT);
      }
    }
    out << to_string(variants[v].loss) << "\t" << to_string(variants[v].robust) << "\t" << fmt(median_of(dr), "%.6g")
        << "\t" << fmt(median_of(dt), "%.6g") << "\t" << (report.mean_dR ? fmt(*report.mean_dR, "%.6g") : "nan")
        << "\t" << (report.mean_dT ? fmt(*report.mean_dT, "%.6g") : "nan") << "\t" << report.mta_rounded() << "\t"
        << report.outlier_rounded() << "\t" << report.failures << "\n";
  }
  const fs::path dir(shared.out);
  fs::create_directories(dir);
  write_file(dir / "ablation.tsv", out.str());
  std::cout << out.str();
  return kOk;
}

struct RenderArgs {
  std::string bench;
  std::string meta;
  int image = 0;
  std::string pose = "gt";
  std::string results;
  std::string attribute = "feature";
};

int cmd_render(const RenderArgs& args, const Shared& shared) {
  const Benchmark bench = load_bench_or_throw(args.bench);
  std::size_t m = 0;
  while (m < bench.metas.size() && bench.metas[m].id != args.meta) ++m;
  if (m == bench.metas.size()) throw MissingInput("no meta-image '" + args.meta + "'");
  const MetaImage& meta = bench.metas[m];
  if (args.image < 0 || static_cast<std::size_t>(args.image) >= meta.size()) {
    throw SpecInvalid("image index out of range");
  }
  Sim3d T;
  if (args.pose == "gt") {
    if (!meta.ground_truth) throw MissingInput("benchmark has no ground truth for " + meta.id);
    T = *meta.ground_truth;
  } else if (args.pose == "init") {
    T = bench.inits[m];
  } else if (args.pose == "result") {
    const fs::path file = fs::path(args.results) / (meta.id + ".result.txt");
    if (!fs::exists(file)) throw MissingInput("missing " + file.string());
    T = parse_result(read_file(file)).transform;
  } else {
    throw SpecInvalid("pose must be gt, init or result");
  }
  if (args.attribute != "feature" && args.attribute != "color") throw SpecInvalid("attribute must be feature or color");
  const Attribute attr = args.attribute == "color" ? Attribute::kColor : Attribute::kFeature;
  const FeatureImage image = render(bench.scene, meta.views[static_cast<std::size_t>(args.image)].camera, T, attr);
  fs::path out(shared.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_fmap(image, out);
  fs::path preview = out;
  preview.replace_extension(".ppm");
  write_file(preview, pca_preview_ppm(image));
  std::cout << "wrote " << out.string() << " and " << preview.string() << "\n";
  return kOk;
}

struct DistillArgs {
  std::string bench;
  int steps = 3000;
  double lr = 0.05;
  double final_lr = 1e-4;
  std::string norm = "l1";
  bool zero_init = false;
};

int cmd_distill(const DistillArgs& args, const Shared& shared) {
  const Benchmark bench = load_bench_or_throw(args.bench);
  if (args.norm != "l1" && args.norm != "l2") throw SpecInvalid("norm must be l1 or l2");
  std::vector<PosedTarget> targets;
  for (const MetaImage& meta : bench.metas) {
    if (!meta.ground_truth) continue;
    for (const MetaView& view : meta.views) {
      targets.push_back({transform_camera(*meta.ground_truth, view.camera), view.target});
    }
  }
  GaussianScene scene = bench.scene;
  if (args.zero_init) {
    for (auto& g : scene.splats) g.feature.setZero();
  }
  DistillOptions options;
  options.steps = args.steps;
  options.learning_rate = args.lr;
  options.final_learning_rate = args.final_lr;
  options.norm = args.norm == "l2" ? DistillNorm::kL2 : DistillNorm::kL1;
  const GaussianScene out = distill_features(scene, targets, options);
  fs::path path(shared.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_scene_ply(out, path);
  std::cout << "distilled " << out.splats.size() << " splats from " << targets.size() << " targets; loss "
            << fmt(distill_loss(out, targets, options), "%.6g") << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Align posed image bundles to a frozen feature-splat reference model", "splatalign"};
  app.require_subcommand(1);

  SyntheticBenchSpec spec;
  Shared synth_shared, align_shared, eval_shared, ablate_shared, render_shared, distill_shared;

  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark");
  add_shared(synth, synth_shared, true);
  synth->add_option("--n-splats", spec.n_splats);
  synth->add_option("--feature-dim", spec.feature_dim);
  synth->add_option("--n-reference-cameras", spec.n_reference_cameras);
  synth->add_option("--n-meta", spec.n_meta_images);
  synth->add_option("--images-per-meta", spec.images_per_meta);
  synth->add_option("--outlier-fraction", spec.outlier_fraction);
  synth->add_option("--occluder-coverage", spec.occluder_coverage);
  synth->add_option("--floater-fraction", spec.floater_fraction);
  synth->add_option("--rotation-noise-deg", spec.rotation_noise_deg);
  synth->add_option("--translation-noise", spec.translation_noise);
  synth->add_option("--scale-min", spec.scale_min);
  synth->add_option("--scale-max", spec.scale_max);
  synth->add_option("--color-gain-jitter", spec.color_gain_jitter);
  synth->add_option("--feature-noise", spec.feature_noise);
  synth->add_option("--width", spec.image_width);
  synth->add_option("--height", spec.image_height);
  synth->add_option("--near-plane", spec.near_plane);

  AlignArgs align_args;
  auto add_align_flags = [](CLI::App* sub, AlignArgs& a, bool with_modes) {
    sub->add_option("--bench", a.bench, "benchmark directory")->required();
    sub->add_option("--steps", a.steps);
    sub->add_option("--lr", a.lr);
    sub->add_option("--early-stop-window", a.window);
    sub->add_option("--early-stop-tol", a.tolerance);
    sub->add_flag("--trim-first", a.trim_first, "trim the first iteration against losses at the initial pose");
    if (with_modes) {
      sub->add_option("--loss", a.loss, "semantic-l1 | semantic-l2 | photometric-l1");
      sub->add_option("--robust", a.robust, "lts | fixed-lts | no-trim | irls");
    }
  };
  auto* align_cmd = app.add_subcommand("align", "align every meta-image of a benchmark");
  add_shared(align_cmd, align_shared, true);
  add_align_flags(align_cmd, align_args, true);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score alignment results");
  add_shared(eval_cmd, eval_shared, false);
  eval_cmd->add_option("--bench", eval_args.bench)->required();
  eval_cmd->add_option("--results", eval_args.results)->required();
  eval_cmd->add_option("--mta-r", eval_args.mta_r);
  eval_cmd->add_option("--mta-t", eval_args.mta_t);
  eval_cmd->add_option("--outlier-r", eval_args.out_r);
  eval_cmd->add_option("--outlier-t", eval_args.out_t);
  eval_cmd->add_flag("--sweep", eval_args.sweep, "also write the MTA / O% threshold sweep");

  AlignArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "robust mode x loss ablation table");
  add_shared(ablate_cmd, ablate_shared, true);
  add_align_flags(ablate_cmd, ablate_args, false);

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "render one benchmark view to FMAP plus a PCA preview");
  add_shared(render_cmd, render_shared, true);
  render_cmd->add_option("--bench", render_args.bench)->required();
  render_cmd->add_option("--meta", render_args.meta)->required();
  render_cmd->add_option("--image", render_args.image);
  render_cmd->add_option("--pose", render_args.pose, "gt | init | result");
  render_cmd->add_option("--results", render_args.results);
  render_cmd->add_option("--attribute", render_args.attribute, "feature | color");

  DistillArgs distill_args;
  auto* distill_cmd = app.add_subcommand("distill", "bake features from benchmark targets onto the scene");
  add_shared(distill_cmd, distill_shared, true);
  distill_cmd->add_option("--bench", distill_args.bench)->required();
  distill_cmd->add_option("--steps", distill_args.steps);
  distill_cmd->add_option("--lr", distill_args.lr);
  distill_cmd->add_option("--final-lr", distill_args.final_lr);
  distill_cmd->add_option("--norm", distill_args.norm, "l1 | l2");
  distill_cmd->add_flag("--zero-init", distill_args.zero_init, "start from zero features");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*synth) return cmd_synth(spec, synth_shared);
    if (*align_cmd) return cmd_align(align_args, align_shared);
    if (*eval_cmd) return cmd_eval(eval_args, eval_shared);
    if (*ablate_cmd) return cmd_ablate(ablate_args, ablate_shared);
    if (*render_cmd) return cmd_render(render_args, render_shared);
    if (*distill_cmd) return cmd_distill(distill_args, distill_shared);
  } catch (const SpecInvalid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }
  std::cerr << app.help();
  return kUsage;
}

}  // namespace splatalign::cli
